#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace grdpg {

using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr int max_hadamard_exponent = 14;

inline DenseMatrix hadamard(int k) {
    require(k >= 0 && k <= max_hadamard_exponent,
            "hadamard: exponent must be in [0, " + std::to_string(max_hadamard_exponent) + "]");
    DenseMatrix h(1, 1);
    h(0, 0) = 1.0;
    for (int s = 0; s < k; ++s) {
        const Index m = h.rows();
        DenseMatrix next(2 * m, 2 * m);
        next.topLeftCorner(m, m) = h;
        next.topRightCorner(m, m) = h;
        next.bottomLeftCorner(m, m) = h;
        next.bottomRightCorner(m, m) = -h;
        h.swap(next);
    }
    return h;
}

inline DenseMatrix signature_matrix(int p, int q) {
    require(p >= 0 && q >= 0 && p + q >= 1, "signature_matrix: need p, q >= 0 and p + q >= 1");
    DenseMatrix s = DenseMatrix::Zero(p + q, p + q);
    for (int i = 0; i < p + q; ++i) s(i, i) = i < p ? 1.0 : -1.0;
    return s;
}

inline double max_abs(const DenseMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline bool all_finite(const DenseMatrix& m) { return m.allFinite(); }

inline double two_to_infinity_norm(const DenseMatrix& m) {
    if (m.rows() == 0 || m.cols() == 0) return 0.0;
    return m.rowwise().norm().maxCoeff();
}

inline double frobenius_norm(const DenseMatrix& m) { return m.norm(); }

inline double operator_norm(const DenseMatrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues()(0);
}

inline double orthonormality_defect(const DenseMatrix& u) {
    const DenseMatrix g = u.transpose() * u;
    return max_abs(g - DenseMatrix::Identity(u.cols(), u.cols()));
}

inline void require_symmetric(const DenseMatrix& s, const char* who) {
    require(s.rows() == s.cols(), std::string(who) + ": matrix must be square");
    const double scale = max_abs(s);
    const double asym = max_abs(s - s.transpose());
    require(asym <= 1e-9 * scale, std::string(who) + ": matrix not symmetric (max|S - S^T| = " +
                                      std::to_string(asym) + ")");
}

// First component that is nonzero (relative to the column's largest entry) made positive.
template <class M>
void normalize_column_signs(M& v) {
    for (Index j = 0; j < v.cols(); ++j) {
        const double big = v.col(j).cwiseAbs().maxCoeff();
        for (Index i = 0; i < v.rows(); ++i) {
            if (std::abs(v(i, j)) > 1e-10 * big) {
                if (v(i, j) < 0) v.col(j) *= -1.0;
                break;
            }
        }
    }
}

struct EigenSelection {
    Vector values;        // descending
    DenseMatrix vectors;  // orthonormal columns
    bool tie_at_cutoff = false;
};

inline EigenSelection symmetric_eigen(const DenseMatrix& s) {
    require_symmetric(s, "symmetric_eigen");
    require(s.allFinite(), "symmetric_eigen: non-finite entries");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(0.5 * (s + s.transpose())));
    if (es.info() != Eigen::Success) throw ComputeError("symmetric_eigen: decomposition failed");
    EigenSelection out;
    out.values = es.eigenvalues().reverse();
    out.vectors = es.eigenvectors().rowwise().reverse();
    normalize_column_signs(out.vectors);
    return out;
}

struct LanczosOptions {
    Index basis = 0;           // Krylov basis size; 0 picks a default from n and the request
    long max_matvecs = 40000;  // iteration budget
    double tol = 1e-10;        // residual tolerance relative to the spectral norm estimate
    std::uint64_t seed = 0x4c616e637a6f73ull;
};

struct ExtremePairs {
    EigenSelection top;     // algebraically largest, descending
    EigenSelection bottom;  // algebraically smallest, ascending (i.e. top of -S)
    long matvecs = 0;
};

namespace detail {

inline void orthogonalize(const Eigen::MatrixXd& v, Index cols, Vector& w) {
    for (int pass = 0; pass < 2; ++pass) {
        if (cols == 0) return;
        const Vector c = v.leftCols(cols).transpose() * w;
        w.noalias() -= v.leftCols(cols) * c;
    }
}

inline ExtremePairs split_selection(const Vector& vals_desc, const Eigen::MatrixXd& vecs, int top,
                                    int bottom) {
    const Index n = vals_desc.size();
    ExtremePairs out;
    out.top.values = vals_desc.head(top);
    out.top.vectors = vecs.leftCols(top);
    out.bottom.values.resize(bottom);
    out.bottom.vectors.resize(vecs.rows(), bottom);
    for (int j = 0; j < bottom; ++j) {
        out.bottom.values(j) = vals_desc(n - 1 - j);
        out.bottom.vectors.col(j) = vecs.col(n - 1 - j);
    }
    normalize_column_signs(out.top.vectors);
    normalize_column_signs(out.bottom.vectors);
    auto gap_tol = [&](double a, double b) {
        const double scale = std::max(std::abs(vals_desc(0)), std::abs(vals_desc(n - 1)));
        return std::abs(a - b) <= 1e-10 * std::max(scale, 1e-300);
    };
    if (top > 0 && top < n) out.top.tie_at_cutoff = gap_tol(vals_desc(top - 1), vals_desc(top));
    if (bottom > 0 && bottom < n)
        out.bottom.tie_at_cutoff = gap_tol(vals_desc(n - bottom), vals_desc(n - bottom - 1));
    return out;
}

}  // namespace detail

// Largest `top` and smallest `bottom` eigenpairs of a symmetric operator given only
// through y = S x. Thick-restart Lanczos with full reorthogonalization; one Krylov
// space serves both ends of the spectrum.
template <class Op>
ExtremePairs extreme_eigenpairs(Op&& apply, Index n, int top, int bottom, LanczosOptions opt = {}) {
    require(top >= 0 && bottom >= 0 && top + bottom >= 1 && top + bottom <= n,
            "extreme_eigenpairs: need 1 <= top + bottom <= n");
    const int want = top + bottom;
    Index m = opt.basis > 0 ? opt.basis : std::max<Index>(3 * want + 40, 120);
    m = std::min(m, n);

    if (n <= std::max<Index>(2 * m, 64)) {
        // Small problem: materialize the operator and decompose densely.
        Eigen::MatrixXd s(n, n);
        Vector e = Vector::Zero(n), y(n);
        for (Index j = 0; j < n; ++j) {
            e(j) = 1.0;
            apply(e, y);
            s.col(j) = y;
            e(j) = 0.0;
        }
        DenseMatrix sym = 0.5 * (s + s.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(sym)};
        if (es.info() != Eigen::Success) throw ComputeError("extreme_eigenpairs: dense fallback failed");
        Vector vals = es.eigenvalues().reverse();
        Eigen::MatrixXd vecs = es.eigenvectors().rowwise().reverse();
        auto out = detail::split_selection(vals, vecs, top, bottom);
        out.matvecs = n;
        return out;
    }

    PhiloxStream rng(opt.seed, static_cast<std::uint64_t>(n));
    auto random_vector = [&] {
        Vector v(n);
        for (Index i = 0; i < n; ++i) v(i) = rng.uniform(-1.0, 1.0);
        return v;
    };

    Eigen::MatrixXd v(n, m), av(n, m);
    Vector w = random_vector();
    w.normalize();
    v.col(0) = w;
    Index j = 0;
    long matvecs = 0;
    double norm_est = 0.0;
    Vector y(n);

    const int extra = static_cast<int>(std::max<Index>((m - want) / 2, 0));
    const int keep_top = top > 0 ? top + extra / (bottom > 0 ? 2 : 1) : 0;
    const int keep_bottom = bottom > 0 ? bottom + extra / (top > 0 ? 2 : 1) : 0;

    for (;;) {
        while (j < m) {
            apply(v.col(j), y);
            av.col(j) = y;
            ++matvecs;
            ++j;
            if (j < m) {
                w = av.col(j - 1);
                detail::orthogonalize(v, j, w);
                double nw = w.norm();
                norm_est = std::max(norm_est, av.col(j - 1).norm());
                if (nw <= 1e-12 * std::max(norm_est, 1e-300)) {
                    // Invariant subspace reached; continue with a fresh direction.
                    w = random_vector();
                    detail::orthogonalize(v, j, w);
                    nw = w.norm();
                }
                v.col(j) = w / nw;
            }
        }

        Eigen::MatrixXd h = v.transpose() * av;
        h = 0.5 * (h + h.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
        if (es.info() != Eigen::Success) throw ComputeError("extreme_eigenpairs: projected problem failed");
        const Vector& theta = es.eigenvalues();  // ascending
        const Eigen::MatrixXd& yv = es.eigenvectors();
        norm_est = std::max({norm_est, std::abs(theta(0)), std::abs(theta(m - 1))});

        std::vector<Index> wanted;
        for (int t = 0; t < top; ++t) wanted.push_back(m - 1 - t);
        for (int b = 0; b < bottom; ++b) wanted.push_back(b);
        bool converged = true;
        for (Index idx : wanted) {
            const Vector x = v * yv.col(idx);
            const Vector r = av * yv.col(idx) - theta(idx) * x;
            if (r.norm() > opt.tol * norm_est) {
                converged = false;
                break;
            }
        }

        if (converged) {
            ExtremePairs out;
            out.top.values.resize(top);
            out.top.vectors.resize(n, top);
            for (int t = 0; t < top; ++t) {
                out.top.values(t) = theta(m - 1 - t);
                out.top.vectors.col(t) = v * yv.col(m - 1 - t);
            }
            out.bottom.values.resize(bottom);
            out.bottom.vectors.resize(n, bottom);
            for (int b = 0; b < bottom; ++b) {
                out.bottom.values(b) = theta(b);
                out.bottom.vectors.col(b) = v * yv.col(b);
            }
            normalize_column_signs(out.top.vectors);
            normalize_column_signs(out.bottom.vectors);
            const double tie = 1e-10 * norm_est;
            if (top > 0 && top < m) out.top.tie_at_cutoff = std::abs(theta(m - top) - theta(m - 1 - top)) <= tie;
            if (bottom > 0 && bottom < m)
                out.bottom.tie_at_cutoff = std::abs(theta(bottom - 1) - theta(bottom)) <= tie;
            // Tie flags compare against the neighbouring Ritz value, an estimate only.
            out.matvecs = matvecs;
            return out;
        }
        if (matvecs >= opt.max_matvecs)
            throw ComputeError("extreme_eigenpairs: no convergence within " + std::to_string(opt.max_matvecs) +
                               " operator applications");

        // Thick restart: keep Ritz vectors near both ends plus the next Lanczos direction.
        std::vector<Index> keep;
        for (int t = 0; t < keep_top; ++t) keep.push_back(m - 1 - t);
        for (int b = 0; b < keep_bottom; ++b) keep.push_back(b);
        std::sort(keep.begin(), keep.end());
        keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
        const Index l = static_cast<Index>(keep.size());

        w = av.col(m - 1);
        detail::orthogonalize(v, m, w);

        Eigen::MatrixXd yk(m, l);
        for (Index c = 0; c < l; ++c) yk.col(c) = yv.col(keep[c]);
        Eigen::MatrixXd vk = v * yk;
        Eigen::MatrixXd avk = av * yk;
        v.leftCols(l) = vk;
        av.leftCols(l) = avk;
        detail::orthogonalize(v, l, w);
        double nw = w.norm();
        if (nw <= 1e-12 * norm_est) {
            w = random_vector();
            detail::orthogonalize(v, l, w);
            nw = w.norm();
        }
        v.col(l) = w / nw;
        j = l;
    }
}

// Dense entry point: exact decomposition up to 512 rows, Lanczos above.
inline EigenSelection top_eigenpairs(const DenseMatrix& s, int k, LanczosOptions opt = {}) {
    require_symmetric(s, "top_eigenpairs");
    require(k >= 1 && k <= s.rows(), "top_eigenpairs: need 1 <= k <= n");
    if (s.rows() <= 512) {
        EigenSelection full = symmetric_eigen(s);
        EigenSelection out;
        out.values = full.values.head(k);
        out.vectors = full.vectors.leftCols(k);
        if (k < s.rows()) {
            const double scale = std::max(std::abs(full.values(0)), std::abs(full.values(s.rows() - 1)));
            out.tie_at_cutoff = std::abs(full.values(k - 1) - full.values(k)) <= 1e-10 * scale;
        }
        return out;
    }
    auto op = [&](const auto& x, Vector& y) { y.noalias() = s * x; };
    return extreme_eigenpairs(op, s.rows(), k, 0, opt).top;
}

struct ThinSVD {
    DenseMatrix u;  // n x r
    Vector s;       // descending
    DenseMatrix v;  // d x r
};

inline ThinSVD thin_svd(const DenseMatrix& g) {
    require(g.allFinite(), "thin_svd: non-finite entries");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(g), Eigen::ComputeThinU | Eigen::ComputeThinV);
    ThinSVD out{svd.matrixU(), svd.singularValues(), svd.matrixV()};
    // Sign convention on right vectors, carried over to the left ones.
    for (Index j = 0; j < out.v.cols(); ++j) {
        const double big = out.v.col(j).cwiseAbs().maxCoeff();
        for (Index i = 0; i < out.v.rows(); ++i) {
            if (std::abs(out.v(i, j)) > 1e-10 * big) {
                if (out.v(i, j) < 0) {
                    out.v.col(j) *= -1.0;
                    out.u.col(j) *= -1.0;
                }
                break;
            }
        }
    }
    return out;
}

inline DenseMatrix polar_orthogonal_factor(const DenseMatrix& g) {
    require(g.rows() >= g.cols() && g.cols() >= 1, "polar_orthogonal_factor: need n >= d >= 1");
    const ThinSVD svd = thin_svd(g);
    const double smax = svd.s(0), smin = svd.s(svd.s.size() - 1);
    require(smin > 1e-12 * smax, "polar_orthogonal_factor: rank-deficient input (sigma_min/sigma_max = " +
                                     std::to_string(smax > 0 ? smin / smax : 0.0) + ")");
    return svd.u * svd.v.transpose();
}

inline double incoherence(const DenseMatrix& u) {
    require(u.rows() >= 1 && u.cols() >= 1, "incoherence: empty frame");
    require(orthonormality_defect(u) <= 1e-8, "incoherence: frame columns are not orthonormal");
    const double t = two_to_infinity_norm(u);
    return static_cast<double>(u.rows()) * t * t / static_cast<double>(u.cols());
}

// ---- text and binary matrix files ----

inline std::string format_real(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_csv(std::ostream& os, const DenseMatrix& m) {
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) os << ',';
            os << format_real(m(i, j));
        }
        os << '\n';
    }
}

// Blank lines and lines starting with '#' are skipped.
inline DenseMatrix read_csv(std::istream& is) {
    std::vector<double> data;
    Index cols = -1, rows = 0;
    std::string line;
    long lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        Index c = 0;
        std::size_t pos = 0;
        for (;;) {
            const std::size_t comma = line.find(',', pos);
            const std::string cell = line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            char* end = nullptr;
            const double x = std::strtod(cell.c_str(), &end);
            while (end && (*end == ' ' || *end == '\t')) ++end;
            if (cell.empty() || end == cell.c_str() || (end && *end != '\0') || !std::isfinite(x))
                throw ValidationError("csv line " + std::to_string(lineno) + ": bad number '" + cell + "'");
            data.push_back(x);
            ++c;
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (cols < 0) cols = c;
        if (c != cols)
            throw ValidationError("csv line " + std::to_string(lineno) + ": expected " + std::to_string(cols) +
                                  " columns, found " + std::to_string(c));
        ++rows;
    }
    if (rows == 0) return DenseMatrix(0, 0);
    return Eigen::Map<DenseMatrix>(data.data(), rows, cols);
}

namespace detail {

template <class T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        std::reverse(b, b + sizeof(T));
        std::memcpy(&v, b, sizeof(T));
    }
    return v;
}

}  // namespace detail

// "GMX1", u64 rows, u64 cols, then rows*cols f64, all little-endian, row-major.
inline void write_gmx1(std::ostream& os, const DenseMatrix& m) {
    os.write("GMX1", 4);
    const std::uint64_t r = detail::to_little<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    const std::uint64_t c = detail::to_little<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    os.write(reinterpret_cast<const char*>(&r), 8);
    os.write(reinterpret_cast<const char*>(&c), 8);
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) {
            const double x = detail::to_little(m(i, j));
            os.write(reinterpret_cast<const char*>(&x), 8);
        }
}

inline DenseMatrix read_gmx1(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "GMX1", 4) != 0) throw ValidationError("gmx1: bad magic");
    std::uint64_t r = 0, c = 0;
    if (!is.read(reinterpret_cast<char*>(&r), 8) || !is.read(reinterpret_cast<char*>(&c), 8))
        throw ValidationError("gmx1: truncated header");
    r = detail::to_little(r);
    c = detail::to_little(c);
    if (r > (1ull << 31) || c > (1ull << 31) || (r && c > (1ull << 40) / r))
        throw ValidationError("gmx1: implausible shape");
    DenseMatrix m(static_cast<Index>(r), static_cast<Index>(c));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) {
            double x;
            if (!is.read(reinterpret_cast<char*>(&x), 8)) throw ValidationError("gmx1: truncated payload");
            x = detail::to_little(x);
            if (!std::isfinite(x)) throw ValidationError("gmx1: non-finite entry");
            m(i, j) = x;
        }
    return m;
}

inline bool has_suffix(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

inline bool is_binary_path(const std::string& path) {
    return has_suffix(path, ".gmx") || has_suffix(path, ".gmx1") || has_suffix(path, ".bin");
}

inline void save_matrix(const std::string& path, const DenseMatrix& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ComputeError("cannot open '" + path + "' for writing");
    if (is_binary_path(path))
        write_gmx1(os, m);
    else
        write_csv(os, m);
    if (!os) throw ComputeError("write failed for '" + path + "'");
}

inline DenseMatrix load_matrix(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open '" + path + "'");
    return is_binary_path(path) ? read_gmx1(is) : read_csv(is);
}

}  // namespace grdpg
