#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "matrixkit.hpp"
#include "rng.hpp"

namespace grdpg {

struct Signature {
    int p = 1;
    int q = 0;
    int d() const { return p + q; }
    bool operator==(const Signature&) const = default;
};

inline void validate(const Signature& s) {
    require(s.p >= 0 && s.q >= 0 && s.d() >= 1, "signature: need p, q >= 0 and p + q >= 1");
}

// P = U diag(Lambda)^{1/2} I_{p,q} diag(Lambda)^{1/2} U^T. Lambda holds magnitudes,
// descending within the positive block and within the negative block.
struct SpectralPair {
    DenseMatrix frame;
    Vector magnitudes;
    Signature signature;

    Index n() const { return frame.rows(); }
    int d() const { return signature.d(); }

    // Canonical latent positions U Lambda^{1/2}.
    DenseMatrix latent() const { return frame * magnitudes.cwiseSqrt().asDiagonal(); }
};

inline void validate(const SpectralPair& pair, double tol = 1e-10) {
    validate(pair.signature);
    require(pair.frame.cols() == pair.d(), "spectral pair: frame has " + std::to_string(pair.frame.cols()) +
                                               " columns, signature needs " + std::to_string(pair.d()));
    require(pair.magnitudes.size() == pair.d(), "spectral pair: wrong number of eigenvalue magnitudes");
    require(pair.frame.allFinite() && pair.magnitudes.allFinite(), "spectral pair: non-finite entries");
    require((pair.magnitudes.array() > 0).all(), "spectral pair: eigenvalue magnitudes must be positive");
    require(orthonormality_defect(pair.frame) <= tol, "spectral pair: frame columns not orthonormal");
}

inline constexpr double entry_clamp_tol = 1e-12;
inline constexpr double entry_error_tol = 1e-9;

struct ProbabilityMatrix {
    DenseMatrix entries;
    double sparsity = 1.0;
    Index n() const { return entries.rows(); }
};

// Symmetrizes, rejects entries outside [0,1] by more than entry_error_tol, clamps the rest.
inline ProbabilityMatrix make_probability_matrix(DenseMatrix m, double rho = 1.0) {
    require(m.rows() == m.cols(), "probability matrix must be square");
    require(m.allFinite(), "probability matrix has non-finite entries");
    require_symmetric(m, "probability matrix");
    DenseMatrix sym = 0.5 * (m + m.transpose());
    for (Index i = 0; i < sym.rows(); ++i)
        for (Index j = 0; j < sym.cols(); ++j) {
            double& x = sym(i, j);
            if (x < -entry_error_tol || x > 1.0 + entry_error_tol)
                throw ValidationError("invalid model: P(" + std::to_string(i) + "," + std::to_string(j) +
                                      ") = " + format_real(x) + " outside [0,1]");
            x = std::clamp(x, 0.0, 1.0);
        }
    return {std::move(sym), rho};
}

// Below this the model has no edges at any size we can store; treated as a zero limit and rejected.
inline constexpr double min_sparsity = 1e-12;

inline ProbabilityMatrix probability_matrix(const SpectralPair& pair, double rho) {
    validate(pair, 1e-8);
    require(rho >= min_sparsity && rho <= 1.0, "sparsity rho = " + format_real(rho) + " must lie in [1e-12, 1]");
    const DenseMatrix x = pair.latent();
    Vector s(pair.d());
    for (int k = 0; k < pair.d(); ++k) s(k) = k < pair.signature.p ? rho : -rho;
    DenseMatrix p = x * s.asDiagonal() * x.transpose();
    p = 0.5 * (p + p.transpose()).eval();
    return make_probability_matrix(std::move(p), rho);
}

enum class DiagonalMode { hollow, bernoulli };

inline std::string to_string(DiagonalMode m) { return m == DiagonalMode::hollow ? "hollow" : "bernoulli"; }

inline DiagonalMode parse_diagonal_mode(const std::string& s) {
    if (s == "hollow") return DiagonalMode::hollow;
    if (s == "bernoulli") return DiagonalMode::bernoulli;
    throw ValidationError("diagonal mode must be 'hollow' or 'bernoulli', got '" + s + "'");
}

// Symmetric 0/1 matrix in compressed-row form; each row's column indices ascend.
struct AdjacencyMatrix {
    Index n = 0;
    DiagonalMode diagonal_mode = DiagonalMode::hollow;
    std::vector<std::size_t> row_ptr{0};
    std::vector<std::uint32_t> cols;

    std::size_t nnz() const { return cols.size(); }

    bool operator==(const AdjacencyMatrix& o) const {
        return n == o.n && diagonal_mode == o.diagonal_mode && row_ptr == o.row_ptr && cols == o.cols;
    }

    template <class In>
    void multiply(const In& x, Vector& y) const {
        y.resize(n);
        for (Index i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) acc += x(cols[k]);
            y(i) = acc;
        }
    }

    DenseMatrix to_dense() const {
        DenseMatrix a = DenseMatrix::Zero(n, n);
        for (Index i = 0; i < n; ++i)
            for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) a(i, cols[k]) = 1.0;
        return a;
    }

    // Edge list "i,j" with i <= j, 0-indexed.
    void write_edges(std::ostream& os) const {
        for (Index i = 0; i < n; ++i)
            for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
                if (cols[k] >= i) os << i << ',' << cols[k] << '\n';
    }
};

namespace detail {

// Edges (i <= j) must arrive in lexicographic order so that each row stays sorted.
inline AdjacencyMatrix assemble_adjacency(Index n, DiagonalMode mode,
                                          const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges) {
    AdjacencyMatrix a;
    a.n = n;
    a.diagonal_mode = mode;
    std::vector<std::size_t> deg(n, 0);
    for (const auto& [i, j] : edges) {
        ++deg[i];
        if (i != j) ++deg[j];
    }
    a.row_ptr.assign(n + 1, 0);
    for (Index i = 0; i < n; ++i) a.row_ptr[i + 1] = a.row_ptr[i] + deg[i];
    a.cols.resize(a.row_ptr[n]);
    std::vector<std::size_t> fill(a.row_ptr.begin(), a.row_ptr.end() - 1);
    for (const auto& [i, j] : edges) {
        a.cols[fill[i]++] = j;
        if (i != j) a.cols[fill[j]++] = i;
    }
    return a;
}

}  // namespace detail

inline AdjacencyMatrix adjacency_from_dense(const DenseMatrix& m, DiagonalMode mode = DiagonalMode::hollow) {
    require(m.rows() == m.cols(), "adjacency matrix must be square");
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = i; j < m.cols(); ++j) {
            const double x = m(i, j);
            require(x == 0.0 || x == 1.0, "adjacency matrix entries must be 0 or 1");
            require(m(j, i) == x, "adjacency matrix must be symmetric");
            if (i == j && mode == DiagonalMode::hollow) require(x == 0.0, "hollow adjacency has a nonzero diagonal");
            if (x == 1.0) edges.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
        }
    return detail::assemble_adjacency(m.rows(), mode, edges);
}

// Entry (i, j), i <= j, uses uniform number (seed, trial, i*n + j); two entries share
// one Philox block. Identical (P, seed, trial, mode) give identical graphs.
inline AdjacencyMatrix sample_adjacency(const ProbabilityMatrix& p, std::uint64_t seed,
                                        DiagonalMode mode = DiagonalMode::hollow, std::uint64_t trial = 0) {
    const Index n = p.n();
    require(n <= std::numeric_limits<std::uint32_t>::max(), "sample_adjacency: graph too large");
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    std::uint64_t cached_block = ~std::uint64_t{0};
    PhiloxBlock words{};
    for (Index i = 0; i < n; ++i) {
        const Index start = mode == DiagonalMode::hollow ? i + 1 : i;
        for (Index j = start; j < n; ++j) {
            const std::uint64_t e = static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(n) + j;
            const std::uint64_t block = e >> 1;
            if (block != cached_block) {
                words = philox_block(seed, trial, block);
                cached_block = block;
            }
            const double u = (e & 1) ? u01_from_words(words[2], words[3]) : u01_from_words(words[0], words[1]);
            if (u < p.entries(i, j)) edges.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
        }
    }
    return detail::assemble_adjacency(n, mode, edges);
}

inline constexpr std::uint64_t latent_stream_tag = 0x4c6174656e74ull;

inline DenseMatrix sample_latent_uniform_cube(Index n, int d, std::uint64_t seed) {
    require(n >= 1 && d >= 1, "sample_latent_uniform_cube: need n, d >= 1");
    PhiloxStream rng(seed, latent_stream_tag);
    const double hi = 1.0 / std::sqrt(static_cast<double>(d));
    DenseMatrix x(n, d);
    for (Index i = 0; i < n; ++i)
        for (int k = 0; k < d; ++k) x(i, k) = rng.uniform(0.0, hi);
    return x;
}

inline DenseMatrix sample_latent_grdpg_intervals(Index n, int p, int q, std::uint64_t seed) {
    require(n >= 1 && p >= 1 && q >= 1, "sample_latent_grdpg_intervals: need n, p, q >= 1");
    PhiloxStream rng(seed, latent_stream_tag + 1);
    const double sp = std::sqrt(static_cast<double>(p)), sq = std::sqrt(static_cast<double>(q));
    DenseMatrix x(n, p + q);
    for (Index i = 0; i < n; ++i) {
        for (int k = 0; k < p; ++k) x(i, k) = rng.uniform(0.5 / sp, 1.0 / sp);
        for (int k = 0; k < q; ++k) x(i, p + k) = rng.uniform(0.0, 0.5 / sq);
    }
    return x;
}

// Eigenvalues of Delta^{1/2} I_{p,q} Delta^{1/2}, i.e. of I_{p,q} Delta, sorted by magnitude (descending).
inline Vector indefinite_spectrum(const DenseMatrix& delta, const Signature& sig) {
    require(delta.rows() == sig.d() && delta.cols() == sig.d(), "indefinite_spectrum: shape mismatch");
    const EigenSelection es = symmetric_eigen(delta);
    Vector root_vals = es.values.cwiseMax(0.0).cwiseSqrt();
    const DenseMatrix root = es.vectors * root_vals.asDiagonal() * es.vectors.transpose();
    const DenseMatrix s = root * signature_matrix(sig.p, sig.q) * root;
    Vector vals = symmetric_eigen(0.5 * (s + s.transpose())).values;
    std::sort(vals.data(), vals.data() + vals.size(), [](double a, double b) { return std::abs(a) > std::abs(b); });
    return vals;
}

inline double empirical_condition_number(const DenseMatrix& x, const Signature& sig) {
    validate(sig);
    require(x.cols() == sig.d() && x.rows() >= sig.d(), "empirical_condition_number: shape mismatch");
    const DenseMatrix delta = x.transpose() * x / static_cast<double>(x.rows());
    const Vector ev = symmetric_eigen(delta).values;
    require(ev(ev.size() - 1) > 1e-12 * ev(0), "empirical_condition_number: X is rank deficient");
    const Vector spec = indefinite_spectrum(delta, sig);
    return std::abs(spec(0)) / std::abs(spec(spec.size() - 1));
}

struct ConditionWindow {
    double delta = 0.0;          // concentration radius used for the window
    double correction = 0.0;     // amount added/subtracted from the extreme eigenvalues
    double lambda_max = 0.0;     // largest |eigenvalue| of I_{p,q} Delta
    double lambda_min = 0.0;     // smallest |eigenvalue| of I_{p,q} Delta
    double center = 0.0;         // lambda_max / lambda_min
    double kappa_low = 0.0;
    double kappa_high = 0.0;     // +infinity when the upper end is undefined
    bool upper_defined = true;   // false when lambda_min <= correction
    bool contains(double kappa) const { return kappa >= kappa_low && kappa <= kappa_high; }
};

inline double bernstein_radius(double n, int d) {
    const double ld = std::log(static_cast<double>(d));
    return 4.0 * std::sqrt(ld / n) + 8.0 * ld / (3.0 * n);
}

inline constexpr double indefinite_window_constant = 3.0;

// q = 0: Weyl window with delta from the matrix Bernstein bound.
// q > 0: the same radius taken relative to ||Delta||, widened to C sqrt(delta_rel) ||Delta||, C = 3.
// An undefined upper end is reported through upper_defined, never clamped.
inline ConditionWindow condition_window(const DenseMatrix& delta, double n, int d, const Signature& sig) {
    validate(sig);
    require(n >= 2, "condition_window: need n >= 2");
    require(d == sig.d() && delta.rows() == d && delta.cols() == d, "condition_window: shape mismatch");
    const EigenSelection es = symmetric_eigen(delta);
    require(es.values(d - 1) >= -1e-12 * std::abs(es.values(0)), "condition_window: Delta must be PSD");
    ConditionWindow w;
    w.delta = bernstein_radius(n, d);
    const Vector spec = indefinite_spectrum(delta, sig);
    w.lambda_max = std::abs(spec(0));
    w.lambda_min = std::abs(spec(d - 1));
    require(w.lambda_min > 0, "condition_window: Delta is singular");
    if (sig.q == 0) {
        w.correction = w.delta;
    } else {
        const double norm = es.values(0);
        const double rel = w.delta / norm;
        require(rel < 1.0, "condition_window: relative concentration radius must be below 1");
        w.correction = indefinite_window_constant * std::sqrt(rel) * norm;
    }
    w.center = w.lambda_max / w.lambda_min;
    w.kappa_low = (w.lambda_max - w.correction) / (w.lambda_min + w.correction);
    if (w.lambda_min > w.correction) {
        w.kappa_high = (w.lambda_max + w.correction) / (w.lambda_min - w.correction);
    } else {
        w.upper_defined = false;
        w.kappa_high = std::numeric_limits<double>::infinity();
    }
    return w;
}

// Second-moment matrices E[x x^T] of the standard latent samplers.
inline DenseMatrix uniform_cube_second_moment(int d) {
    require(d >= 1, "need d >= 1");
    const double mu = 0.5 / std::sqrt(static_cast<double>(d));
    return DenseMatrix::Identity(d, d) / (12.0 * d) + DenseMatrix::Constant(d, d, mu * mu);
}

inline DenseMatrix ball_orthant_second_moment(int d) {
    require(d >= 1, "need d >= 1");
    const double diag = 1.0 / (d + 2.0);
    const double off = 2.0 / (std::numbers::pi * (d + 2.0));
    DenseMatrix m = DenseMatrix::Constant(d, d, off);
    m.diagonal().setConstant(diag);
    return m;
}

inline DenseMatrix grdpg_interval_second_moment(int p, int q) {
    require(p >= 1 && q >= 1, "need p, q >= 1");
    const int d = p + q;
    Vector mu(d), var(d);
    for (int k = 0; k < d; ++k) {
        const double width = k < p ? 0.5 / std::sqrt(p) : 0.5 / std::sqrt(q);
        mu(k) = k < p ? 0.75 / std::sqrt(p) : 0.25 / std::sqrt(q);
        var(k) = width * width / 12.0;
    }
    DenseMatrix m = mu * mu.transpose();
    m.diagonal() += var;
    return m;
}

}  // namespace grdpg
