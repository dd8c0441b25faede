#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <queue>
#include <string>
#include <vector>

#include "matrixkit.hpp"
#include "netmodel.hpp"

namespace grdpg {

// Element of O(d) intersected with O(p,q): block diagonal diag(w_p, w_q), both orthogonal.
struct BlockRotation {
    DenseMatrix w_p;
    DenseMatrix w_q;
    bool rank_deficient = false;  // a cross-Gram block was singular; minimizer not unique

    int p() const { return static_cast<int>(w_p.rows()); }
    int q() const { return static_cast<int>(w_q.rows()); }

    DenseMatrix assemble() const {
        const int d = p() + q();
        DenseMatrix w = DenseMatrix::Zero(d, d);
        w.topLeftCorner(p(), p()) = w_p;
        w.bottomRightCorner(q(), q()) = w_q;
        return w;
    }

    static BlockRotation identity(const Signature& s) {
        return {DenseMatrix::Identity(s.p, s.p), DenseMatrix::Identity(s.q, s.q)};
    }
};

namespace detail {

inline void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const Signature& sig, const char* who) {
    validate(sig);
    require(a.rows() == b.rows() && a.cols() == b.cols(), std::string(who) + ": shapes differ");
    require(a.cols() == sig.d(), std::string(who) + ": column count does not match p + q");
}

// argmax_W tr(W^T C) over orthogonal W: W = A B^T from C = A S B^T.
inline DenseMatrix orthogonal_procrustes_block(const DenseMatrix& c, bool& rank_deficient) {
    if (c.rows() == 0) return DenseMatrix(0, 0);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(c), Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector& s = svd.singularValues();
    if (s(s.size() - 1) <= 1e-12 * std::max(s(0), 1e-300)) rank_deficient = true;
    return svd.matrixU() * svd.matrixV().transpose();
}

}  // namespace detail

// argmin over block rotations W of ||Xhat W - X||_F, solved blockwise.
inline BlockRotation block_procrustes(const DenseMatrix& xhat, const DenseMatrix& x, const Signature& sig) {
    detail::require_same_shape(xhat, x, sig, "block_procrustes");
    BlockRotation w;
    const DenseMatrix cp = xhat.leftCols(sig.p).transpose() * x.leftCols(sig.p);
    const DenseMatrix cq = xhat.rightCols(sig.q).transpose() * x.rightCols(sig.q);
    w.w_p = detail::orthogonal_procrustes_block(cp, w.rank_deficient);
    w.w_q = detail::orthogonal_procrustes_block(cq, w.rank_deficient);
    return w;
}

inline DenseMatrix apply_rotation(const DenseMatrix& x, const BlockRotation& w) {
    DenseMatrix out(x.rows(), x.cols());
    out.leftCols(w.p()) = x.leftCols(w.p()) * w.w_p;
    out.rightCols(w.q()) = x.rightCols(w.q()) * w.w_q;
    return out;
}

// Frobenius-optimal alignment plugged into the 2,inf norm. An upper bound on the
// exact minimum over block rotations.
inline double tti_distance(const DenseMatrix& xhat, const DenseMatrix& x, const Signature& sig) {
    const BlockRotation w = block_procrustes(xhat, x, sig);
    return two_to_infinity_norm(apply_rotation(xhat, w) - x);
}

inline double frobenius_distance(const DenseMatrix& xhat, const DenseMatrix& x, const Signature& sig) {
    const BlockRotation w = block_procrustes(xhat, x, sig);
    return frobenius_norm(apply_rotation(xhat, w) - x);
}

inline double dtilde_tti(const SpectralPair& a, const SpectralPair& b) {
    require(a.signature == b.signature, "dtilde_tti: signature mismatch");
    require(a.n() == b.n(), "dtilde_tti: vertex counts differ");
    return tti_distance(a.latent(), b.latent(), a.signature);
}

inline bool check_equivalence(const DenseMatrix& x, const DenseMatrix& y, const Signature& sig, double tol) {
    detail::require_same_shape(x, y, sig, "check_equivalence");
    const DenseMatrix s = signature_matrix(sig.p, sig.q);
    return max_abs(x * s * x.transpose() - y * s * y.transpose()) <= tol;
}

// ---- oracles for d <= 3 (p <= 2, q <= 1) ----

namespace detail {

inline void require_oracle_scope(const Signature& sig) {
    require(sig.p <= 2 && sig.q <= 1, "alignment oracle supports p <= 2 and q <= 1 only");
}

// The discrete part of a block rotation: p-block reflection flag (or sign when p = 1), q-block sign.
struct DiscreteChoice {
    bool reflect = false;
    double p_sign = 1.0;
    double q_sign = 1.0;
};

inline std::vector<DiscreteChoice> discrete_choices(const Signature& sig) {
    std::vector<DiscreteChoice> out;
    const std::vector<double> qs = sig.q == 1 ? std::vector<double>{1.0, -1.0} : std::vector<double>{1.0};
    for (double qs_ : qs) {
        if (sig.p == 2) {
            out.push_back({false, 1.0, qs_});
            out.push_back({true, 1.0, qs_});
        } else if (sig.p == 1) {
            out.push_back({false, 1.0, qs_});
            out.push_back({false, -1.0, qs_});
        } else {
            out.push_back({false, 1.0, qs_});
        }
    }
    return out;
}

// Rotation by theta, or reflection [[c, s], [s, -c]].
inline Eigen::Matrix2d planar(double theta, bool reflect) {
    const double c = std::cos(theta), s = std::sin(theta);
    Eigen::Matrix2d m;
    if (reflect)
        m << c, s, s, -c;
    else
        m << c, -s, s, c;
    return m;
}

inline BlockRotation make_rotation(const Signature& sig, const DiscreteChoice& ch, double theta) {
    BlockRotation w;
    if (sig.p == 2)
        w.w_p = planar(theta, ch.reflect);
    else if (sig.p == 1)
        w.w_p = DenseMatrix::Constant(1, 1, ch.p_sign);
    else
        w.w_p = DenseMatrix(0, 0);
    w.w_q = sig.q == 1 ? DenseMatrix::Constant(1, 1, ch.q_sign) : DenseMatrix(0, 0);
    return w;
}

}  // namespace detail

struct GridOracleResult {
    double objective = 0.0;  // ||Xhat W - X||_F at the best grid point
    BlockRotation rotation;
    double theta = 0.0;
    long evaluations = 0;
};

// Frobenius objective on an angle grid. ||Xhat W - X||_F^2 = |Xhat|^2 + |X|^2 - 2 tr(W^T C)
// with C = Xhat^T X, so each grid point costs O(1).
inline GridOracleResult frobenius_grid_oracle(const DenseMatrix& xhat, const DenseMatrix& x, const Signature& sig,
                                              double resolution = 1e-4) {
    detail::require_same_shape(xhat, x, sig, "frobenius_grid_oracle");
    detail::require_oracle_scope(sig);
    require(resolution > 0, "frobenius_grid_oracle: resolution must be positive");
    const DenseMatrix c = xhat.transpose() * x;
    const double base = xhat.squaredNorm() + x.squaredNorm();
    const long steps = sig.p == 2 ? static_cast<long>(std::ceil(2.0 * std::numbers::pi / resolution)) : 1;
    GridOracleResult best;
    double best_val = std::numeric_limits<double>::infinity();
    for (const auto& ch : detail::discrete_choices(sig)) {
        for (long k = 0; k < steps; ++k) {
            const double theta = sig.p == 2 ? 2.0 * std::numbers::pi * static_cast<double>(k) / steps : 0.0;
            double tr = 0.0;
            if (sig.p == 2) {
                const Eigen::Matrix2d w = detail::planar(theta, ch.reflect);
                tr += w(0, 0) * c(0, 0) + w(0, 1) * c(0, 1) + w(1, 0) * c(1, 0) + w(1, 1) * c(1, 1);
            } else if (sig.p == 1) {
                tr += ch.p_sign * c(0, 0);
            }
            if (sig.q == 1) tr += ch.q_sign * c(sig.p, sig.p);
            const double val = base - 2.0 * tr;
            ++best.evaluations;
            if (val < best_val) {
                best_val = val;
                best.theta = theta;
                best.rotation = detail::make_rotation(sig, ch, theta);
            }
        }
    }
    best.objective = std::sqrt(std::max(best_val, 0.0));
    return best;
}

struct CertifiedMinimum {
    double upper = 0.0;  // objective at the best rotation found
    double lower = 0.0;  // certified: no block rotation does better than this
    BlockRotation rotation;
    long evaluations = 0;
    bool stopped_on_target = false;
};

struct CertifyOptions {
    double abs_tol = 1e-9;  // stop when upper - lower <= abs_tol + rel_tol * upper
    double rel_tol = 1e-7;
    double target = -1.0;   // if >= 0, stop as soon as lower >= target or upper < target
    long max_evaluations = 20'000'000;
    int initial_cells = 256;
};

// Exact minimum of ||Xhat W - X||_{2,inf} over block rotations (p <= 2, q <= 1).
// Branch and bound over the angle: every row residual moves by at most
// ||xhat_{i,p}|| |dtheta|, so f(center) - L h / 2 bounds f on a cell of width h.
inline CertifiedMinimum tti_exact_minimum(const DenseMatrix& xhat, const DenseMatrix& x, const Signature& sig,
                                          CertifyOptions opt = {}) {
    detail::require_same_shape(xhat, x, sig, "tti_exact_minimum");
    detail::require_oracle_scope(sig);
    const Index n = x.rows();
    const int p = sig.p;

    CertifiedMinimum out;
    out.upper = std::numeric_limits<double>::infinity();

    auto q_part = [&](double qs) {
        Vector r2 = Vector::Zero(n);
        if (sig.q == 1)
            for (Index i = 0; i < n; ++i) {
                const double t = qs * xhat(i, p) - x(i, p);
                r2(i) = t * t;
            }
        return r2;
    };

    if (p < 2) {
        for (const auto& ch : detail::discrete_choices(sig)) {
            const Vector qr = q_part(ch.q_sign);
            double worst = 0.0;
            for (Index i = 0; i < n; ++i) {
                double s = qr(i);
                if (p == 1) {
                    const double t = ch.p_sign * xhat(i, 0) - x(i, 0);
                    s += t * t;
                }
                worst = std::max(worst, s);
            }
            ++out.evaluations;
            const double val = std::sqrt(worst);
            if (val < out.upper) {
                out.upper = val;
                out.rotation = detail::make_rotation(sig, ch, 0.0);
            }
        }
        out.lower = out.upper;
        return out;
    }

    double lip = 0.0;
    for (Index i = 0; i < n; ++i) lip = std::max(lip, std::hypot(xhat(i, 0), xhat(i, 1)));

    const auto choices = detail::discrete_choices(sig);
    std::vector<Vector> qparts;
    for (const auto& ch : choices) qparts.push_back(q_part(ch.q_sign));

    auto eval = [&](std::size_t ci, double theta) {
        const Eigen::Matrix2d w = detail::planar(theta, choices[ci].reflect);
        double worst = 0.0;
        for (Index i = 0; i < n; ++i) {
            const double a = xhat(i, 0) * w(0, 0) + xhat(i, 1) * w(1, 0) - x(i, 0);
            const double b = xhat(i, 0) * w(0, 1) + xhat(i, 1) * w(1, 1) - x(i, 1);
            worst = std::max(worst, a * a + b * b + qparts[ci](i));
        }
        ++out.evaluations;
        return std::sqrt(worst);
    };

    struct Cell {
        double lower;
        double center;
        double width;
        std::size_t choice;
        bool operator>(const Cell& o) const { return lower > o.lower; }
    };
    std::priority_queue<Cell, std::vector<Cell>, std::greater<>> heap;
    auto push = [&](std::size_t ci, double center, double width) {
        const double f = eval(ci, center);
        if (f < out.upper) {
            out.upper = f;
            out.rotation = detail::make_rotation(sig, choices[ci], center);
        }
        heap.push({std::max(0.0, f - 0.5 * lip * width), center, width, ci});
    };
    const double two_pi = 2.0 * std::numbers::pi;
    const int cells = std::max(opt.initial_cells, 1);
    for (std::size_t ci = 0; ci < choices.size(); ++ci)
        for (int k = 0; k < cells; ++k) push(ci, two_pi * (k + 0.5) / cells, two_pi / cells);

    for (;;) {
        const Cell top = heap.top();
        out.lower = top.lower;
        if (opt.target >= 0.0 && (out.lower >= opt.target || out.upper < opt.target)) {
            out.stopped_on_target = true;
            break;
        }
        if (out.upper - out.lower <= opt.abs_tol + opt.rel_tol * out.upper) break;
        if (out.evaluations >= opt.max_evaluations)
            throw ComputeError("tti_exact_minimum: evaluation budget exhausted with gap " +
                               format_real(out.upper - out.lower));
        heap.pop();
        const double h = top.width / 3.0;
        push(top.choice, top.center - h, h);
        push(top.choice, top.center, h);
        push(top.choice, top.center + h, h);
    }
    out.lower = std::min(out.lower, out.upper);
    return out;
}

// Exact quotient distance between canonical representatives (d <= 3).
inline CertifiedMinimum dtilde_tti_exact(const SpectralPair& a, const SpectralPair& b, CertifyOptions opt = {}) {
    require(a.signature == b.signature, "dtilde_tti_exact: signature mismatch");
    require(a.n() == b.n(), "dtilde_tti_exact: vertex counts differ");
    return tti_exact_minimum(a.latent(), b.latent(), a.signature, opt);
}

}  // namespace grdpg
