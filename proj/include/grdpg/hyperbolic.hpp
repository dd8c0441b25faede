#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "matrixkit.hpp"
#include "parallel.hpp"

namespace grdpg {

using Mat2 = Eigen::Matrix2d;

inline constexpr double hyperbolic_alpha_limit = 710.0;

// Q(alpha) in O(1,1): [[cosh, sinh], [sinh, cosh]].
inline Mat2 hyperbolic_rotation(double alpha) {
    require(std::isfinite(alpha) && std::abs(alpha) <= hyperbolic_alpha_limit,
            "hyperbolic_rotation: |alpha| = " + format_real(std::abs(alpha)) + " exceeds " +
                format_real(hyperbolic_alpha_limit));
    const double c = std::cosh(alpha), s = std::sinh(alpha);
    Mat2 q;
    q << c, s, s, c;
    return q;
}

enum class Gamma { identity, ipq, minus_identity, minus_ipq };

inline std::string to_string(Gamma g) {
    switch (g) {
        case Gamma::identity: return "I";
        case Gamma::ipq: return "I11";
        case Gamma::minus_identity: return "-I";
        case Gamma::minus_ipq: return "-I11";
    }
    return "?";
}

inline Mat2 gamma_matrix(Gamma g) {
    Mat2 m = Mat2::Identity();
    if (g == Gamma::ipq || g == Gamma::minus_ipq) m(1, 1) = -1.0;
    if (g == Gamma::minus_identity || g == Gamma::minus_ipq) m = -m;
    return m;
}

inline Mat2 ipq11() { return gamma_matrix(Gamma::ipq); }

inline double tti2(const Mat2& m) { return std::sqrt(std::max(m.row(0).squaredNorm(), m.row(1).squaredNorm())); }

// ||X Q(a1) - Y Q(a2)||_{2,inf}
inline double g_objective(const Mat2& x, const Mat2& y, double a1, double a2) {
    return tti2(x * hyperbolic_rotation(a1) - y * hyperbolic_rotation(a2));
}

inline Mat2 w_star() {
    const double r = 1.0 / std::sqrt(2.0);
    Mat2 w;
    w << r, r, r, -r;
    return w;
}

// g grows without bound along both diagonals when, for each column i of X~ = X W*, Y~ = Y W*,
// x~_{1i} y~_{2i} != x~_{2i} y~_{1i}.
inline bool coercivity_check(const Mat2& x, const Mat2& y) {
    const Mat2 xt = x * w_star(), yt = y * w_star();
    for (int i = 0; i < 2; ++i) {
        const double a = xt(0, i) * yt(1, i), b = xt(1, i) * yt(0, i);
        const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
        if (std::abs(a - b) <= 1e-9 * scale) return false;
    }
    return true;
}

// First column positive and x_{i1}^2 > x_{i2}^2 for both rows: then (X Q(a))_{i1} > 0 for all a.
inline bool positive_first_column(const Mat2& x) {
    for (int i = 0; i < 2; ++i)
        if (!(x(i, 0) > 0.0 && x(i, 0) * x(i, 0) - x(i, 1) * x(i, 1) > 0.0)) return false;
    return true;
}

struct HyperbolicParams {
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    Gamma gamma = Gamma::identity;
};

struct PseudoDistance {
    double value = 0.0;
    HyperbolicParams argmin;
    double grid_value = 0.0;          // best grid value before refinement
    std::vector<Gamma> gammas_tried;
    std::vector<double> per_gamma;     // refined minimum for each Gamma tried
    int refine_iterations = 0;
};

struct GridMinimum {
    double value = std::numeric_limits<double>::infinity();
    double a1 = 0.0, a2 = 0.0;
};

inline double grid_coord(double box, int resolution, int k) {
    return -box + 2.0 * box * static_cast<double>(k) / static_cast<double>(resolution - 1);
}

// Minimum of g(X, Y, ., .) over a uniform resolution x resolution grid on [-box, box]^2.
// Ties resolve to the lowest (row, column) index.
inline GridMinimum grid_minimum(const Mat2& x, const Mat2& y, double box, int resolution, unsigned threads = 1) {
    require(resolution >= 2, "grid resolution must be at least 2");
    require(box > 0.0 && box <= hyperbolic_alpha_limit, "grid box must lie in (0, 710]");
    std::vector<Mat2> xq(resolution), yq(resolution);
    for (int k = 0; k < resolution; ++k) {
        const double a = grid_coord(box, resolution, k);
        xq[k] = x * hyperbolic_rotation(a);
        yq[k] = y * hyperbolic_rotation(a);
    }
    std::vector<GridMinimum> rows(resolution);
    parallel_for(static_cast<std::size_t>(resolution), threads, [&](std::size_t i) {
        GridMinimum best;
        for (int j = 0; j < resolution; ++j) {
            const double v = tti2(xq[i] - yq[j]);
            if (v < best.value) best = {v, grid_coord(box, resolution, static_cast<int>(i)), grid_coord(box, resolution, j)};
        }
        rows[i] = best;
    });
    GridMinimum best;
    for (const auto& r : rows)
        if (r.value < best.value) best = r;
    return best;
}

struct RefineOptions {
    int window = 21;       // points per axis in each zoom step
    double shrink = 4.0;   // spacing divisor per step
    double step_tol = 1e-10;
    int max_iterations = 10000;
};

// Derivative-free zoom refinement: re-grid a small window around the incumbent, move to the
// best point, shrink the spacing. Stops when spacing drops below step_tol.
inline GridMinimum refine_minimum(const Mat2& x, const Mat2& y, GridMinimum start, double spacing,
                                  const RefineOptions& opt, int* iterations = nullptr) {
    const int half = opt.window / 2;
    double h = spacing;
    int it = 0;
    GridMinimum best = start;
    while (h >= opt.step_tol && it < opt.max_iterations) {
        ++it;
        GridMinimum local = best;
        for (int i = -half; i <= half; ++i)
            for (int j = -half; j <= half; ++j) {
                const double a1 = best.a1 + i * h, a2 = best.a2 + j * h;
                if (std::abs(a1) > hyperbolic_alpha_limit || std::abs(a2) > hyperbolic_alpha_limit) continue;
                const double v = g_objective(x, y, a1, a2);
                if (v < local.value) local = {v, a1, a2};
            }
        const bool on_edge = std::abs(local.a1 - best.a1) >= half * h * (1 - 1e-12) ||
                             std::abs(local.a2 - best.a2) >= half * h * (1 - 1e-12);
        best = local;
        if (!on_edge) h /= opt.shrink;  // keep the spacing while still travelling
    }
    if (iterations) *iterations = it;
    return best;
}

inline PseudoDistance f_pseudo_distance(const Mat2& x, const Mat2& y, int resolution = 1000, double box = 7.0,
                                        unsigned threads = 1, const RefineOptions& ropt = {}) {
    std::vector<Gamma> gammas;
    if (positive_first_column(x) && positive_first_column(y) && positive_first_column(y * ipq11()))
        gammas = {Gamma::identity, Gamma::ipq};
    else
        gammas = {Gamma::identity, Gamma::ipq, Gamma::minus_identity, Gamma::minus_ipq};
    PseudoDistance out;
    out.value = std::numeric_limits<double>::infinity();
    out.gammas_tried = gammas;
    const double spacing = 2.0 * box / static_cast<double>(resolution - 1);
    for (Gamma g : gammas) {
        const Mat2 yg = y * gamma_matrix(g);
        const GridMinimum coarse = grid_minimum(x, yg, box, resolution, threads);
        int iters = 0;
        const GridMinimum fine = refine_minimum(x, yg, coarse, spacing, ropt, &iters);
        // without coercivity the infimum may sit outside the box; a zero value is still global
        if (!coercivity_check(x, yg) && fine.value > 1e-12 * std::max(1.0, tti2(x) + tti2(y)))
            throw ValidationError("f_pseudo_distance: coercivity condition fails for Gamma = " + to_string(g) +
                                  "; the minimum may lie outside the box");
        out.per_gamma.push_back(fine.value);
        if (fine.value < out.value) {
            out.value = fine.value;
            out.argmin = {fine.a1, fine.a2, g};
            out.grid_value = coarse.value;
            out.refine_iterations = iters;
        }
    }
    return out;
}

// (alpha1, alpha2, g) rows over the uniform grid, alpha1 outer.
inline void contour_grid(std::ostream& os, const Mat2& x, const Mat2& y, Gamma gamma, double box = 7.0,
                         int resolution = 1000) {
    require(resolution >= 2, "contour_grid: resolution must be at least 2");
    require(box > 0.0 && box <= hyperbolic_alpha_limit, "contour_grid: box must lie in (0, 710]");
    const Mat2 yg = y * gamma_matrix(gamma);
    os << "alpha1,alpha2,g\n";
    for (int i = 0; i < resolution; ++i) {
        const double a1 = grid_coord(box, resolution, i);
        const Mat2 xq = x * hyperbolic_rotation(a1);
        for (int j = 0; j < resolution; ++j) {
            const double a2 = grid_coord(box, resolution, j);
            os << format_real(a1) << ',' << format_real(a2) << ',' << format_real(tti2(xq - yg * hyperbolic_rotation(a2)))
               << '\n';
        }
    }
}

struct CounterexampleTriple {
    Mat2 x, y, z;
};

inline CounterexampleTriple counterexample_triple() {
    CounterexampleTriple t;
    t.x << 1.9, 1.2, 4.0, -3.8;
    t.y << 12.7, -9.8, 4.1, -0.9;
    t.z << 0.03, -0.02, 2.3, -1.9;
    return t;
}

}  // namespace grdpg
