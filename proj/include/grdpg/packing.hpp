#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "alignment.hpp"
#include "matrixkit.hpp"
#include "netmodel.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace grdpg {

enum class Regime { constant_kappa, growing_kappa };

inline std::string to_string(Regime r) { return r == Regime::constant_kappa ? "constant" : "growing"; }

inline Regime parse_regime(const std::string& s) {
    if (s == "constant") return Regime::constant_kappa;
    if (s == "growing") return Regime::growing_kappa;
    throw ValidationError("regime must be 'constant' or 'growing', got '" + s + "'");
}

inline double default_zeta(int d) { return 1.0 / std::sqrt(640.0 * d); }

struct PackingParams {
    Index n = 0;
    int p = 1;
    int q = 0;
    double kappa = 1.0;
    double lambda1 = 1.0;
    double c0 = 0.02;    // constant regime
    double zeta = 0.0;   // growing regime; 0 selects 1/sqrt(640 d)
    Regime regime = Regime::constant_kappa;

    int d() const { return p + q; }
    double lambda_d() const { return lambda1 / kappa; }
    double zeta_value() const { return zeta > 0.0 ? zeta : default_zeta(d()); }
    Signature signature() const { return {p, q}; }

    // Lambda = diag(lambda1, lambda1/kappa, ..., lambda1/kappa).
    Vector magnitudes() const {
        Vector l = Vector::Constant(d(), lambda_d());
        l(0) = lambda1;
        return l;
    }
    // lambda_d wedge log n
    double floor_term() const { return std::min(lambda_d(), std::log(static_cast<double>(n))); }
};

inline void validate(const PackingParams& pp) {
    validate(pp.signature());
    const double n = static_cast<double>(pp.n);
    const int d = pp.d();
    require(pp.n >= 2, "packing: n must be at least 2");
    require(std::isfinite(pp.kappa) && std::isfinite(pp.lambda1), "packing: non-finite parameters");
    require(pp.kappa >= 3.0 * d, "packing: need kappa >= 3d (kappa = " + format_real(pp.kappa) + ", d = " +
                                     std::to_string(d) + ")");
    require(pp.lambda1 > 0.0, "packing: lambda1 must be positive");
    require(3.0 * pp.kappa * pp.lambda_d() <= n * (1.0 + 1e-12), "packing: need 3 kappa lambda_d <= n");
    require(pp.lambda1 <= n / 3.0 * (1.0 + 1e-12), "packing: need lambda1 <= n/3");
    if (pp.regime == Regime::constant_kappa) {
        require(pp.c0 > 0.0 && std::isfinite(pp.c0), "packing: c0 must be positive");
    } else {
        require(d >= 2, "packing: growing regime needs d >= 2");
        require(pp.zeta >= 0.0, "packing: zeta must be nonnegative");
        require(pp.zeta_value() <= default_zeta(d) * (1.0 + 1e-12), "packing: need zeta <= 1/sqrt(640 d)");
    }
}

// Hadamard block exponent: smallest k0 with 2^k0 >= d.
inline int hadamard_exponent_for(int d) {
    int k = 0;
    while ((1 << k) < d) ++k;
    return k;
}

// A sufficient-size condition the construction relies on, recorded with whether it held.
struct ThresholdNote {
    std::string name;
    bool held = true;
    std::string detail;
};

// ---- balanced signs ----

inline constexpr int exhaustive_sign_limit = 16;

// z with |z_l| = 1/sqrt(d) and small |z^T a|: exhaustive for d <= 16, greedy largest-first above.
inline Vector balanced_sign_vector(const Vector& a) {
    const Index d = a.size();
    require(d >= 2, "balanced_sign_vector: need d >= 2");
    require(std::abs(a.norm() - 1.0) <= 1e-10, "balanced_sign_vector: a must be a unit vector");
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    Vector z(d);
    if (d <= exhaustive_sign_limit) {
        // Sign of the first entry fixed to +; |z^T a| is invariant under global flip.
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t best_mask = 0;
        const std::uint32_t patterns = 1u << (d - 1);
        for (std::uint32_t mask = 0; mask < patterns; ++mask) {
            double dot = a(0);
            for (Index l = 1; l < d; ++l) dot += ((mask >> (l - 1)) & 1u) ? -a(l) : a(l);
            if (std::abs(dot) < best) {
                best = std::abs(dot);
                best_mask = mask;
            }
        }
        z(0) = s;
        for (Index l = 1; l < d; ++l) z(l) = ((best_mask >> (l - 1)) & 1u) ? -s : s;
    } else {
        std::vector<Index> order(d);
        std::iota(order.begin(), order.end(), Index{0});
        std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return std::abs(a(x)) > std::abs(a(y)); });
        double left = 0.0, right = 0.0;
        for (Index l : order) {
            const double sg = a(l) >= 0 ? 1.0 : -1.0;
            if (left <= right) {
                left += std::abs(a(l));
                z(l) = sg * s;
            } else {
                right += std::abs(a(l));
                z(l) = -sg * s;
            }
        }
    }
    if (std::abs(z.dot(a)) > std::sqrt(2.0 / 3.0))
        throw ComputeError("balanced_sign_vector: |z^T a| = " + format_real(std::abs(z.dot(a))) + " exceeds sqrt(2/3)");
    return z;
}

// ---- constant condition number ----

struct BaseFrameConstant {
    DenseMatrix frame;
    int k0 = 0;
    Index m = 0;
    Index r = 0;
};

inline BaseFrameConstant build_base_frame_constant(Index n, int d) {
    require(d >= 1, "build_base_frame_constant: need d >= 1");
    const int k0 = hadamard_exponent_for(d);
    const Index block = Index{1} << k0;
    require(n >= block && n >= d, "build_base_frame_constant: n = " + std::to_string(n) + " is below 2^k0 = " +
                                      std::to_string(block));
    BaseFrameConstant out;
    out.k0 = k0;
    out.m = n / block;
    out.r = n - block * out.m;
    const DenseMatrix h = hadamard(k0);
    const double c1 = 1.0 / std::sqrt(static_cast<double>(n));
    const double cj = 1.0 / std::sqrt(static_cast<double>(n - out.r));
    out.frame = DenseMatrix::Zero(n, d);
    out.frame.col(0).setConstant(c1);
    for (Index i = 0; i < block * out.m; ++i)
        for (int j = 1; j < d; ++j) out.frame(i, j) = h(i % block, j) * cj;
    return out;
}

inline double sign_of(double v) { return v >= 0.0 ? 1.0 : -1.0; }

// Perturbation for one row u of the base frame: |x_l| lambda_l constant in l, x^T u >= 0,
// and the cosine between x and u below sqrt(3)/2.
inline Vector perturbation_vector(const Vector& u, const Vector& lambdas, double c0, Index n) {
    const Index d = u.size();
    require(lambdas.size() == d, "perturbation_vector: lambda length differs from row length");
    require(c0 > 0.0, "perturbation_vector: c0 must be positive");
    require((lambdas.array() > 0).all(), "perturbation_vector: eigenvalue magnitudes must be positive");
    const double l1 = lambdas.maxCoeff(), ld = lambdas.minCoeff();
    const double nn = static_cast<double>(n);
    const double scale = c0 * std::sqrt(l1 * std::min(ld, std::log(nn)) / (nn * static_cast<double>(d)));
    const Vector y = scale * lambdas.cwiseInverse();
    Vector x(d);
    if (d == 1) {
        x(0) = y(0);
    } else {
        Vector a(d);
        for (Index l = 0; l < d; ++l) a(l) = sign_of(u(l)) * std::abs(y(l));
        a /= y.norm();
        const Vector z = balanced_sign_vector(a);
        for (Index l = 0; l < d; ++l) x(l) = sign_of(z(l)) * std::abs(y(l));
    }
    if (x.dot(u) < 0.0) x = -x;
    const double cosine = std::abs(x.dot(u)) / (x.norm() * u.norm());
    if (!(cosine < std::sqrt(3.0) / 2.0))
        throw ValidationError("perturbation_vector: cosine condition unattainable, |cos| = " + format_real(cosine) +
                              " >= sqrt(3)/2; n is below the construction's threshold");
    return x;
}

struct RankOneSVD {
    double alpha_plus = 0.0, alpha_minus = 0.0;
    double sigma_plus = 0.0, sigma_minus = 0.0;
    double d_plus = 0.0, d_minus = 0.0;
    DenseMatrix v_span;  // 2 x d, rows are the right singular vectors for sqrt(1 + sigma_{+/-})

    // Singular values of U0 + e_i x^T, descending: sqrt(1+s+), 1 (d-2 times), sqrt(1+s-).
    Vector singular_values(int d) const {
        Vector s = Vector::Ones(d);
        s(0) = std::sqrt(1.0 + sigma_plus);
        if (d >= 2) s(d - 1) = std::sqrt(1.0 + sigma_minus);
        return s;
    }
    double op_deviation() const { return std::max(std::abs(d_plus), std::abs(d_minus)); }
};

// Closed-form SVD of U0 + e_i x^T when U0 has orthonormal columns and u is its i-th row.
inline RankOneSVD rank_one_update_svd(const Vector& u, const Vector& x) {
    require(u.size() == x.size() && u.size() >= 2, "rank_one_update_svd: need matching rows of length >= 2");
    const double xx = x.squaredNorm(), uu = u.squaredNorm(), xu = x.dot(u);
    require(std::sqrt(xx) < 1.0, "rank_one_update_svd: need ||x|| < 1");
    require(xx > 0.0 && uu > 0.0 && std::abs(xu) < (1.0 - 1e-12) * std::sqrt(xx * uu),
            "rank_one_update_svd: x and u must be linearly independent");
    RankOneSVD r;
    r.alpha_plus = 0.5 + 0.5 * std::sqrt(1.0 + 4.0 * (uu + xu) / xx);
    r.alpha_minus = -(uu + xu) / (xx * r.alpha_plus);  // product of the roots, avoids cancellation
    r.sigma_plus = xu + r.alpha_plus * xx;
    r.sigma_minus = xu + r.alpha_minus * xx;
    r.d_plus = std::sqrt(1.0 + r.sigma_plus) - 1.0;
    r.d_minus = std::sqrt(1.0 + r.sigma_minus) - 1.0;
    r.v_span.resize(2, x.size());
    Vector vp = r.alpha_plus * x + u, vm = r.alpha_minus * x + u;
    normalize_column_signs(vp);
    normalize_column_signs(vm);
    r.v_span.row(0) = vp.normalized();
    r.v_span.row(1) = vm.normalized();
    return r;
}

struct PackingFamily {
    PackingParams params;
    SpectralPair base;
    std::vector<DenseMatrix> members;
    // constant regime
    int k0 = 0;
    Index m = 0;
    Index r = 0;
    std::vector<Vector> perturbations;
    // growing regime
    Index M_d = 0;
    double beta = 0.0;
    double eta = 0.0;
    std::vector<std::pair<Index, Index>> swapped_rows;  // 0-based rows exchanged in each member

    std::vector<ThresholdNote> notes;

    std::size_t size() const { return members.size(); }
    // Frame by family index: 0 is the base, k >= 1 is member k.
    const DenseMatrix& frame(std::size_t k) const { return k == 0 ? base.frame : members[k - 1]; }
};

inline PackingFamily build_packing_constant(const PackingParams& pp) {
    require(pp.regime == Regime::constant_kappa, "build_packing_constant: params are not in the constant regime");
    validate(pp);
    const int d = pp.d();
    const double n = static_cast<double>(pp.n);
    BaseFrameConstant bf = build_base_frame_constant(pp.n, d);
    PackingFamily fam;
    fam.params = pp;
    fam.k0 = bf.k0;
    fam.m = bf.m;
    fam.r = bf.r;
    fam.base = {bf.frame, pp.magnitudes(), pp.signature()};

    const double xnorm2_cap = pp.c0 * pp.c0 * pp.kappa / n;
    fam.notes.push_back({"n >= 42 d", n >= 42.0 * d, "cosine bound slack"});
    fam.notes.push_back({"c0^2 kappa / n < 1", xnorm2_cap < 1.0, "perturbations have norm below 1"});

    const Index rows = (Index{1} << bf.k0) * bf.m;
    const Vector lambdas = pp.magnitudes();
    fam.perturbations.resize(rows);
    fam.members.resize(rows);
    for (Index i = 0; i < rows; ++i) {
        const Vector u = bf.frame.row(i).transpose();
        const Vector x = perturbation_vector(u, lambdas, pp.c0, pp.n);
        fam.perturbations[i] = x;
        DenseMatrix g = bf.frame;
        g.row(i) += x.transpose();
        fam.members[i] = polar_orthogonal_factor(g);
    }
    return fam;
}

// ---- growing condition number ----

struct BaseFrameGrowing {
    DenseMatrix frame;
    int k0 = 0;
    Index M_d = 0;
    double beta = 0.0;
    double eta = 0.0;
};

// Base frame with lambda_j = lambda1 / kappa for j >= 2. No regime validation beyond what the
// construction itself needs, so the simulation model can use it below kappa = 3d.
inline BaseFrameGrowing build_base_frame_growing_raw(Index n, int d, double kappa, double lambda1, double zeta) {
    require(d >= 2, "growing base frame: need d >= 2");
    require(kappa >= 1.0 && lambda1 > 0.0 && zeta > 0.0, "growing base frame: need kappa >= 1, lambda1 > 0, zeta > 0");
    const double nn = static_cast<double>(n);
    const double ld = lambda1 / kappa;
    BaseFrameGrowing out;
    out.k0 = hadamard_exponent_for(d);
    const Index block = Index{1} << out.k0;
    out.M_d = n / (2 * block);
    require(out.M_d >= 2, "growing base frame: need floor(n / 2^(k0+1)) >= 2, n = " + std::to_string(n));
    out.beta = zeta * std::sqrt(lambda1 * std::min(ld, std::log(nn)) / nn);
    const double eta2 = nn * (1.0 / static_cast<double>(block) - out.beta * out.beta / (ld * ld)) /
                        static_cast<double>(out.M_d - 1);
    if (!(eta2 > 0.0))
        throw ValidationError("growing base frame: column normalization unsolvable (eta^2 = " + format_real(eta2) +
                              " <= 0); parameters out of regime");
    out.eta = std::sqrt(eta2);
    const DenseMatrix h = hadamard(out.k0);
    out.frame = DenseMatrix::Zero(n, d);
    out.frame.col(0).setConstant(1.0 / std::sqrt(nn));
    for (Index i = 0; i < block; ++i)
        for (int j = 1; j < d; ++j) out.frame(i, j) = out.beta * h(i, j) / ld;
    for (Index i = block; i < block * out.M_d; ++i)
        for (int j = 1; j < d; ++j) out.frame(i, j) = out.eta * h(i % block, j) / std::sqrt(nn);
    return out;
}

inline BaseFrameGrowing build_base_frame_growing(const PackingParams& pp) {
    validate(pp);
    require(pp.regime == Regime::growing_kappa, "build_base_frame_growing: params are not in the growing regime");
    return build_base_frame_growing_raw(pp.n, pp.d(), pp.kappa, pp.lambda1, pp.zeta_value());
}

inline PackingFamily build_packing_growing(const PackingParams& pp) {
    const BaseFrameGrowing bf = build_base_frame_growing(pp);
    PackingFamily fam;
    fam.params = pp;
    fam.k0 = bf.k0;
    fam.M_d = bf.M_d;
    fam.beta = bf.beta;
    fam.eta = bf.eta;
    fam.base = {bf.frame, pp.magnitudes(), pp.signature()};
    const Index half = pp.n / 2;
    fam.members.reserve(half);
    for (Index i = 1; i <= half; ++i) {
        DenseMatrix u = bf.frame;
        const Index other = i - 1 + half;
        u.row(0).swap(u.row(other));
        fam.members.push_back(std::move(u));
        fam.swapped_rows.emplace_back(0, other);
    }
    fam.notes.push_back({"swapped rows carry no Hadamard part", (Index{1} << bf.k0) * bf.M_d <= half,
                         "rows i + floor(n/2) lie beyond the eta block"});
    return fam;
}

inline PackingFamily build_packing(const PackingParams& pp) {
    return pp.regime == Regime::constant_kappa ? build_packing_constant(pp) : build_packing_growing(pp);
}

// ---- divergences ----

// Bernoulli KL summed over unordered pairs i < j, with 0 log 0 = 0.
inline double exact_kl(const DenseMatrix& p, const DenseMatrix& q) {
    require(p.rows() == q.rows() && p.cols() == q.cols() && p.rows() == p.cols(), "exact_kl: shapes differ");
    const Index n = p.rows();
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
        double row = 0.0;
        for (Index j = i + 1; j < n; ++j) {
            const double a = p(i, j), b = q(i, j);
            require(a >= 0.0 && a <= 1.0 && b >= 0.0 && b <= 1.0, "exact_kl: entries must lie in [0,1]");
            if (a > 0.0) {
                if (b == 0.0)
                    throw ValidationError("exact_kl: infinite divergence at (" + std::to_string(i) + "," +
                                          std::to_string(j) + ")");
                row += a * std::log(a / b);
            }
            if (a < 1.0) {
                if (b == 1.0)
                    throw ValidationError("exact_kl: infinite divergence at (" + std::to_string(i) + "," +
                                          std::to_string(j) + ")");
                row += (1.0 - a) * std::log((1.0 - a) / (1.0 - b));
            }
        }
        total += row;
    }
    return std::max(total, 0.0);
}

inline double exact_kl(const ProbabilityMatrix& p, const ProbabilityMatrix& q) { return exact_kl(p.entries, q.entries); }

// Entry range over the pairs that matter for sampling (off-diagonal when hollow).
struct EntryRange {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    Index lo_i = 0, lo_j = 0, hi_i = 0, hi_j = 0;
};

inline EntryRange entry_range(const DenseMatrix& p, DiagonalMode mode) {
    EntryRange r;
    for (Index i = 0; i < p.rows(); ++i)
        for (Index j = 0; j < p.cols(); ++j) {
            if (i == j && mode == DiagonalMode::hollow) continue;
            const double v = p(i, j);
            if (v < r.lo) r = {v, r.hi, i, j, r.hi_i, r.hi_j};
            if (v > r.hi) {
                r.hi = v;
                r.hi_i = i;
                r.hi_j = j;
            }
        }
    return r;
}

// KL(P || Q) <= ||P - Q||_F^2 / (a (1 - b)) with a, b the smallest and largest entries of Q.
inline double zhou_bound(const DenseMatrix& p, const DenseMatrix& q, DiagonalMode mode = DiagonalMode::hollow) {
    const EntryRange r = entry_range(q, mode);
    require(r.lo > 0.0 && r.hi < 1.0, "zhou_bound: reference entries must lie strictly inside (0,1)");
    return (p - q).squaredNorm() / (r.lo * (1.0 - r.hi));
}

// U diag(Lambda)^{1/2} I_{p,q} diag(Lambda)^{1/2} U^T without validation or clamping.
inline DenseMatrix raw_probability(const DenseMatrix& frame, const Vector& magnitudes, const Signature& sig) {
    Vector s(sig.d());
    for (int k = 0; k < sig.d(); ++k) s(k) = k < sig.p ? magnitudes(k) : -magnitudes(k);
    DenseMatrix pm = frame * s.asDiagonal() * frame.transpose();
    return 0.5 * (pm + pm.transpose());
}

// ---- certification ----

struct CheckResult {
    std::string name;
    bool pass = true;
    std::string status = "exact";  // "exact" or "partial"
    std::string witness;           // worst case
    double value = 0.0;            // worst observed value
    double bound = 0.0;            // the threshold it is compared against
    double margin = 0.0;           // signed slack, >= 0 when passing
    std::string note;
};

struct CertificationReport {
    std::string regime;
    Index n = 0;
    int d = 0;
    double kappa = 0.0;
    double lambda1 = 0.0;
    std::size_t members = 0;
    std::size_t pairs_checked = 0;
    bool pairs_sampled = false;
    std::vector<CheckResult> checks;
    bool pass() const {
        return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
    }
    const CheckResult* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
};

struct VerifyOptions {
    std::size_t all_pairs_limit = 64;  // exhaustive pairs at or below this many members
    std::size_t pair_samples = 200;
    std::uint64_t seed = 20240531;
    unsigned threads = 1;
    DiagonalMode diagonal_mode = DiagonalMode::hollow;
    double orthonormality_tol = 1e-10;
};

inline double separation_bound(const PackingParams& pp) {
    const double n = static_cast<double>(pp.n);
    const double core = std::sqrt(pp.kappa * pp.floor_term() / n);
    if (pp.regime == Regime::constant_kappa) return pp.c0 / 8.0 * core;
    return pp.zeta_value() * std::sqrt(pp.d() - 1.0) / 2.0 * core;
}

inline double frobenius_budget(const PackingParams& pp) {
    const double n = static_cast<double>(pp.n);
    const double t = pp.lambda1 * pp.floor_term() / n;
    return pp.regime == Regime::constant_kappa ? t / 90.0 : t / 80.0;
}

inline double kl_budget(const PackingParams& pp) {
    const double ln = std::log(static_cast<double>(pp.n));
    return pp.regime == Regime::constant_kappa ? ln / 10.0 : 9.0 / 80.0 * ln;
}

// Family-index pairs (a < b) over {0 = base, 1..M}. All pairs when M is small, else a seeded sample.
inline std::vector<std::pair<std::size_t, std::size_t>> certification_pairs(std::size_t members,
                                                                            const VerifyOptions& opt, bool& sampled) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    const std::size_t total = members + 1;
    if (members <= opt.all_pairs_limit) {
        sampled = false;
        for (std::size_t a = 0; a < total; ++a)
            for (std::size_t b = a + 1; b < total; ++b) pairs.emplace_back(a, b);
        return pairs;
    }
    sampled = true;
    PhiloxStream rng(opt.seed, 0x70616972ull);
    while (pairs.size() < opt.pair_samples) {
        std::size_t a = rng.below(total), b = rng.below(total);
        if (a == b) continue;
        if (a > b) std::swap(a, b);
        if (std::find(pairs.begin(), pairs.end(), std::make_pair(a, b)) != pairs.end()) continue;
        pairs.emplace_back(a, b);
    }
    return pairs;
}

namespace detail {

struct MemberStats {
    double ortho = 0.0;
    double lo = 0.0, hi = 0.0;
    Index lo_i = 0, lo_j = 0, hi_i = 0, hi_j = 0;
    double frob2 = 0.0;
    double kl = 0.0;
    double zhou = 0.0;
    bool kl_finite = true;
    // intermediate quantities (constant regime)
    double sigma_dev = 0.0, sigma_dev_bound = 0.0;
    double left_tti = 0.0, left_tti_bound = 0.0;
    double energy = 0.0, energy_bound = 0.0;
    // growing regime
    double swap_energy = 0.0, swap_energy_expected = 0.0;
};

inline std::string member_witness(std::size_t k) { return "member " + std::to_string(k); }

inline void finish(CheckResult& c, double value, double bound, bool upper, const std::string& witness) {
    c.value = value;
    c.bound = bound;
    c.margin = upper ? bound - value : value - bound;
    c.pass = c.margin >= 0.0 && std::isfinite(value);
    c.witness = witness;
}

}  // namespace detail

inline CertificationReport verify_family(const PackingFamily& fam, const VerifyOptions& opt = {}) {
    const PackingParams& pp = fam.params;
    const Signature sig = pp.signature();
    const int d = pp.d();
    const double n = static_cast<double>(pp.n);
    const std::size_t M = fam.size();

    CertificationReport rep;
    rep.regime = to_string(pp.regime);
    rep.n = pp.n;
    rep.d = d;
    rep.kappa = pp.kappa;
    rep.lambda1 = pp.lambda1;
    rep.members = M;

    const DenseMatrix p0 = raw_probability(fam.base.frame, fam.base.magnitudes, sig);
    const EntryRange base_range = entry_range(p0, opt.diagonal_mode);
    const bool base_interior = base_range.lo > 0.0 && base_range.hi < 1.0;

    // Lambda-tilde = Lambda^{1/2} I_{p,q} Lambda^{1/2} as a vector of signed eigenvalues.
    Vector ltilde(d);
    for (int k = 0; k < d; ++k) ltilde(k) = k < pp.p ? fam.base.magnitudes(k) : -fam.base.magnitudes(k);
    const Vector lam2 = fam.base.magnitudes.array().square();

    std::vector<detail::MemberStats> stats(M);
    parallel_for(M, opt.threads, [&](std::size_t idx) {
        detail::MemberStats& s = stats[idx];
        const DenseMatrix& u = fam.members[idx];
        s.ortho = orthonormality_defect(u);
        const DenseMatrix pi = raw_probability(u, fam.base.magnitudes, sig);
        const EntryRange r = entry_range(pi, opt.diagonal_mode);
        s.lo = r.lo;
        s.hi = r.hi;
        s.lo_i = r.lo_i;
        s.lo_j = r.lo_j;
        s.hi_i = r.hi_i;
        s.hi_j = r.hi_j;
        s.frob2 = (pi - p0).squaredNorm();
        if (r.lo >= 0.0 && r.hi <= 1.0 && base_interior) {
            s.kl = exact_kl(pi, p0);
            s.zhou = s.frob2 / (base_range.lo * (1.0 - base_range.hi));
        } else {
            s.kl_finite = false;
        }
        if (pp.regime == Regime::constant_kappa && idx < fam.perturbations.size() && d >= 2) {
            const Vector uu = fam.base.frame.row(idx).transpose();
            const Vector& x = fam.perturbations[idx];
            const double xn = x.norm();
            const double rr = static_cast<double>(fam.r);
            const RankOneSVD svd = rank_one_update_svd(uu, x);
            s.sigma_dev = svd.op_deviation();
            s.sigma_dev_bound = 0.5 * xn * xn + 2.0 * std::sqrt(d / (n - rr)) * xn;
            DenseMatrix g = fam.base.frame;
            g.row(idx) += x.transpose();
            const ThinSVD gs = thin_svd(g);
            s.left_tti = two_to_infinity_norm(gs.u);
            s.left_tti_bound = xn < 1.0 ? std::sqrt(d / (n - rr) + xn / (1.0 - xn)) : std::numeric_limits<double>::infinity();
            const Vector vp = svd.v_span.row(0).transpose(), vm = svd.v_span.row(1).transpose();
            s.energy = svd.d_plus * svd.d_plus * vp.cwiseProduct(ltilde).squaredNorm() +
                       svd.d_minus * svd.d_minus * vm.cwiseProduct(ltilde).squaredNorm();
            s.energy_bound = 17.0 * (uu.squaredNorm() + x.squaredNorm()) *
                             (x.cwiseProduct(lam2).dot(x) + uu.cwiseProduct(lam2).dot(uu));
        }
        if (pp.regime == Regime::growing_kappa) {
            const DenseMatrix diff = (u - fam.base.frame) * ltilde.asDiagonal();
            s.swap_energy = diff.squaredNorm();
            const auto [ra, rb] = fam.swapped_rows[idx];
            const Vector y1 = fam.base.frame.row(ra).transpose();
            const Vector y0 = fam.base.frame.row(rb).transpose();
            s.swap_energy_expected = 2.0 * (y1 - y0).cwiseProduct(ltilde).squaredNorm();
        }
    });

    // (a) orthonormality
    {
        CheckResult c{"orthonormality"};
        double worst = orthonormality_defect(fam.base.frame);
        std::string who = "base";
        for (std::size_t k = 0; k < M; ++k)
            if (stats[k].ortho > worst) {
                worst = stats[k].ortho;
                who = detail::member_witness(k + 1);
            }
        detail::finish(c, worst, opt.orthonormality_tol, true, who);
        rep.checks.push_back(c);
    }
    // (b) entry bounds: base in [lambda1/(3n), 2/3], members strictly inside (0,1)
    {
        CheckResult c{"base_entry_lower"};
        detail::finish(c, base_range.lo, pp.lambda1 / (3.0 * n), false,
                       "P0(" + std::to_string(base_range.lo_i) + "," + std::to_string(base_range.lo_j) + ")");
        rep.checks.push_back(c);
        CheckResult h{"base_entry_upper"};
        detail::finish(h, base_range.hi, 2.0 / 3.0, true,
                       "P0(" + std::to_string(base_range.hi_i) + "," + std::to_string(base_range.hi_j) + ")");
        rep.checks.push_back(h);
    }
    {
        CheckResult c{"member_entries_interior"};
        double lo = std::numeric_limits<double>::infinity(), slack = std::numeric_limits<double>::infinity();
        std::string who = "none";
        for (std::size_t k = 0; k < M; ++k) {
            const double sl = std::min(stats[k].lo, 1.0 - stats[k].hi);
            if (sl < slack) {
                slack = sl;
                lo = sl;
                const bool low_side = stats[k].lo <= 1.0 - stats[k].hi;
                who = detail::member_witness(k + 1) + " entry (" +
                      std::to_string(low_side ? stats[k].lo_i : stats[k].hi_i) + "," +
                      std::to_string(low_side ? stats[k].lo_j : stats[k].hi_j) + ")";
            }
        }
        // value is the smallest distance of any entry to {0, 1}; must be strictly positive
        c.value = M ? lo : 0.0;
        c.bound = 0.0;
        c.margin = c.value;
        c.pass = M == 0 || lo > 0.0;
        c.witness = who;
        rep.checks.push_back(c);
    }
    // (d) Frobenius budget
    {
        CheckResult c{"frobenius_budget"};
        double worst = 0.0;
        std::size_t at = 0;
        for (std::size_t k = 0; k < M; ++k)
            if (stats[k].frob2 > worst) {
                worst = stats[k].frob2;
                at = k + 1;
            }
        detail::finish(c, worst, frobenius_budget(pp), true, detail::member_witness(at));
        rep.checks.push_back(c);
    }
    // (e) KL <= Zhou bound <= log budget
    {
        CheckResult kz{"kl_below_zhou"}, zb{"zhou_below_budget"}, kb{"kl_budget"};
        double worst_gap = std::numeric_limits<double>::infinity(), worst_zhou = 0.0, worst_kl = 0.0;
        std::size_t gap_at = 0, zhou_at = 0, kl_at = 0;
        bool finite = base_interior;
        double gap_kl = 0.0, gap_zhou = 0.0;
        for (std::size_t k = 0; k < M; ++k) {
            if (!stats[k].kl_finite) {
                finite = false;
                continue;
            }
            const double gap = stats[k].zhou - stats[k].kl;
            if (gap < worst_gap) {
                worst_gap = gap;
                gap_at = k + 1;
                gap_kl = stats[k].kl;
                gap_zhou = stats[k].zhou;
            }
            if (stats[k].zhou > worst_zhou) {
                worst_zhou = stats[k].zhou;
                zhou_at = k + 1;
            }
            if (stats[k].kl > worst_kl) {
                worst_kl = stats[k].kl;
                kl_at = k + 1;
            }
        }
        detail::finish(kz, gap_kl, gap_zhou, true, detail::member_witness(gap_at));
        detail::finish(zb, worst_zhou, kl_budget(pp), true, detail::member_witness(zhou_at));
        detail::finish(kb, worst_kl, kl_budget(pp), true, detail::member_witness(kl_at));
        for (CheckResult* c : {&kz, &zb, &kb}) {
            if (!finite) {
                c->pass = false;
                c->note = "some probability matrix has entries outside (0,1); divergence not finite";
            }
            rep.checks.push_back(*c);
        }
    }
    // intermediate bounds
    if (pp.regime == Regime::constant_kappa && d >= 2) {
        struct Spec {
            const char* name;
            double detail::MemberStats::*value;
            double detail::MemberStats::*bound;
        };
        const Spec specs[] = {{"singular_value_deviation", &detail::MemberStats::sigma_dev,
                               &detail::MemberStats::sigma_dev_bound},
                              {"left_frame_tti", &detail::MemberStats::left_tti, &detail::MemberStats::left_tti_bound},
                              {"rotation_energy", &detail::MemberStats::energy, &detail::MemberStats::energy_bound}};
        for (const auto& sp : specs) {
            CheckResult c{sp.name};
            double worst = std::numeric_limits<double>::infinity();
            std::size_t at = 0;
            double v = 0.0, b = 0.0;
            for (std::size_t k = 0; k < M; ++k) {
                const double sl = stats[k].*(sp.bound) - stats[k].*(sp.value);
                if (sl < worst) {
                    worst = sl;
                    at = k + 1;
                    v = stats[k].*(sp.value);
                    b = stats[k].*(sp.bound);
                }
            }
            detail::finish(c, v, b, true, detail::member_witness(at));
            rep.checks.push_back(c);
        }
    }
    if (pp.regime == Regime::growing_kappa) {
        CheckResult c{"swap_energy_identity"};
        double worst = 0.0, v = 0.0, e = 0.0;
        std::size_t at = 0;
        for (std::size_t k = 0; k < M; ++k) {
            const double dev = std::abs(stats[k].swap_energy - stats[k].swap_energy_expected);
            if (dev >= worst) {
                worst = dev;
                at = k + 1;
                v = stats[k].swap_energy;
                e = stats[k].swap_energy_expected;
            }
        }
        detail::finish(c, worst, 1e-12 * std::max(1.0, e), true, detail::member_witness(at));
        c.note = "||(U_i - U_0) Lambda~||_F^2 = " + format_real(v) + ", expected " + format_real(e);
        rep.checks.push_back(c);
    }
    // (c) pairwise separation
    {
        CheckResult c{"pairwise_separation"};
        bool sampled = false;
        const auto pairs = certification_pairs(M, opt, sampled);
        rep.pairs_checked = pairs.size();
        rep.pairs_sampled = sampled;
        const double bound = separation_bound(pp);
        const bool exact = d <= 3 && pp.p <= 2 && pp.q <= 1;
        std::vector<double> lower(pairs.size()), upper(pairs.size());
        parallel_for(pairs.size(), opt.threads, [&](std::size_t t) {
            const auto [a, b] = pairs[t];
            const DenseMatrix xa = fam.frame(a) * fam.base.magnitudes.cwiseSqrt().asDiagonal();
            const DenseMatrix xb = fam.frame(b) * fam.base.magnitudes.cwiseSqrt().asDiagonal();
            if (exact) {
                CertifyOptions co;
                co.target = bound;
                const CertifiedMinimum cm = tti_exact_minimum(xa, xb, sig, co);
                lower[t] = cm.lower;
                upper[t] = cm.upper;
            } else {
                lower[t] = upper[t] = tti_distance(xa, xb, sig);
            }
        });
        std::size_t worst = 0;
        for (std::size_t t = 1; t < pairs.size(); ++t)
            if (lower[t] < lower[worst]) worst = t;
        if (!pairs.empty()) {
            detail::finish(c, lower[worst], bound, false,
                           "pair (" + std::to_string(pairs[worst].first) + "," + std::to_string(pairs[worst].second) + ")");
        }
        c.status = exact ? "exact" : "partial";
        c.note = exact ? "certified lower bound on the minimum over block rotations"
                       : "Frobenius plug-in value (an upper bound on the minimum) compared; not a certificate";
        if (sampled) c.note += "; " + std::to_string(pairs.size()) + " sampled pairs";
        rep.checks.push_back(c);
    }
    return rep;
}

}  // namespace grdpg
