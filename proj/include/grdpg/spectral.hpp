#pragma once

#include <cmath>
#include <string>

#include "matrixkit.hpp"
#include "netmodel.hpp"

namespace grdpg {

// Selected eigenvalue too close to zero, or of the wrong sign, for the requested signature.
class DegenerateSpectrumError : public ComputeError {
public:
    using ComputeError::ComputeError;
};

struct Embedding {
    SpectralPair pair;        // U-hat, Lambda-hat magnitudes, signature
    Vector signed_values;     // raw eigenvalues of A: top p descending, then bottom q ascending
    bool tie_at_p_cutoff = false;
    bool tie_at_q_cutoff = false;
    long matvecs = 0;
};

inline DenseMatrix latent_estimate(const Embedding& e) { return e.pair.latent(); }

namespace detail {

inline Embedding assemble_embedding(const ExtremePairs& ex, Index n, int p, int q) {
    double norm = 0.0;
    if (ex.top.values.size() > 0) norm = std::max(norm, std::abs(ex.top.values(0)));
    if (ex.bottom.values.size() > 0) norm = std::max(norm, std::abs(ex.bottom.values(0)));

    Embedding e;
    e.pair.signature = {p, q};
    e.pair.frame.resize(n, p + q);
    e.pair.magnitudes.resize(p + q);
    e.signed_values.resize(p + q);
    auto check = [&](double magnitude, double raw, int k) {
        if (magnitude < 0.0)
            throw DegenerateSpectrumError("spectral embedding: selected eigenvalue " + std::to_string(k + 1) + " = " +
                                          format_real(raw) + " has the wrong sign for signature (" +
                                          std::to_string(p) + "," + std::to_string(q) + ")");
        if (magnitude <= 1e-12 * norm)
            throw DegenerateSpectrumError("spectral embedding: eigenvalue magnitude " + format_real(magnitude) +
                                          " is negligible against ||A|| = " + format_real(norm) +
                                          "; signature likely wrong");
    };
    for (int k = 0; k < p; ++k) {
        const double v = ex.top.values(k);
        check(v, v, k);
        e.pair.frame.col(k) = ex.top.vectors.col(k);
        e.pair.magnitudes(k) = v;
        e.signed_values(k) = v;
    }
    for (int k = 0; k < q; ++k) {
        const double v = ex.bottom.values(k);
        check(-v, v, p + k);
        e.pair.frame.col(p + k) = ex.bottom.vectors.col(k);
        e.pair.magnitudes(p + k) = -v;
        e.signed_values(p + k) = v;
    }
    e.tie_at_p_cutoff = p > 0 && ex.top.tie_at_cutoff;
    e.tie_at_q_cutoff = q > 0 && ex.bottom.tie_at_cutoff;
    e.matvecs = ex.matvecs;
    return e;
}

// Ask for at least one pair from each end so that ||A|| is known for the degeneracy test.
inline std::pair<int, int> request_sizes(Index n, int p, int q) {
    int top = p, bottom = q;
    if (top == 0 && bottom < n) top = 1;
    if (bottom == 0 && top < n) bottom = 1;
    return {top, bottom};
}

}  // namespace detail

template <class Op>
Embedding spectral_embedding_of_operator(Op&& apply, Index n, const Signature& sig, LanczosOptions opt = {}) {
    validate(sig);
    require(sig.d() <= n, "spectral embedding: p + q = " + std::to_string(sig.d()) + " exceeds n = " +
                              std::to_string(n));
    const auto [top, bottom] = detail::request_sizes(n, sig.p, sig.q);
    const ExtremePairs ex = extreme_eigenpairs(apply, n, top, bottom, opt);
    return detail::assemble_embedding(ex, n, sig.p, sig.q);
}

inline Embedding adjacency_spectral_embedding(const AdjacencyMatrix& a, const Signature& sig,
                                              LanczosOptions opt = {}) {
    auto op = [&](const auto& x, Vector& y) { a.multiply(x, y); };
    return spectral_embedding_of_operator(op, a.n, sig, opt);
}

// Dense input (a probability matrix or any symmetric matrix): exact decomposition up
// to 512 rows, Lanczos above.
inline Embedding adjacency_spectral_embedding(const DenseMatrix& s, const Signature& sig, LanczosOptions opt = {}) {
    require_symmetric(s, "spectral embedding");
    validate(sig);
    const Index n = s.rows();
    require(sig.d() <= n, "spectral embedding: p + q exceeds n");
    if (n <= 512) {
        const EigenSelection full = symmetric_eigen(s);
        const auto [top, bottom] = detail::request_sizes(n, sig.p, sig.q);
        const ExtremePairs ex = detail::split_selection(full.values, full.vectors, top, bottom);
        return detail::assemble_embedding(ex, n, sig.p, sig.q);
    }
    auto op = [&](const auto& x, Vector& y) { y.noalias() = s * x; };
    return spectral_embedding_of_operator(op, n, sig, opt);
}

inline Embedding adjacency_spectral_embedding(const ProbabilityMatrix& p, const Signature& sig,
                                              LanczosOptions opt = {}) {
    return adjacency_spectral_embedding(p.entries, sig, opt);
}

}  // namespace grdpg
