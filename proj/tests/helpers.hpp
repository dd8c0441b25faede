#pragma once

#include <grdpg/matrixkit.hpp>
#include <grdpg/netmodel.hpp>
#include <grdpg/rng.hpp>

namespace testing {

using grdpg::DenseMatrix;
using grdpg::Index;

inline DenseMatrix gaussian(Index r, Index c, std::uint64_t seed) {
    grdpg::PhiloxStream rng(seed, 11);
    DenseMatrix m(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) m(i, j) = rng.normal();
    return m;
}

inline DenseMatrix orthonormal(Index n, Index d, std::uint64_t seed) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd(gaussian(n, d, seed)));
    return Eigen::MatrixXd(qr.householderQ()).leftCols(d);
}

inline DenseMatrix random_rotation(Index d, std::uint64_t seed) { return orthonormal(d, d, seed); }

// Random element of O(d) cap O(p,q): independent orthogonal blocks.
inline DenseMatrix random_block_rotation(int p, int q, std::uint64_t seed) {
    DenseMatrix w = DenseMatrix::Zero(p + q, p + q);
    if (p) w.topLeftCorner(p, p) = random_rotation(p, seed);
    if (q) w.bottomRightCorner(q, q) = random_rotation(q, seed + 1);
    return w;
}

}  // namespace testing
