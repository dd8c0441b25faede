#include <catch_amalgamated.hpp>

#include <grdpg/matrixkit.hpp>
#include <grdpg/rng.hpp>

#include <sstream>

#include "oracles.hpp"

using namespace grdpg;
using Catch::Approx;

namespace {

DenseMatrix random_matrix(Index r, Index c, std::uint64_t seed) {
    PhiloxStream rng(seed, 7);
    DenseMatrix m(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) m(i, j) = rng.normal();
    return m;
}

DenseMatrix random_symmetric(Index n, std::uint64_t seed) {
    DenseMatrix m = random_matrix(n, n, seed);
    return 0.5 * (m + m.transpose());
}

DenseMatrix random_orthonormal(Index n, Index d, std::uint64_t seed) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd(random_matrix(n, d, seed)));
    return Eigen::MatrixXd(qr.householderQ()).leftCols(d);
}

}  // namespace

TEST_CASE("philox known-answer vectors") {
    // Reference outputs of Philox4x32-10 from the Random123 distribution.
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == PhiloxBlock{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
          PhiloxBlock{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
          PhiloxBlock{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("philox stream uniforms look uniform") {
    PhiloxStream rng(42, 0);
    double sum = 0, sum2 = 0;
    const int m = 200000;
    for (int i = 0; i < m; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
        sum2 += u * u;
    }
    CHECK(sum / m == Approx(0.5).margin(4 * std::sqrt(1.0 / 12 / m)));
    CHECK(sum2 / m - (sum / m) * (sum / m) == Approx(1.0 / 12).margin(0.002));
}

TEST_CASE("hadamard small orders") {
    CHECK(hadamard(0) == DenseMatrix::Ones(1, 1));
    DenseMatrix h2(2, 2);
    h2 << 1, 1, 1, -1;
    CHECK(hadamard(1) == h2);
    const DenseMatrix h8 = hadamard(3);
    CHECK(max_abs(h8 * h8.transpose() - 8.0 * DenseMatrix::Identity(8, 8)) == 0.0);
    CHECK_THROWS_AS(hadamard(-1), ValidationError);
    CHECK_THROWS_AS(hadamard(max_hadamard_exponent + 1), ValidationError);
}

TEST_CASE("hadamard matches the popcount formula and has zero column sums") {
    for (int k = 0; k <= 7; ++k) {
        const DenseMatrix h = hadamard(k);
        const Index n = h.rows();
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) REQUIRE(h(i, j) == oracle::hadamard_entry(i, j));
        for (Index j = 1; j < n; ++j) REQUIRE(h.col(j).sum() == 0.0);
    }
}

TEST_CASE("signature matrix") {
    DenseMatrix s = signature_matrix(2, 1);
    CHECK(s.diagonal() == Eigen::Vector3d(1, 1, -1));
    CHECK(signature_matrix(3, 0) == DenseMatrix::Identity(3, 3));
    CHECK(signature_matrix(0, 2) == -DenseMatrix::Identity(2, 2));
    CHECK_THROWS_AS(signature_matrix(0, 0), ValidationError);
}

TEST_CASE("two-to-infinity norm") {
    CHECK(two_to_infinity_norm(DenseMatrix::Zero(3, 2)) == 0.0);
    DenseMatrix m(2, 2);
    m << 3, 4, 0, 1;
    CHECK(two_to_infinity_norm(m) == 5.0);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const DenseMatrix a = random_matrix(30, 4, seed);
        const double n = static_cast<double>(a.rows());
        const double t = two_to_infinity_norm(a);
        CHECK(t >= frobenius_norm(a) / std::sqrt(n));
        CHECK(t >= operator_norm(a) / std::sqrt(n));
        CHECK(t == Approx(oracle::tti(oracle::from(a))).epsilon(1e-14));
        const DenseMatrix w = random_orthonormal(4, 4, seed + 100);
        CHECK(std::abs(two_to_infinity_norm(a * w) - t) <= 1e-12 * std::max(1.0, t));
    }
}

TEST_CASE("top eigenpairs: trivial cases") {
    auto e = top_eigenpairs(DenseMatrix::Identity(5, 5), 2);
    CHECK(e.values(0) == Approx(1.0));
    CHECK(e.values(1) == Approx(1.0));
    CHECK(e.tie_at_cutoff);
    DenseMatrix d = DenseMatrix::Zero(3, 3);
    d.diagonal() << 3, 2, 1;
    e = top_eigenpairs(d, 2);
    CHECK(e.values(0) == Approx(3.0));
    CHECK(e.values(1) == Approx(2.0));
    CHECK(std::abs(e.vectors(0, 0)) == Approx(1.0));
    CHECK(std::abs(e.vectors(1, 1)) == Approx(1.0));
    CHECK_FALSE(e.tie_at_cutoff);
}

TEST_CASE("top eigenpairs agree with a Jacobi oracle") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const DenseMatrix s = random_symmetric(50, seed);
        const auto [vals, vecs] = oracle::jacobi_eigen(oracle::from(s));
        for (int k : {1, 3, 7}) {
            const EigenSelection e = top_eigenpairs(s, k);
            for (int j = 0; j < k; ++j) {
                CHECK(std::abs(e.values(j) - vals[j]) <= 1e-9);
                const double res = (s * e.vectors.col(j) - e.values(j) * e.vectors.col(j)).norm();
                CHECK(res <= 1e-8 * operator_norm(s));
            }
            CHECK(orthonormality_defect(e.vectors) <= 1e-10);
        }
    }
    CHECK_THROWS_AS(top_eigenpairs(random_matrix(4, 4, 3), 1), ValidationError);
}

TEST_CASE("Lanczos path matches the dense decomposition") {
    // Low-rank signal plus noise, large enough to take the iterative branch.
    const Index n = 700;
    const DenseMatrix u = random_orthonormal(n, 3, 11);
    DenseMatrix s = random_symmetric(n, 12) * 0.05;
    s += u * Eigen::Vector3d(40.0, 25.0, -30.0).asDiagonal() * u.transpose();
    const EigenSelection dense = symmetric_eigen(s);
    auto op = [&](const auto& x, Vector& y) { y.noalias() = s * x; };
    const ExtremePairs ex = extreme_eigenpairs(op, n, 3, 2);
    const double norm = std::max(std::abs(dense.values(0)), std::abs(dense.values(n - 1)));
    for (int j = 0; j < 3; ++j) {
        CHECK(std::abs(ex.top.values(j) - dense.values(j)) <= 1e-9 * norm);
        CHECK((s * ex.top.vectors.col(j) - ex.top.values(j) * ex.top.vectors.col(j)).norm() <= 1e-8 * norm);
    }
    for (int j = 0; j < 2; ++j) CHECK(std::abs(ex.bottom.values(j) - dense.values(n - 1 - j)) <= 1e-9 * norm);
    const EigenSelection t = top_eigenpairs(s, 4);
    for (int j = 0; j < 4; ++j) CHECK(std::abs(t.values(j) - dense.values(j)) <= 1e-9 * norm);
}

TEST_CASE("Lanczos on a clustered spectrum") {
    // Bulk of near-equal eigenvalues just below the wanted ones.
    const Index n = 600;
    Vector diag(n);
    for (Index i = 0; i < n; ++i) diag(i) = 1.0 + 1e-3 * static_cast<double>(i) / n;
    diag(0) = 1.2;
    diag(1) = 1.1;
    const DenseMatrix q = random_orthonormal(n, n, 5);
    const DenseMatrix s = q * diag.asDiagonal() * q.transpose();
    auto op = [&](const auto& x, Vector& y) { y.noalias() = s * x; };
    const ExtremePairs ex = extreme_eigenpairs(op, n, 2, 0);
    CHECK(ex.top.values(0) == Approx(1.2).epsilon(1e-10));
    CHECK(ex.top.values(1) == Approx(1.1).epsilon(1e-10));
}

TEST_CASE("polar factor") {
    const DenseMatrix u = random_orthonormal(20, 3, 9);
    CHECK(max_abs(polar_orthogonal_factor(u) - u) <= 1e-12);
    const DenseMatrix ud = u * Eigen::Vector3d(2.0, 0.5, 3.0).asDiagonal();
    CHECK(max_abs(polar_orthogonal_factor(ud) - u) <= 1e-12);

    const DenseMatrix g = random_matrix(20, 3, 10);
    const DenseMatrix w = polar_orthogonal_factor(g);
    CHECK(orthonormality_defect(w) <= 1e-10);
    // Oracle: W = G (G^T G)^{-1/2} via Jacobi on G^T G.
    const auto [vals, vecs] = oracle::jacobi_eigen(oracle::mul(oracle::transpose(oracle::from(g)), oracle::from(g)));
    oracle::Mat inv_root = oracle::zeros(3, 3);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int k = 0; k < 3; ++k) inv_root[a][b] += vecs[a][k] * vecs[b][k] / std::sqrt(vals[k]);
    const oracle::Mat expect = oracle::mul(oracle::from(g), inv_root);
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 3; ++j) CHECK(std::abs(w(i, j) - expect[i][j]) <= 1e-10);

    // No orthonormal frame is closer to G in Frobenius norm.
    const double best = frobenius_norm(g - w);
    int closer = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed)
        if (frobenius_norm(g - random_orthonormal(20, 3, 5000 + seed)) < best - 1e-12) ++closer;
    CHECK(closer == 0);

    DenseMatrix bad = g;
    bad.col(2) = bad.col(0);
    CHECK_THROWS_AS(polar_orthogonal_factor(bad), ValidationError);
}

TEST_CASE("incoherence") {
    CHECK(incoherence(DenseMatrix::Identity(8, 2)) == Approx(4.0));
    const DenseMatrix h = hadamard(3) / std::sqrt(8.0);
    CHECK(incoherence(h.leftCols(3)) == Approx(1.0));
    CHECK_THROWS_AS(incoherence(2.0 * DenseMatrix::Identity(4, 2)), ValidationError);
}

TEST_CASE("matrix file round trips") {
    const DenseMatrix m = random_matrix(5, 3, 77);
    std::stringstream csv;
    write_csv(csv, m);
    CHECK(read_csv(csv) == m);
    std::stringstream bin;
    write_gmx1(bin, m);
    const std::string bytes = bin.str();
    CHECK(bytes.substr(0, 4) == "GMX1");
    CHECK(bytes.size() == 4 + 16 + 8 * 15);
    CHECK(read_gmx1(bin) == m);

    std::stringstream bad("1,2\n3,x\n");
    try {
        read_csv(bad);
        FAIL("expected a parse error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    std::stringstream ragged("# header\n1,2\n\n3\n");
    CHECK_THROWS_WITH(read_csv(ragged), Catch::Matchers::ContainsSubstring("line 4"));
}
