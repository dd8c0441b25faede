#include <catch_amalgamated.hpp>

#include <grdpg/hyperbolic.hpp>

#include <sstream>

using namespace grdpg;
using Catch::Approx;

TEST_CASE("hyperbolic rotations form a one-parameter group") {
    CHECK(hyperbolic_rotation(0.0) == Mat2::Identity());
    CHECK((hyperbolic_rotation(0.3) * hyperbolic_rotation(-0.8) - hyperbolic_rotation(-0.5)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(hyperbolic_rotation(1.5).determinant() == Approx(1.0).epsilon(1e-12));
    for (double a : {-5.0, -0.2, 3.0, 20.0}) {
        const Mat2 q = hyperbolic_rotation(a);
        const Mat2 i11 = ipq11();
        CHECK((q * i11 * q.transpose() - i11).cwiseAbs().maxCoeff() <= 1e-12 * std::cosh(2 * a));
    }
    CHECK_THROWS_AS(hyperbolic_rotation(711.0), ValidationError);
    CHECK_NOTHROW(hyperbolic_rotation(-710.0));
}

TEST_CASE("objective basics") {
    const CounterexampleTriple t = counterexample_triple();
    CHECK(g_objective(t.x, t.x, 0.4, 0.4) == Approx(0.0).margin(1e-12));
    const Mat2 diff = t.x - t.y;
    CHECK(g_objective(t.x, t.y, 0, 0) == Approx(std::max(diff.row(0).norm(), diff.row(1).norm())));
    CHECK(g_objective(t.x, t.y, 7, 7) > 8);
}

TEST_CASE("right translation invariance") {
    const CounterexampleTriple t = counterexample_triple();
    for (double b1 : {-1.0, 0.5})
        for (double b2 : {0.25, 2.0}) {
            const Mat2 xs = t.x * hyperbolic_rotation(b1), ys = t.z * hyperbolic_rotation(b2);
            for (double a1 : {-2.0, 0.1, 1.3})
                for (double a2 : {-0.7, 0.9}) {
                    const double g = g_objective(t.x, t.z, a1, a2);
                    CHECK(std::abs(g - g_objective(xs, ys, a1 - b1, a2 - b2)) <= 1e-10 * std::max(1.0, g));
                }
        }
}

TEST_CASE("coercivity") {
    const CounterexampleTriple t = counterexample_triple();
    CHECK(coercivity_check(t.x, t.y));
    CHECK(coercivity_check(t.x, t.z * ipq11()));
    CHECK(coercivity_check(t.y, t.z));
    CHECK(coercivity_check(t.x, t.y * ipq11()));
    CHECK_FALSE(coercivity_check(t.x, 2.5 * t.x));
    CHECK_THROWS_AS(f_pseudo_distance(t.x, 2.5 * t.x, 50), ValidationError);
}

TEST_CASE("boundary of the box is far from the minimum") {
    const CounterexampleTriple t = counterexample_triple();
    const std::pair<Mat2, Mat2> pairs[] = {{t.x, t.y}, {t.x, t.y * ipq11()}, {t.x, t.z},
                                           {t.x, t.z * ipq11()}, {t.z, t.y}, {t.z, t.y * ipq11()}};
    for (const auto& [a, b] : pairs)
        for (int k = 0; k <= 200; ++k) {
            const double s = -7.0 + 14.0 * k / 200;
            CHECK(g_objective(a, b, 7.0, s) > 8);
            CHECK(g_objective(a, b, -7.0, s) > 8);
            CHECK(g_objective(a, b, s, 7.0) > 8);
            CHECK(g_objective(a, b, s, -7.0) > 8);
        }
}

TEST_CASE("pseudo-distance values and the triangle violation") {
    const CounterexampleTriple t = counterexample_triple();
    const PseudoDistance xx = f_pseudo_distance(t.x, t.x, 101);
    CHECK(xx.value == Approx(0.0).margin(1e-9));
    CHECK(xx.argmin.gamma == Gamma::identity);
    const PseudoDistance xy = f_pseudo_distance(t.x, t.y), xz = f_pseudo_distance(t.x, t.z),
                         yz = f_pseudo_distance(t.y, t.z);
    CHECK(xy.value == Approx(2.7324).margin(0.02));
    CHECK(xz.value == Approx(1.2291).margin(0.02));
    CHECK(yz.value == Approx(7.8288).margin(0.02));
    CHECK(xy.value + xz.value < yz.value);
    CHECK(xy.gammas_tried.size() == 2);
    CHECK(xy.grid_value >= xy.value);
    CHECK(xy.grid_value == Approx(2.7324).margin(0.05));
}

TEST_CASE("gamma guard falls back to all four choices") {
    Mat2 x, y;
    x << -1.0, 0.2, 0.5, 0.1;
    y << 0.8, 0.3, 2.0, -0.4;
    if (coercivity_check(x, y) && coercivity_check(x, y * ipq11()) && coercivity_check(x, -y) &&
        coercivity_check(x, -y * ipq11())) {
        const PseudoDistance f = f_pseudo_distance(x, y, 201);
        CHECK(f.gammas_tried.size() == 4);
    }
}

TEST_CASE("contour grid output") {
    const CounterexampleTriple t = counterexample_triple();
    std::ostringstream os;
    contour_grid(os, t.x, t.y, Gamma::identity, 7.0, 2);
    std::istringstream is(os.str());
    std::string line;
    int rows = 0;
    std::getline(is, line);
    CHECK(line == "alpha1,alpha2,g");
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 4);
    CHECK_THROWS_AS(contour_grid(os, t.x, t.y, Gamma::identity, 7.0, 1), ValidationError);
}
