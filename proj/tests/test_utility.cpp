#include "forward_yield/errors.hpp"
#include "forward_yield/utility.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace forward_yield;

TEST_CASE("power utility evaluation") {
    const PowerUtility u(0.5);
    const auto v = power_eval(u, 1.0);
    CHECK(v.u == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(v.u_x == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(v.u_xx == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(power_eval(u, 1e-300).u < 1e-140);
    CHECK(power_conjugate(u, 1.0).value == doctest::Approx(1.0).epsilon(1e-15));

    CHECK_THROWS_AS(PowerUtility(1.5), DomainError);
    CHECK_THROWS_AS(PowerUtility(0.0), DomainError);
    CHECK_THROWS_AS(power_eval(u, 0.0), DomainError);
    CHECK_THROWS_AS(power_conjugate(u, -1.0), DomainError);
}

TEST_CASE("inverse-marginal identity for closed forms") {
    for (double alpha : {0.1, 0.25, 0.5, 0.9}) {
        for (double K : {0.5, 1.0, 3.0}) {
            const PowerUtility u(alpha, K);
            for (double y : {0.01, 0.3, 1.0, 7.0, 250.0}) {
                const double x = -power_conjugate(u, y).derivative;
                CHECK(power_eval(u, x).u_x == doctest::Approx(y).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("closed-form conjugate matches brute-force maximisation") {
    const auto xs = log_grid(1e-4, 1e4, 4000);
    for (double alpha : {0.25, 0.5, 0.75}) {
        const PowerUtility u(alpha);
        std::vector<double> uv(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            uv[i] = power_eval(u, xs[i]).u;
        }
        const auto ys = log_grid(0.1, 10.0, 50);
        const auto conj = numeric_fenchel(uv, xs, ys);
        CHECK(conj.is_convex_decreasing());
        for (std::size_t j = 0; j < ys.size(); ++j) {
            // Independent oracle: sup_x x^{1-a}/(1-a) - xy sits at x = y^{-1/a}.
            const double xstar = std::pow(ys[j], -1.0 / alpha);
            const double oracle = std::pow(xstar, 1.0 - alpha) / (1.0 - alpha) - xstar * ys[j];
            CHECK(conj.values[j] == doctest::Approx(oracle).epsilon(1e-4));
            CHECK(power_conjugate(u, ys[j]).value == doctest::Approx(oracle).epsilon(1e-12));
            // Grid argmax inverts the marginal up to the grid spacing.
            CHECK(power_eval(u, xs[conj.argmax[j]]).u_x == doctest::Approx(ys[j]).epsilon(1e-2));
        }
    }
}

TEST_CASE("biconjugate recovers the utility") {
    const PowerUtility u(0.5);
    const auto xs = log_grid(1e-4, 1e4, 4000);
    std::vector<double> uv(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        uv[i] = power_eval(u, xs[i]).u;
    }
    const auto ys = log_grid(1e-3, 1e3, 4000);
    const auto conj = numeric_fenchel(uv, xs, ys);
    const auto probe = log_grid(0.1, 10.0, 40);
    const auto back = numeric_biconjugate(conj, probe);
    for (std::size_t i = 0; i < probe.size(); ++i) {
        CHECK(back[i] == doctest::Approx(power_eval(u, probe[i]).u).epsilon(1e-3));
    }
}

TEST_CASE("linear utility has zero conjugate at y = 1") {
    const auto xs = log_grid(0.01, 100.0, 200);
    const std::vector<double> ys = {1.0};
    const auto conj = numeric_fenchel(xs, xs, ys);
    CHECK(std::abs(conj.values[0]) <= 1e-12);
}

TEST_CASE("non-concave samples are rejected") {
    const std::vector<double> xs = {1.0, 2.0, 3.0, 4.0};
    const std::vector<double> convex = {1.0, 4.0, 9.0, 16.0};
    const std::vector<double> ys = {1.0};
    CHECK_THROWS_AS(numeric_fenchel(convex, xs, ys), DomainError);
}

TEST_CASE("progressive utility with unit coefficients is the deterministic pair") {
    const TimeGrid g(1.0, 4);
    const ProgressivePowerUtility P{0.5, PathMatrix(3, g.n_points(), 1.0),
                                    DeterministicFn::constant_scalar(1.0), g};
    const PowerUtility u(0.5);
    for (double x : {0.2, 1.0, 5.0}) {
        const auto v = progressive_eval(P, 1, 2, x);
        const auto d = power_eval(u, x);
        CHECK(v.U == doctest::Approx(d.u).epsilon(1e-15));
        CHECK(v.U_x == doctest::Approx(d.u_x).epsilon(1e-15));
        CHECK(v.U_xx == doctest::Approx(d.u_xx).epsilon(1e-15));
        CHECK(v.V == doctest::Approx(d.u).epsilon(1e-15));
        CHECK(v.V_c == doctest::Approx(d.u_x).epsilon(1e-15));
    }
}

TEST_CASE("progressive utility slices are increasing, concave and bidual") {
    const TimeGrid g(1.0, 5);
    std::mt19937_64 rng(3);
    std::lognormal_distribution<double> ln(0.0, 0.5);
    PathMatrix Z(4, g.n_points());
    for (std::size_t p = 0; p < 4; ++p) {
        for (std::size_t k = 0; k < g.n_points(); ++k) {
            Z(p, k) = ln(rng);
        }
    }
    const ProgressivePowerUtility P{0.4, Z, DeterministicFn::constant_scalar(0.15), g};
    const auto xs = log_grid(0.01, 100.0, 100);
    const auto ys = log_grid(1e-4, 1e4, 4000);
    for (std::size_t p = 0; p < 4; ++p) {
        for (std::size_t k = 0; k < g.n_points(); ++k) {
            std::vector<double> U(xs.size());
            for (std::size_t i = 0; i < xs.size(); ++i) {
                U[i] = progressive_eval(P, p, k, xs[i]).U;
            }
            for (std::size_t i = 1; i + 1 < xs.size(); ++i) {
                const double s0 = (U[i] - U[i - 1]) / (xs[i] - xs[i - 1]);
                const double s1 = (U[i + 1] - U[i]) / (xs[i + 1] - xs[i]);
                CHECK(s0 > 0.0);
                CHECK(s1 < s0);
            }
            // V(t,c) = inf_y Vtilde(t,y) + c y.
            for (double c : {0.1, 1.0, 10.0}) {
                double best = std::numeric_limits<double>::infinity();
                for (double y : ys) {
                    best = std::min(best, progressive_conjugate_consumption(P, p, k, y).value + c * y);
                }
                CHECK(best == doctest::Approx(progressive_eval(P, p, k, c).V).epsilon(1e-3));
            }
            const double y = progressive_eval(P, p, k, 2.0).V_c;
            CHECK(-progressive_conjugate_consumption(P, p, k, y).derivative ==
                  doctest::Approx(2.0).epsilon(1e-12));
        }
    }
}
