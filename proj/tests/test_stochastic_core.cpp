#include "forward_yield/errors.hpp"
#include "forward_yield/stochastic_core.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>

using namespace forward_yield;

TEST_CASE("time grid arithmetic") {
    const TimeGrid g(1.0, 4);
    CHECK(g.dt() == doctest::Approx(0.25));
    REQUIRE(g.n_points() == 5);
    const double expected[] = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(g.time(k) == doctest::Approx(expected[k]).epsilon(1e-15));
    }
    CHECK(g.index_of(0.5) == 2);
    CHECK(g.contains(0.75));
    CHECK_FALSE(g.contains(0.3));

    CHECK(TimeGrid(50.0, 5000).dt() == doctest::Approx(0.01));
    CHECK_THROWS_AS(TimeGrid(0.0, 10), DomainError);
    CHECK_THROWS_AS(TimeGrid(1.0, 0), DomainError);
}

TEST_CASE("brownian batches are reproducible and seed dependent") {
    const TimeGrid g(1.0, 8);
    const auto a = sample_brownian(7, g, 2, 50);
    const auto b = sample_brownian(7, g, 2, 50);
    const auto c = sample_brownian(8, g, 2, 50);
    CHECK(a.raw() == b.raw());
    CHECK(a.raw() != c.raw());
}

TEST_CASE("brownian batches do not depend on the worker count") {
    const TimeGrid g(1.0, 16);
    const char* old = std::getenv("FORWARD_YIELD_THREADS");
    const std::string saved = old ? old : "";
    setenv("FORWARD_YIELD_THREADS", "1", 1);
    const auto one = sample_brownian(99, g, 3, 257);
    setenv("FORWARD_YIELD_THREADS", "5", 1);
    const auto five = sample_brownian(99, g, 3, 257);
    if (old) {
        setenv("FORWARD_YIELD_THREADS", saved.c_str(), 1);
    } else {
        unsetenv("FORWARD_YIELD_THREADS");
    }
    CHECK(one.raw() == five.raw());
}

TEST_CASE("brownian increment moments") {
    const TimeGrid g(2.0, 4);
    const std::size_t n = 20000;
    const auto batch = sample_brownian(2024, g, 2, n);
    const auto& x = batch.raw();
    const double m = static_cast<double>(x.size());
    double s1 = 0.0;
    double s2 = 0.0;
    double s4 = 0.0;
    for (double v : x) {
        s1 += v;
        s2 += v * v;
        s4 += v * v * v * v;
    }
    const double mean = s1 / m;
    const double var = s2 / m;
    const double dt = g.dt();
    CHECK(std::abs(mean) < 4.0 * std::sqrt(dt / m));
    // Var of dW^2 is 2 dt^2.
    CHECK(std::abs(var - dt) < 4.0 * std::sqrt(2.0 * dt * dt / m));
    CHECK(s4 / m == doctest::Approx(3.0 * dt * dt).epsilon(0.05));
}

TEST_CASE("projection onto axis subspaces") {
    const auto R = SubspaceR::span_of(2, {Vec::Unit(2, 0)});
    Vec v(2);
    v << 3.0, 4.0;
    const auto pr = R.project(v);
    CHECK(pr.in_subspace(0) == 3.0);
    CHECK(pr.in_subspace(1) == 0.0);
    CHECK(pr.orthogonal(0) == 0.0);
    CHECK(pr.orthogonal(1) == 4.0);

    const auto E = SubspaceR::empty(2);
    CHECK(E.proj_R(v).norm() == 0.0);
    CHECK((E.proj_perp(v) - v).norm() == 0.0);

    const auto F = SubspaceR::full(2);
    CHECK((F.proj_R(v) - v).norm() == 0.0);
    CHECK(F.proj_perp(v).norm() == 0.0);
}

TEST_CASE("projection identities hold for random vectors and subspaces") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t dim = 2 + static_cast<std::size_t>(trial % 4);
        const std::size_t k = static_cast<std::size_t>(trial % static_cast<int>(dim + 1));
        std::vector<Vec> span;
        for (std::size_t j = 0; j < k; ++j) {
            Vec b(dim);
            for (std::size_t i = 0; i < dim; ++i) {
                b(i) = z(rng);
            }
            span.push_back(b);
        }
        const auto R = SubspaceR::span_of(dim, span);
        Vec v(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            v(i) = z(rng);
        }
        const Vec a = R.proj_R(v);
        const Vec b = R.proj_perp(v);
        const double scale = 1.0 + v.norm();
        CHECK((a + b - v).norm() <= 1e-12 * scale);
        CHECK(std::abs(a.dot(b)) <= 1e-12 * scale * scale);
        CHECK((R.proj_R(a) - a).norm() <= 1e-12 * scale);
        CHECK(R.contains(a, 1e-10));
        CHECK(R.orthogonal_to(b, 1e-10));
    }
}

TEST_CASE("deterministic functions") {
    const auto c = DeterministicFn::constant_scalar(0.3);
    CHECK(c.scalar(5.0) == 0.3);
    const TimeGrid g(1.0, 2);
    const auto p = DeterministicFn::piecewise(g, {Vec::Constant(1, 1.0), Vec::Constant(1, 2.0),
                                                  Vec::Constant(1, 3.0)});
    CHECK(p.scalar(0.1) == 1.0);
    CHECK(p.scalar(0.5) == 2.0);
    CHECK(p.scalar(0.7) == 2.0);
    const auto f = DeterministicFn::closed_form("sq", 1, [](double t) { return Vec::Constant(1, t * t); });
    const auto on = f.on_grid(g);
    REQUIRE(on.size() == 3);
    CHECK(on[2](0) == 1.0);
}

TEST_CASE("mean and standard error") {
    const std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
    const auto e = mean_stderr(x);
    CHECK(e.mean == 2.5);
    CHECK(e.std_error == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
}
