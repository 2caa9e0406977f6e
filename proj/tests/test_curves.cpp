#include "forward_yield/curves.hpp"
#include "forward_yield/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace forward_yield;

namespace {

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

const SubspaceR kR = SubspaceR::span_of(2, {v2(1, 0)});

MarketModel vasicek_market(Vec eta, SubspaceR R = kR) {
    return MarketModel{2, ShortRateModel::vasicek(1.0, 0.03, 0.02, 0.02, v2(0.6, 0.8)),
                       DeterministicFn::constant(std::move(eta)), std::move(R)};
}

BackwardSpec backward_spec(double T_H) {
    return BackwardSpec{T_H, 0.5, GammaModel::vasicek_orthogonal(0.1, 0.02, v2(0, 1)), 2, kR,
                        DeterministicFn::constant(v2(0.1, 0.0)), InitialCurve::flat(0.03)};
}

}  // namespace

TEST_CASE("yield from price round trip") {
    const std::vector<double> tenors = {1.0, 2.0, 5.0, 10.0, 30.0};
    const std::vector<double> prices = {0.99, 0.97, 0.9, 0.8, 0.45};
    const auto c = curve_from_prices(prices, tenors, 0.0, CurveMethod::gaussian_closed);
    for (std::size_t i = 0; i < tenors.size(); ++i) {
        CHECK(std::exp(-c.rates[i] * tenors[i]) == doctest::Approx(prices[i]).epsilon(1e-12));
    }
    const std::vector<double> one = {1.0}, ten = {10.0}, disc = {std::exp(-0.2)};
    CHECK(curve_from_prices(one, ten, 0.0, CurveMethod::ramsey_mc).rates[0] == 0.0);
    CHECK(curve_from_prices(disc, ten, 0.0, CurveMethod::ramsey_mc).rates[0] ==
          doctest::Approx(0.02).epsilon(1e-14));
    const std::vector<double> at2 = {12.0};
    CHECK(curve_from_prices(disc, at2, 2.0, CurveMethod::ramsey_mc).rates[0] ==
          doctest::Approx(0.02).epsilon(1e-14));
    const std::vector<double> bad = {-0.5};
    CHECK_THROWS_AS(curve_from_prices(bad, ten, 0.0, CurveMethod::ramsey_mc), DomainError);
    CHECK(to_string(CurveMethod::risk_neutral) == "risk_neutral");
}

TEST_CASE("flat Ramsey rule") {
    CHECK(ramsey_flat_closed(0.01, 0.5, 0.02, 0.1) == doctest::Approx(0.01625).epsilon(1e-14));
    CHECK(ramsey_flat_closed(0.01, 0.5, 0.02, 0.0) == doctest::Approx(0.02).epsilon(1e-14));
    CHECK(ramsey_flat_closed(0.0, 0.5, 0.0, 0.1) == doctest::Approx(-0.00375).epsilon(1e-14));

    const std::vector<double> tenors = {1.0, 2.0, 5.0, 10.0, 30.0};
    const TimeGrid g(30.0, 120);
    SUBCASE("geometric consumption gives a flat curve") {
        const auto c = gbm_consumption_paths(1.0, 0.02, 0.1, g, 5, 20000);
        const auto rc = ramsey_rate_mc(0.01, 0.5, c, g, tenors);
        for (std::size_t i = 0; i < tenors.size(); ++i) {
            CHECK(std::abs(rc.curve.rates[i] - 0.01625) < 3.0 * rc.curve.std_errors[i]);
        }
        CHECK(rc.spread >= 0.0);
        CHECK(rc.spread < 4.0 * rc.spread_std_error);
    }
    SUBCASE("deterministic consumption") {
        const auto c = gbm_consumption_paths(2.0, 0.02, 0.0, g, 5, 10);
        const auto rc = ramsey_rate_mc(0.01, 0.5, c, g, tenors);
        for (double r : rc.curve.rates) {
            CHECK(r == doctest::Approx(0.02).epsilon(1e-12));
        }
        const auto z = gbm_consumption_paths(1.0, 0.0, 0.0, g, 5, 10);
        for (double r : ramsey_rate_mc(0.0, 0.5, z, g, tenors).curve.rates) {
            CHECK(std::abs(r) <= 1e-15);
        }
    }
}

TEST_CASE("marginal zero-coupon prices") {
    SUBCASE("maturity now and null drivers") {
        const MarketModel m0{2, ShortRateModel::constant(0.0), DeterministicFn::constant(v2(0, 0)), kR};
        const auto zero = DeterministicFn::constant(v2(0, 0));
        CHECK(marginal_zc_gaussian(m0, zero, 3.0, 3.0, 0.0) == 1.0);
        for (double T : {1.0, 10.0}) {
            CHECK(marginal_zc_gaussian(m0, zero, T) == 1.0);
        }
        const MarketModel mc{2, ShortRateModel::constant(0.04), DeterministicFn::constant(v2(0.2, 0)), kR};
        CHECK(marginal_zc_gaussian(mc, zero, 1.0, 6.0, 0.04) == doctest::Approx(std::exp(-0.2)).epsilon(1e-15));
    }
    SUBCASE("orthogonal nu tilts the price by the rate covariance") {
        const auto m = vasicek_market(v2(0.05, 0));
        const auto nu = DeterministicFn::constant(v2(0, 0.1));
        for (double T : {1.0, 5.0, 10.0}) {
            const double B = (1.0 - std::exp(-T)) / 1.0;
            // int_0^T Gamma . nu ds with Gamma = sigma (1 - e^{-a(T-s)}) / a * w.
            const double tilt = 0.1 * 0.8 * 0.02 * (T - B);
            const double ratio = marginal_zc_gaussian(m, nu, T) / risk_neutral_zc(m, T);
            CHECK(ratio > 1.0);
            CHECK(std::log(ratio) == doctest::Approx(tilt).epsilon(1e-10));
        }
    }
    SUBCASE("Monte Carlo agrees with the Gaussian closed form") {
        const auto m = vasicek_market(v2(0.3, 0));
        const auto nu = DeterministicFn::constant(v2(0, 0.1));
        const TimeGrid g(10.0, 40);
        const auto batch = sample_brownian(8, g, 2, 20000);
        const auto rates = simulate_short_rate(m, g, batch);
        const auto Y = state_price_paths(m, g, batch, rates, nu, 1.0);
        for (double T : {1.0, 5.0, 10.0}) {
            const auto e = marginal_zc_mc(Y, g, T);
            CHECK(std::abs(e.mean - marginal_zc_gaussian(m, nu, T)) < 4.0 * e.std_error);
            const auto rn = risk_neutral_zc_mc(m, g, batch, rates, T);
            CHECK(std::abs(rn.mean - risk_neutral_zc(m, T)) < 4.0 * rn.std_error);
        }
    }
    SUBCASE("complete market: marginal and risk-neutral prices coincide") {
        const auto m = vasicek_market(v2(0.3, 0.2), SubspaceR::full(2));
        const auto nu = DeterministicFn::constant(v2(0, 0));
        const TimeGrid g(10.0, 40);
        const auto batch = sample_brownian(9, g, 2, 5000);
        const auto rates = simulate_short_rate(m, g, batch);
        const auto Y = state_price_paths(m, g, batch, rates, nu, 1.0);
        for (double T : {1.0, 5.0, 10.0}) {
            const auto mu = marginal_zc_mc(Y, g, T);
            const auto rn = risk_neutral_zc_mc(m, g, batch, rates, T);
            CHECK(std::abs(mu.mean - rn.mean) <= 4.0 * std::hypot(mu.std_error, rn.std_error));
        }
    }
    SUBCASE("backward Gaussian model") {
        const auto s = backward_spec(10.0);
        const auto vols = solve_backward_vols(s);
        const TimeGrid g(10.0, 40);
        const auto batch = sample_brownian(10, g, 2, 20000);
        const auto T = simulate_backward(s, vols, g, batch);
        for (double tenor : {2.0, 5.0, 10.0}) {
            const auto e = marginal_zc_mc(T.Ystar, g, tenor);
            const double closed = marginal_zc_gaussian(s.gamma, s.curve, vols.nu_star, s.eta_R, tenor);
            CHECK(std::abs(e.mean - closed) < 4.0 * e.std_error);
        }
    }
}

TEST_CASE("nested conditional prices match the Markov closed form") {
    const auto m = vasicek_market(v2(0.3, 0));
    const auto nu = DeterministicFn::constant(v2(0, 0.1));
    const TimeGrid g(6.0, 24);
    const auto batch = sample_brownian(13, g, 2, 50);
    const auto rates = simulate_short_rate(m, g, batch);
    NestedOptions o;
    o.inner_paths = 4096;
    o.seed = 77;
    o.outer_paths = {0, 7, 21};
    const auto prices = marginal_zc_nested(m, nu, rates, g, 1.0, 6.0, o);
    REQUIRE(prices.size() == 3);
    for (const auto& np : prices) {
        CHECK(np.r_t == rates.r(np.outer_path, g.index_of(1.0)));
        const double closed = marginal_zc_gaussian(m, nu, 1.0, 6.0, np.r_t);
        CHECK(std::abs(np.price.mean - closed) < 4.0 * np.price.std_error);
    }
    CHECK_THROWS_AS(marginal_zc_nested(m, nu, rates, g, 1.0, 1.0, o), DomainError);
}

TEST_CASE("forward rates and the mean short rate") {
    const std::vector<double> tenors = {1.0, 2.0, 5.0, 10.0, 20.0};
    SUBCASE("constant rate") {
        const MarketModel m{2, ShortRateModel::constant(0.03), DeterministicFn::constant(v2(0.2, 0)), kR};
        const auto rep = hjm_forward_rates(m, DeterministicFn::constant(v2(0, 0.1)), tenors);
        for (double f : rep.forward) {
            CHECK(f == doctest::Approx(0.03).epsilon(1e-10));
        }
        CHECK(rep.max_abs_residual <= 1e-10);
    }
    SUBCASE("Vasicek with zero nu matches the textbook forward curve") {
        const auto m = vasicek_market(v2(0.05, 0));
        const auto rep = hjm_forward_rates(m, DeterministicFn::constant(v2(0, 0)), tenors, 0.01);
        const double a = 1.0, s = 0.02, r0 = 0.02;
        const double b_q = 0.03 + s * 0.6 * 0.05 / a;
        for (std::size_t i = 0; i < tenors.size(); ++i) {
            const double T = tenors[i];
            const double B = (1.0 - std::exp(-a * T)) / a;
            const double f = b_q + (r0 - b_q) * std::exp(-a * T) - s * s / 2.0 * B * B;
            CHECK(rep.forward[i] == doctest::Approx(f).epsilon(1e-6));
        }
        CHECK(rep.max_abs_residual <= 1e-5);
    }
    SUBCASE("Gamma models reproduce the mean rate") {
        const auto eta = DeterministicFn::constant(v2(0.1, 0));
        const auto nu = DeterministicFn::constant(v2(0, -0.01));
        const auto sq = GammaModel::synthetic_sqrt(0.0001, 0.0004, v2(1, 0), v2(0, 1));
        CHECK(hjm_forward_rates(sq, InitialCurve::flat(0.03), nu, eta, tenors).max_abs_residual <= 1e-3);
        const auto vg = GammaModel::vasicek_orthogonal(0.1, 0.02, v2(0, 1));
        CHECK(hjm_forward_rates(vg, InitialCurve::flat(0.03), nu, eta, tenors).max_abs_residual <= 1e-3);
        CHECK_THROWS_AS(hjm_forward_rates(vg, InitialCurve::flat(0.03), nu, eta, tenors, 0.5), DomainError);
    }
}

TEST_CASE("long-rate verdicts") {
    const std::vector<double> times = {0.0, 1.0, 5.0, 10.0};
    const std::vector<double> probes = {50.0, 100.0, 200.0};
    const double c_perp = 0.0004;
    SUBCASE("bounded Gamma gives a constant long rate") {
        const auto vg = GammaModel::vasicek_orthogonal(0.1, 0.02, v2(0, 1));
        for (auto mode : {LongRateMode::forward, LongRateMode::backward}) {
            const auto rep = long_rate(vg, kR, mode, 0.3, times, 0.04, probes);
            CHECK(rep.verdict == LongRateVerdict::constant);
            for (double l : rep.levels) {
                CHECK(l == 0.04);
            }
            // Finite-maturity proxies shrink like 1 / (T - t).
            CHECK(std::abs(rep.proxies.back().integrand) < std::abs(rep.proxies.front().integrand));
        }
    }
    SUBCASE("square-root Gamma, forward mode") {
        const auto sq = GammaModel::synthetic_sqrt(0.0, c_perp, v2(1, 0), v2(0, 1));
        const auto rep = long_rate(sq, kR, LongRateMode::forward, 0.5, times, 0.0, probes);
        CHECK(rep.verdict == LongRateVerdict::increasing);
        CHECK(std::abs(rep.slope - c_perp / 2.0) <= 1e-12);
        for (const auto& pr : rep.proxies) {
            CHECK(std::abs(pr.integrand - c_perp / 2.0) <= 1e-12);
        }
    }
    SUBCASE("square-root Gamma, backward mode") {
        const double alpha = 0.25;
        const auto sq = GammaModel::synthetic_sqrt(0.0, c_perp, v2(1, 0), v2(0, 1));
        const auto rep = long_rate(sq, kR, LongRateMode::backward, alpha, times, 0.0, probes);
        CHECK(rep.verdict == LongRateVerdict::decreasing);
        CHECK(std::abs(rep.slope - (2.0 * alpha - 1.0) * c_perp / 2.0) <= 1e-12);
        CHECK(rep.levels.back() == doctest::Approx(10.0 * rep.slope).epsilon(1e-15));
    }
    SUBCASE("custom tables") {
        const auto flat = GammaModel::custom({0.0, 5.0}, {v2(0, 0), v2(0, 0.02)}, Extrapolation::flat);
        CHECK(long_rate(flat, kR, LongRateMode::forward, 0.5, times).verdict == LongRateVerdict::constant);
        const auto lin = GammaModel::custom({0.0, 5.0}, {v2(0, 0), v2(0, 0.02)}, Extrapolation::linear);
        const auto rep = long_rate(lin, kR, LongRateMode::forward, 0.5, times);
        CHECK(rep.verdict == LongRateVerdict::infinite);
        CHECK(to_string(rep.verdict) == "infinite");
    }
}

TEST_CASE("Davis pricing") {
    const auto s = backward_spec(10.0);
    const TimeGrid g(10.0, 40);
    const auto batch = sample_brownian(14, g, 2, 20000);
    const auto T = simulate_backward(s, g, batch);
    const Payoff one = [](const PayoffState&) { return 1.0; };
    const Payoff call = [](const PayoffState& st) { return std::max(st.X - 1.0, 0.0); };
    const Payoff rate = [](const PayoffState& st) { return st.r; };

    SUBCASE("unit payoff is the zero-coupon price") {
        const auto d = davis_price(one, T, 0.0, 5.0);
        const auto e = marginal_zc_mc(T.Ystar, g, 5.0);
        CHECK(d.value == e.mean);
        CHECK(d.std_error == e.std_error);
        // Priced at its own maturity the payoff is simply averaged.
        std::vector<double> payoff(T.n_paths());
        for (std::size_t p = 0; p < T.n_paths(); ++p) {
            payoff[p] = std::max(T.Xstar.X(p, g.index_of(5.0)) - 1.0, 0.0);
        }
        CHECK(davis_price(call, T, 5.0, 5.0).value == doctest::Approx(mean_stderr(payoff).mean).epsilon(1e-14));
    }
    SUBCASE("estimator is exactly linear on a fixed batch") {
        const double a = 2.5, b = -0.75;
        const Payoff combo = [&](const PayoffState& st) { return a * call(st) + b * rate(st); };
        const double lhs = davis_price(combo, T, 0.0, 5.0).value;
        const double rhs = a * davis_price(call, T, 0.0, 5.0).value + b * davis_price(rate, T, 0.0, 5.0).value;
        CHECK(std::abs(lhs - rhs) <= 1e-15 * std::max(1.0, std::abs(lhs)));
        const auto q = davis_price(call, T, 0.0, 5.0, 3.0);
        CHECK(q.value == 3.0 * q.per_unit);
    }
    SUBCASE("capitalising to the horizon agrees") {
        for (const Payoff& z : {one, call}) {
            const auto c = davis_capitalization_check(z, T, 5.0, 10.0);
            CHECK(std::abs(c.t_stat) < 3.0);
            CHECK(c.diff_std_error > 0.0);
        }
        CHECK_THROWS_AS(davis_capitalization_check(one, T, 10.0, 5.0), DomainError);
    }
}

TEST_CASE("pathwise Ramsey identity") {
    SUBCASE("forward spec with consumption") {
        const MarketModel m{2, ShortRateModel::vasicek(1.0, 0.03, 0.02, 0.02, v2(0.6, 0.8)),
                            DeterministicFn::constant(v2(0.3, 0)), kR};
        const ForwardPowerSpec spec{0.5, DeterministicFn::constant(v2(0.3, 0)),
                                    DeterministicFn::constant(v2(0, 0.1)), DeterministicFn::constant_scalar(0.1)};
        const TimeGrid g(2.0, 20);
        const auto batch = sample_brownian(15, g, 2, 1000);
        const auto T = simulate_optimal(spec, m, g, batch);
        CHECK(pathwise_ramsey_report(T, T.utility()) <= 1e-9);
    }
    SUBCASE("backward spec") {
        const auto s = backward_spec(10.0);
        const TimeGrid g(10.0, 20);
        const auto batch = sample_brownian(16, g, 2, 1000);
        const auto T = simulate_backward(s, g, batch);
        CHECK(pathwise_ramsey_report(T, T.utility()) <= 1e-9);
    }
}
