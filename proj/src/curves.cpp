#include "forward_yield/curves.hpp"

#include "forward_yield/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace forward_yield {

namespace {

double integrate(const std::function<double(double)>& f, double lo, double hi) {
    if (!(hi > lo)) {
        return 0.0;
    }
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 15, 1e-13);
}

/// int_lo^T f(s) ds with s = T - v^2, which removes sqrt(T - s) kinks.
double integrate_to_maturity(const std::function<double(double)>& f, double lo, double T) {
    if (!(T > lo)) {
        return 0.0;
    }
    return integrate(
        [&](double v) {
            const double s = T - v * v;
            // v below sqrt(ulp(T)) rounds s onto T; the weight 2v makes that sliver negligible.
            return s < T ? 2.0 * v * f(s) : 0.0;
        },
        0.0, std::sqrt(T - lo));
}

DeterministicFn shifted(const DeterministicFn& f, double dt) {
    return DeterministicFn::closed_form(f.tag() + " (shifted)", f.dim(),
                                        [f, dt](double s) -> Vec { return f(s + dt); });
}

Vec vasicek_gamma(const MarketModel& market, double s, double T) {
    if (!market.rate.is_vasicek()) {
        return Vec::Zero(static_cast<Eigen::Index>(market.dim));
    }
    const auto& v = market.rate.vasicek_params();
    return zc_volatility_vasicek(v.a, v.sigma_r, s, T) * v.w_dir;
}

Vec vasicek_dgamma(const MarketModel& market, double s, double T) {
    if (!market.rate.is_vasicek()) {
        return Vec::Zero(static_cast<Eigen::Index>(market.dim));
    }
    const auto& v = market.rate.vasicek_params();
    return v.sigma_r * std::exp(-v.a * (T - s)) * v.w_dir;
}

}  // namespace

std::string to_string(CurveMethod m) {
    switch (m) {
        case CurveMethod::ramsey_mc:
            return "ramsey_mc";
        case CurveMethod::marginal_mc:
            return "marginal_mc";
        case CurveMethod::gaussian_closed:
            return "gaussian_closed";
        case CurveMethod::risk_neutral:
            return "risk_neutral";
    }
    return "unknown";
}

YieldCurve curve_from_prices(std::span<const double> prices, std::span<const double> tenors,
                             double asof, CurveMethod method,
                             std::span<const double> price_std_errors) {
    if (prices.size() != tenors.size()) {
        throw DomainError("curve needs one price per tenor");
    }
    if (!price_std_errors.empty() && price_std_errors.size() != prices.size()) {
        throw DomainError("curve standard errors must match the prices");
    }
    YieldCurve c;
    c.asof = asof;
    c.method = method;
    for (std::size_t i = 0; i < prices.size(); ++i) {
        const double T = tenors[i];
        if (!(T > asof) || (i > 0 && !(T > tenors[i - 1]))) {
            throw DomainError("curve tenors must be strictly increasing and after the as-of time");
        }
        if (!(prices[i] > 0.0) || !std::isfinite(prices[i])) {
            std::ostringstream msg;
            msg << "zero-coupon price must be positive (got " << prices[i] << " at T = " << T
                << ")";
            throw DomainError(msg.str());
        }
        const double tau = T - asof;
        c.tenors.push_back(T);
        c.prices.push_back(prices[i]);
        c.rates.push_back(-std::log(prices[i]) / tau);
        c.std_errors.push_back(price_std_errors.empty() ? 0.0
                                                        : price_std_errors[i] / (prices[i] * tau));
    }
    return c;
}

// ---------------------------------------------------------------------------

double ramsey_flat_closed(double beta, double alpha, double g, double sigma) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw DomainError("risk aversion alpha must lie in (0,1)");
    }
    return beta + alpha * g - 0.5 * alpha * (alpha + 1.0) * sigma * sigma;
}

PathMatrix gbm_consumption_paths(double c0, double g, double sigma, const TimeGrid& grid,
                                 std::uint64_t seed, std::size_t n_paths) {
    if (!(c0 > 0.0) || !(sigma >= 0.0)) {
        throw DomainError("consumption needs c0 > 0 and sigma >= 0");
    }
    const auto batch = sample_brownian(seed, grid, 1, n_paths);
    PathMatrix c(n_paths, grid.n_points());
    const double drift = (g - 0.5 * sigma * sigma) * grid.dt();
    parallel_for(n_paths, [&](std::size_t p) {
        double log_c = std::log(c0);
        c(p, 0) = c0;
        for (std::size_t k = 0; k < grid.n_steps(); ++k) {
            log_c += drift + sigma * batch.increment(p, k)[0];
            c(p, k + 1) = std::exp(log_c);
        }
    });
    return c;
}

RamseyCurve ramsey_rate_mc(double beta, double alpha, const PathMatrix& consumption,
                           const TimeGrid& grid, std::span<const double> tenors) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw DomainError("risk aversion alpha must lie in (0,1)");
    }
    const std::size_t n = consumption.n_paths();
    if (n < 2 || consumption.n_cols() != grid.n_points()) {
        throw DomainError("consumption paths do not match the grid");
    }
    std::vector<std::vector<double>> influence;
    std::vector<double> prices;
    std::vector<double> price_se;
    for (double T : tenors) {
        if (!(T > 0.0)) {
            throw DomainError("Ramsey tenors must be positive");
        }
        const std::size_t k = grid.index_of(T);
        std::vector<double> w(n);
        for (std::size_t p = 0; p < n; ++p) {
            const double c0 = consumption(p, 0);
            const double cT = consumption(p, k);
            if (!(c0 > 0.0) || !(cT > 0.0)) {
                throw DomainError("Ramsey rule needs positive consumption paths");
            }
            w[p] = std::exp(-beta * T) * std::pow(cT / c0, -alpha);
        }
        const auto est = mean_stderr(w);
        if (!(est.mean > 0.0)) {
            throw EstimationError("mean discounted marginal utility is not positive");
        }
        std::vector<double> inf(n);
        for (std::size_t p = 0; p < n; ++p) {
            inf[p] = -(w[p] - est.mean) / (est.mean * T);
        }
        influence.push_back(std::move(inf));
        prices.push_back(est.mean);
        price_se.push_back(est.std_error);
    }
    RamseyCurve out;
    out.curve = curve_from_prices(prices, tenors, 0.0, CurveMethod::ramsey_mc, price_se);
    if (tenors.size() >= 2) {
        const auto& r = out.curve.rates;
        const auto hi = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
        const auto lo = static_cast<std::size_t>(std::min_element(r.begin(), r.end()) - r.begin());
        std::vector<double> diff(n);
        for (std::size_t p = 0; p < n; ++p) {
            diff[p] = influence[hi][p] - influence[lo][p];
        }
        out.spread = r[hi] - r[lo];
        out.spread_std_error = mean_stderr(diff).std_error;
    }
    return out;
}

// ---------------------------------------------------------------------------

Estimate marginal_zc_mc(const StatePricePaths& Y, const TimeGrid& grid, double T) {
    const std::size_t k = grid.index_of(T);
    std::vector<double> ratio(Y.Y.n_paths());
    for (std::size_t p = 0; p < ratio.size(); ++p) {
        ratio[p] = Y.Y(p, k) / Y.Y(p, 0);
    }
    return mean_stderr(ratio);
}

std::vector<NestedPrice> marginal_zc_nested(const MarketModel& market, const DeterministicFn& nu,
                                            const RatePaths& outer_rates, const TimeGrid& grid,
                                            double t, double T, const NestedOptions& options) {
    if (!(T > t)) {
        throw DomainError("nested zero-coupon price needs t < T");
    }
    if (options.inner_paths < 2) {
        throw DomainError("nested simulation needs at least two inner paths");
    }
    const std::size_t kt = grid.index_of(t);
    const std::size_t kT = grid.index_of(T);
    const TimeGrid inner_grid(T - t, kT - kt);

    std::vector<std::size_t> outer = options.outer_paths;
    if (outer.empty()) {
        outer.resize(outer_rates.r.n_paths());
        for (std::size_t p = 0; p < outer.size(); ++p) {
            outer[p] = p;
        }
    }
    const auto nu_s = shifted(nu, t);
    const auto eta_s = shifted(market.eta_R, t);

    std::vector<NestedPrice> out;
    out.reserve(outer.size());
    for (std::size_t p : outer) {
        if (p >= outer_rates.r.n_paths()) {
            throw DomainError("outer path index outside the batch");
        }
        const double r_t = outer_rates.r(p, kt);
        const MarketModel inner_market{market.dim, market.rate.restarted_at(r_t), eta_s, market.R};
        auto rng = path_rng(options.seed, p, StreamTag::nested_inner);
        const std::uint64_t inner_seed = rng();
        const auto batch = sample_brownian(inner_seed, inner_grid, market.dim, options.inner_paths);
        const auto rates = simulate_short_rate(inner_market, inner_grid, batch);
        const auto Y = state_price_paths(inner_market, inner_grid, batch, rates, nu_s, 1.0);
        out.push_back({p, r_t, marginal_zc_mc(Y, inner_grid, T - t)});
    }
    return out;
}

double marginal_zc_gaussian(const MarketModel& market, const DeterministicFn& nu, double t,
                            double T, double r_t) {
    if (T < t) {
        throw DomainError("zero-coupon price needs t <= T");
    }
    if (T == t) {
        return 1.0;
    }
    const double mean = market.rate.integrated_mean(T - t, r_t);
    const double var = market.rate.integrated_variance(T - t);
    double cov = 0.0;
    if (market.rate.is_vasicek()) {
        cov = integrate_to_maturity(
            [&](double s) { return vasicek_gamma(market, s, T).dot(nu(s) - market.eta_R(s)); }, t,
            T);
    }
    return std::exp(-mean + 0.5 * var + cov);
}

double marginal_zc_gaussian(const MarketModel& market, const DeterministicFn& nu, double T) {
    return marginal_zc_gaussian(market, nu, 0.0, T, market.rate.r0());
}

double marginal_zc_gaussian(const GammaModel& gamma, const InitialCurve& curve,
                            const DeterministicFn& nu, const DeterministicFn& eta, double T) {
    if (T < 0.0) {
        throw DomainError("zero-coupon maturity must be nonnegative");
    }
    const double half_var = 0.5 * integrate_to_maturity(
                                      [&](double s) { return gamma.gamma(s, T).squaredNorm(); },
                                      0.0, T);
    const double cov = integrate_to_maturity(
        [&](double s) { return gamma.gamma(s, T).dot(nu(s) - eta(s)); }, 0.0, T);
    return std::exp(-curve.integrated(T) + half_var + cov);
}

Estimate risk_neutral_zc_mc(const MarketModel& market, const TimeGrid& grid,
                            const BrownianBatch& batch, const RatePaths& rates, double T) {
    const auto zero = DeterministicFn::constant(Vec::Zero(static_cast<Eigen::Index>(market.dim)));
    const auto Y0 = state_price_paths(market, grid, batch, rates, zero, 1.0);
    return marginal_zc_mc(Y0, grid, T);
}

double risk_neutral_zc(const MarketModel& market, double T) {
    const auto zero = DeterministicFn::constant(Vec::Zero(static_cast<Eigen::Index>(market.dim)));
    return marginal_zc_gaussian(market, zero, T);
}

// ---------------------------------------------------------------------------

namespace {

HjmReport hjm_core(const std::function<double(double)>& log_price,
                   const std::function<Vec(double, double)>& gamma,
                   const std::function<Vec(double, double)>& dgamma,
                   const std::function<double(double)>& model_mean, const DeterministicFn& nu,
                   const DeterministicFn& eta, std::span<const double> tenors, double h) {
    if (!(h > 0.0) || h > 0.25) {
        std::ostringstream msg;
        msg << "tenor spacing " << h << " is too coarse for the forward-rate differences "
            << "(need 0 < h <= 0.25)";
        throw DomainError(msg.str());
    }
    HjmReport rep;
    for (double T : tenors) {
        if (!(T >= h)) {
            throw DomainError("forward-rate tenors must be at least one spacing from 0");
        }
        const double f0 = -(log_price(T + h) - log_price(T - h)) / (2.0 * h);
        const double premium = integrate_to_maturity(
            [&](double s) { return dgamma(s, T).dot(eta(s) - nu(s)); }, 0.0, T);
        const double convexity =
            integrate_to_maturity([&](double s) { return gamma(s, T).dot(dgamma(s, T)); }, 0.0, T);
        const double rebuilt = f0 - premium + convexity;
        const double model = model_mean(T);
        rep.tenors.push_back(T);
        rep.forward.push_back(f0);
        rep.reconstructed_mean_rate.push_back(rebuilt);
        rep.model_mean_rate.push_back(model);
        rep.max_abs_residual = std::max(rep.max_abs_residual, std::abs(rebuilt - model));
    }
    return rep;
}

}  // namespace

HjmReport hjm_forward_rates(const GammaModel& gamma, const InitialCurve& curve,
                            const DeterministicFn& nu, const DeterministicFn& eta,
                            std::span<const double> tenors, double h) {
    return hjm_core(
        [&](double T) { return std::log(marginal_zc_gaussian(gamma, curve, nu, eta, T)); },
        [&](double s, double T) { return gamma.gamma(s, T); },
        [&](double s, double T) { return gamma.dgamma_dT(s, T); }, curve.forward, nu, eta,
        tenors, h);
}

HjmReport hjm_forward_rates(const MarketModel& market, const DeterministicFn& nu,
                            std::span<const double> tenors, double h) {
    return hjm_core([&](double T) { return std::log(marginal_zc_gaussian(market, nu, T)); },
                    [&](double s, double T) { return vasicek_gamma(market, s, T); },
                    [&](double s, double T) { return vasicek_dgamma(market, s, T); },
                    [&](double T) { return market.rate.expected_short_rate(T); }, nu,
                    market.eta_R, tenors, h);
}

// ---------------------------------------------------------------------------

std::string to_string(LongRateVerdict v) {
    switch (v) {
        case LongRateVerdict::constant:
            return "constant";
        case LongRateVerdict::increasing:
            return "increasing";
        case LongRateVerdict::decreasing:
            return "decreasing";
        case LongRateVerdict::infinite:
            return "infinite";
    }
    return "unknown";
}

LongRateReport long_rate(const GammaModel& gamma, const SubspaceR& R, LongRateMode mode,
                         double alpha, std::span<const double> times, double l0,
                         std::span<const double> probes) {
    if (mode == LongRateMode::backward && !(alpha > 0.0 && alpha < 1.0)) {
        throw DomainError("risk aversion alpha must lie in (0,1)");
    }
    const auto lim = gamma.asymptotics(R);
    LongRateReport rep;
    rep.times.assign(times.begin(), times.end());
    if (!lim.finite) {
        rep.verdict = LongRateVerdict::infinite;
        rep.slope = std::numeric_limits<double>::infinity();
        rep.levels.assign(times.size(), std::numeric_limits<double>::infinity());
        return rep;
    }
    // Integrand of l_t; constant in s for every supported model.
    const double w_perp = mode == LongRateMode::forward ? 1.0 : 2.0 * alpha - 1.0;
    rep.slope = 0.5 * (lim.lim_R + w_perp * lim.lim_perp);
    for (double t : times) {
        rep.levels.push_back(l0 + rep.slope * t);
    }
    if (rep.slope == 0.0) {
        rep.verdict = LongRateVerdict::constant;
    } else {
        rep.verdict = rep.slope > 0.0 ? LongRateVerdict::increasing : LongRateVerdict::decreasing;
    }
    for (double T : probes) {
        for (double t : times) {
            if (!(T > t)) {
                continue;
            }
            const Vec g = gamma.gamma(t, T);
            const double gp = R.proj_perp(g).squaredNorm();
            const double gr = R.proj_R(g).squaredNorm();
            rep.proxies.push_back({T, t, (gr + w_perp * gp) / (2.0 * (T - t))});
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------

DavisPrice davis_price(const Payoff& payoff, const OptimalTriple& triple, double t, double T,
                       double quantity) {
    if (!(T >= t)) {
        throw DomainError("Davis price needs t <= T");
    }
    const std::size_t kt = triple.grid.index_of(t);
    const std::size_t kT = triple.grid.index_of(T);
    const std::size_t n = triple.n_paths();
    std::vector<double> w(n);
    for (std::size_t p = 0; p < n; ++p) {
        const PayoffState s{triple.rates.r(p, kT), triple.rates.int_r(p, kT),
                            triple.Xstar.X(p, kT), triple.Ystar.Y(p, kT)};
        const double zeta = payoff(s);
        if (!std::isfinite(zeta)) {
            throw EstimationError("payoff returned a non-finite value");
        }
        w[p] = zeta * triple.Ystar.Y(p, kT) / triple.Ystar.Y(p, kt);
    }
    const auto est = mean_stderr(w);
    return {quantity * est.mean, std::abs(quantity) * est.std_error, est.mean};
}

CapitalizationCheck davis_capitalization_check(const Payoff& payoff,
                                               const OptimalTriple& triple, double T,
                                               double T_H) {
    if (!(T_H >= T)) {
        throw DomainError("capitalization needs T <= T_H");
    }
    const std::size_t kT = triple.grid.index_of(T);
    const std::size_t kH = triple.grid.index_of(T_H);
    const std::size_t n = triple.n_paths();
    std::vector<double> a(n);
    std::vector<double> b(n);
    std::vector<double> d(n);
    for (std::size_t p = 0; p < n; ++p) {
        const PayoffState s{triple.rates.r(p, kT), triple.rates.int_r(p, kT),
                            triple.Xstar.X(p, kT), triple.Ystar.Y(p, kT)};
        const double zeta = payoff(s);
        const double y0 = triple.Ystar.Y(p, 0);
        a[p] = zeta * triple.Ystar.Y(p, kT) / y0;
        b[p] = zeta * (triple.Xstar.X(p, kH) / triple.Xstar.X(p, kT)) * triple.Ystar.Y(p, kH) / y0;
        d[p] = b[p] - a[p];
    }
    const auto ea = mean_stderr(a);
    const auto eb = mean_stderr(b);
    const auto ed = mean_stderr(d);
    CapitalizationCheck c{{ea.mean, ea.std_error, ea.mean},
                          {eb.mean, eb.std_error, eb.mean},
                          ed.std_error,
                          0.0};
    c.t_stat = ed.std_error > 0.0 ? ed.mean / ed.std_error : 0.0;
    return c;
}

// ---------------------------------------------------------------------------

double pathwise_ramsey_report(const OptimalTriple& triple,
                              const ProgressivePowerUtility& utility) {
    double worst = 0.0;
    const double x0 = triple.Xstar.X(0, 0);
    for (std::size_t p = 0; p < triple.n_paths(); ++p) {
        const double y_start = triple.Ystar.Y(p, 0);
        const double c_start = utility.psi_hat.scalar(0.0) * x0;
        // Without consumption the marginal utility of wealth carries the identity.
        const double m0 = c_start > 0.0 ? progressive_eval(utility, p, 0, c_start).V_c
                                        : progressive_eval(utility, p, 0, x0).U_x;
        for (std::size_t k = 0; k < triple.grid.n_points(); ++k) {
            const double x = triple.Xstar.X(p, k);
            const double c = utility.psi_hat.scalar(triple.grid.time(k)) * x;
            const double m = c > 0.0 ? progressive_eval(utility, p, k, c).V_c
                                     : progressive_eval(utility, p, k, x).U_x;
            const double target = triple.Ystar.Y(p, k) / y_start;
            worst = std::max(worst, std::abs(m / m0 - target) / target);
        }
    }
    return worst;
}

}  // namespace forward_yield
