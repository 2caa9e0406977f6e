#include "forward_yield/forward_optimal.hpp"

#include "forward_yield/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace forward_yield {

namespace {

constexpr double kTiny = 1e-300;

double rel_gap(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), kTiny});
}

}  // namespace

void ForwardPowerSpec::validate(const MarketModel& market, const TimeGrid& grid) const {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw DomainError("risk aversion alpha must lie in (0,1)");
    }
    if (kappa_star.dim() != market.dim || nu_star.dim() != market.dim) {
        throw DomainError("kappa* and nu* must have the market dimension");
    }
    if (psi_hat.dim() != 1) {
        throw DomainError("psi_hat must be scalar");
    }
    for (std::size_t k = 0; k < grid.n_points(); ++k) {
        const double t = grid.time(k);
        std::ostringstream where;
        where << " (violated at t = " << t << ")";
        if (!market.R.contains(kappa_star(t))) {
            throw SubspaceViolation("kappa* must lie in R" + where.str());
        }
        if (!market.R.orthogonal_to(nu_star(t))) {
            throw SubspaceViolation("nu* must lie in the orthogonal complement of R" +
                                    where.str());
        }
        if (!(psi_hat.scalar(t) >= 0.0)) {
            throw DomainError("psi_hat must be nonnegative" + where.str());
        }
    }
}

ProgressivePowerUtility OptimalTriple::utility() const {
    return ProgressivePowerUtility{alpha, Zhat, psi_hat, grid};
}

OptimalTriple assemble_triple(double alpha, const TimeGrid& grid, RatePaths rates, WealthPaths X,
                              StatePricePaths Y, DeterministicFn psi_hat) {
    const std::size_t n = X.X.n_paths();
    if (Y.Y.n_paths() != n || X.X.n_cols() != grid.n_points() ||
        Y.Y.n_cols() != grid.n_points()) {
        throw DomainError("wealth and state price paths do not share a batch and grid");
    }
    const double x0 = X.X(0, 0);
    const double y0 = Y.y0;
    if (!(x0 > 0.0)) {
        throw DomainError("optimal wealth needs x0 > 0");
    }
    PathMatrix Z(n, grid.n_points());
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t k = 0; k < grid.n_points(); ++k) {
            Z(p, k) = (Y.Y(p, k) / y0) * std::pow(X.X(p, k) / x0, alpha);
        }
    }
    return OptimalTriple{alpha,         grid,         std::move(rates), std::move(X),
                         std::move(Y),  std::move(Z), std::move(psi_hat)};
}

OptimalTriple simulate_optimal(const ForwardPowerSpec& spec, const MarketModel& market,
                               const TimeGrid& grid, const BrownianBatch& batch, double x0,
                               double y0) {
    market.validate(grid);
    spec.validate(market, grid);
    if (!(x0 > 0.0) || !(y0 > 0.0)) {
        throw DomainError("optimal processes need x0 > 0 and y0 > 0");
    }
    auto rates = simulate_short_rate(market, grid, batch);
    auto X = wealth_paths(market, grid, batch, rates, spec.kappa_star,
                          ConsumptionRule::proportional(spec.psi_hat), x0);
    auto Y = state_price_paths(market, grid, batch, rates, spec.nu_star, y0);
    return assemble_triple(spec.alpha, grid, std::move(rates), std::move(X), std::move(Y),
                           spec.psi_hat);
}

// ---------------------------------------------------------------------------

FirstOrderReport first_order_check(const OptimalTriple& triple,
                                   const ProgressivePowerUtility& utility, double x0, double y0) {
    if (!(x0 > 0.0) || !(y0 > 0.0)) {
        throw DomainError("first-order check needs x0 > 0 and y0 > 0");
    }
    const double tx0 = triple.Xstar.X(0, 0);
    const double ty0 = triple.Ystar.y0;
    FirstOrderReport rep{0.0, 0.0, false};
    for (std::size_t p = 0; p < triple.n_paths(); ++p) {
        for (std::size_t k = 0; k < triple.grid.n_points(); ++k) {
            const double x = x0 * triple.Xstar.X(p, k) / tx0;
            const double y = y0 * triple.Ystar.Y(p, k) / ty0;
            const auto v = progressive_eval(utility, p, k, x);
            rep.max_marginal_residual =
                std::max(rep.max_marginal_residual, std::abs(v.U_x - y) / v.U_x);
            const double c = utility.psi_hat.scalar(triple.grid.time(k)) * x;
            if (c > 0.0) {
                const auto vc = progressive_eval(utility, p, k, c);
                rep.max_consumption_residual =
                    std::max(rep.max_consumption_residual, std::abs(vc.V_c - y) / vc.V_c);
            }
        }
    }
    const double ux0 = progressive_eval(utility, 0, 0, x0).U_x;
    rep.initial_condition_consistent = std::abs(ux0 - y0) <= 1e-12 * ux0;
    return rep;
}

// ---------------------------------------------------------------------------

PowerCharacteristics power_characteristics(const ForwardPowerSpec& spec,
                                           const MarketModel& market, double t, double zhat,
                                           double r) {
    const double a = spec.alpha;
    const Vec kappa = spec.kappa_star(t);
    const Vec nu = spec.nu_star(t);
    const Vec eta = market.eta_R(t);
    const double psi = spec.psi_hat.scalar(t);
    const double beta =
        zhat * (-(1.0 - a) * r - 0.5 * a * (1.0 - a) * kappa.squaredNorm() - a * psi);
    return {beta, zhat * (a * kappa + nu - eta)};
}

HjbReport hjb_residual(const ForwardPowerSpec& spec, const OptimalTriple& triple,
                       const MarketModel& market, const HjbOptions& options) {
    const double a = spec.alpha;
    const auto x_grid = options.x_grid.empty() ? log_grid(0.05, 20.0, 20) : options.x_grid;
    const auto& grid = triple.grid;
    const std::size_t n_times = std::max<std::size_t>(1, std::min(options.n_times, grid.n_points()));
    const auto P = triple.utility();

    HjbReport rep;
    for (std::size_t i = 0; i < n_times; ++i) {
        const std::size_t k =
            n_times == 1 ? 0 : i * (grid.n_points() - 1) / (n_times - 1);
        const double t = grid.time(k);
        const Vec eta = market.eta_R(t);
        const Vec kappa = spec.kappa_star(t);
        const Vec nu = spec.nu_star(t);
        const Vec vol_y = nu - eta;
        for (std::size_t p : options.paths) {
            if (p >= triple.n_paths()) {
                throw DomainError("HJB residual path index outside the batch");
            }
            const double z = triple.Zhat(p, k);
            const double r = triple.rates.r(p, k);
            const auto ch = power_characteristics(spec, market, t, z, r);
            for (double x : x_grid) {
                const auto v = progressive_eval(P, p, k, x);
                const double u_scaled = v.U / z;
                const double ux = v.U_x / z;

                // Primal drift constraint and optimal policy.
                const double beta = ch.beta * (1.0 + options.beta_bump) * u_scaled;
                const Vec gamma_x = ch.gamma * ux;
                const Vec x_kappa = -(v.U_x * eta + market.R.proj_R(gamma_x)) / v.U_xx;
                const double v_tilde = progressive_conjugate_consumption(P, p, k, v.U_x).value;
                const double rhs =
                    -v.U_x * x * r + 0.5 * v.U_xx * x_kappa.squaredNorm() - v_tilde;
                rep.max_drift_residual = std::max(rep.max_drift_residual, rel_gap(beta, rhs));

                const Vec target = x * kappa;
                const double scale = std::max({target.norm(), x * eta.norm(), x * 1e-12});
                rep.max_policy_residual =
                    std::max(rep.max_policy_residual, (x_kappa - target).norm() / scale);
                rep.max_kappa_error = std::max(rep.max_kappa_error, (x_kappa / x - kappa).norm());

                // Conjugate drift constraint at y = U_x(t, x).
                const double y = v.U_x;
                const double zpow = std::pow(z, 1.0 / a);
                const auto conj = power_conjugate(PowerUtility(a), y);
                const double ut_y = zpow * conj.derivative;
                const double ut_yy = zpow * std::pow(y, -1.0 / a - 1.0) / a;
                const double gamma_rel = (ch.gamma / z).squaredNorm();
                const double beta_dual =
                    conj.value * zpow *
                    (ch.beta * (1.0 + options.beta_bump) / (a * z) +
                     (1.0 - a) / (2.0 * a * a) * gamma_rel);
                const double rhs_dual = y * ut_y * r + 0.5 * ut_yy * y * y * vol_y.squaredNorm() +
                                        ut_y * y * kappa.dot(eta) - v_tilde;
                rep.max_dual_residual =
                    std::max(rep.max_dual_residual, rel_gap(beta_dual, rhs_dual));
                ++rep.n_nodes;
            }
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------

Strategy optimal_strategy(const ForwardPowerSpec& spec) {
    return {spec.kappa_star, ConsumptionRule::proportional(spec.psi_hat)};
}

Strategy volatility_perturbation(const ForwardPowerSpec& spec, const Vec& direction, double eps) {
    if (static_cast<std::size_t>(direction.size()) != spec.kappa_star.dim()) {
        throw DomainError("perturbation direction has the wrong dimension");
    }
    auto base = spec.kappa_star;
    auto kappa = DeterministicFn::closed_form(
        "kappa* + eps e", base.dim(),
        [base, direction, eps](double t) -> Vec { return base(t) + eps * direction; });
    return {std::move(kappa), ConsumptionRule::proportional(spec.psi_hat)};
}

Strategy consumption_perturbation(const ForwardPowerSpec& spec, double factor) {
    if (!(factor >= 0.0)) {
        throw DomainError("consumption scaling factor must be nonnegative");
    }
    auto psi = spec.psi_hat;
    auto scaled = DeterministicFn::closed_form(
        "factor * psi_hat", 1,
        [psi, factor](double t) -> Vec { return Vec::Constant(1, factor * psi.scalar(t)); });
    return {spec.kappa_star, ConsumptionRule::proportional(std::move(scaled))};
}

DriftReport consistency_drift_test(const ProgressivePowerUtility& utility,
                                   const MarketModel& market, const RatePaths& rates,
                                   const Strategy& strategy, const TimeGrid& grid,
                                   const BrownianBatch& batch, double x0, double band) {
    if (utility.Zhat.n_paths() != batch.n_paths() ||
        utility.Zhat.n_cols() != grid.n_points()) {
        throw DomainError("utility coefficient paths do not match the batch");
    }
    const auto W =
        wealth_paths(market, grid, batch, rates, strategy.kappa, strategy.consumption, x0);
    const std::size_t n = batch.n_paths();
    PathMatrix G(n, grid.n_points());
    const double half_dt = 0.5 * grid.dt();

    auto U_at = [&](std::size_t p, std::size_t k, double x) {
        return x > 0.0 ? progressive_eval(utility, p, k, x).U : 0.0;
    };
    auto V_at = [&](std::size_t p, std::size_t k, double c) {
        return c > 0.0 ? progressive_eval(utility, p, k, c).V : 0.0;
    };
    parallel_for(n, [&](std::size_t p) {
        double consumed = 0.0;
        double v_prev = V_at(p, 0, W.c(p, 0));
        G(p, 0) = U_at(p, 0, W.X(p, 0));
        for (std::size_t k = 0; k < grid.n_steps(); ++k) {
            const double v_next = V_at(p, k + 1, W.c(p, k + 1));
            consumed += half_dt * (v_prev + v_next);
            v_prev = v_next;
            G(p, k + 1) = U_at(p, k + 1, W.X(p, k + 1)) + consumed;
        }
    });
    return drift_report(G, grid, band);
}

// ---------------------------------------------------------------------------

double inverse_wealth_flow(const OptimalTriple& triple, std::size_t p, std::size_t k, double x) {
    const double xhat = triple.Xstar.X(p, k) / triple.Xstar.X(0, 0);
    if (!(xhat > 0.0)) {
        throw DomainError("optimal wealth flow is not invertible on an absorbed path");
    }
    return x / xhat;
}

RepresentationReport representation_check(const OptimalTriple& triple, const PowerUtility& u0,
                                          std::span<const double> x_grid) {
    if (std::abs(u0.alpha - triple.alpha) > 0.0) {
        throw DomainError("initial utility and optimal triple use different risk aversion");
    }
    RepresentationReport rep;
    const double tx0 = triple.Xstar.X(0, 0);
    const double ty0 = triple.Ystar.y0;
    for (std::size_t p = 0; p < triple.n_paths(); ++p) {
        for (std::size_t k = 0; k < triple.grid.n_points(); ++k) {
            const double xhat = triple.Xstar.X(p, k) / tx0;
            const double yhat = triple.Ystar.Y(p, k) / ty0;
            for (double x : x_grid) {
                const double lhs = u0.scale * triple.Zhat(p, k) * std::pow(x, -u0.alpha);
                const double x_inv = inverse_wealth_flow(triple, p, k, x);
                const double rhs = yhat * power_eval(u0, x_inv).u_x;
                rep.max_residual = std::max(rep.max_residual, std::abs(lhs - rhs) / lhs);
                rep.max_flow_inversion_error =
                    std::max(rep.max_flow_inversion_error, std::abs(xhat * x_inv - x) / x);
            }
        }
    }
    return rep;
}

}  // namespace forward_yield
