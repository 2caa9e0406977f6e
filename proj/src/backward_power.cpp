#include "forward_yield/backward_power.hpp"

#include "forward_yield/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace forward_yield {

namespace {

void require_unit(const Vec& v, std::size_t dim, const char* what) {
    if (static_cast<std::size_t>(v.size()) != dim || std::abs(v.norm() - 1.0) > 1e-12) {
        throw DomainError(std::string(what) + " must be a unit vector of the market dimension");
    }
}

struct CustomEval {
    Vec value;
    Vec slope;
};

CustomEval eval_custom(const CustomGamma& c, double tau) {
    const auto& t = c.taus;
    const std::size_t n = t.size();
    if (tau >= t.back()) {
        const Vec last_slope = (c.values[n - 1] - c.values[n - 2]) / (t[n - 1] - t[n - 2]);
        if (c.extrapolation == Extrapolation::flat) {
            return {c.values.back(), Vec::Zero(last_slope.size())};
        }
        return {c.values.back() + (tau - t.back()) * last_slope, last_slope};
    }
    // First knot strictly above tau; tau lies in [t[i-1], t[i]).
    const auto it = std::upper_bound(t.begin(), t.end(), tau);
    const std::size_t i = static_cast<std::size_t>(it - t.begin());
    const double w = (tau - t[i - 1]) / (t[i] - t[i - 1]);
    const Vec slope = (c.values[i] - c.values[i - 1]) / (t[i] - t[i - 1]);
    return {(1.0 - w) * c.values[i - 1] + w * c.values[i], slope};
}

}  // namespace

GammaModel GammaModel::vasicek_orthogonal(double a, double sigma_r, Vec dir_perp) {
    if (!(a > 0.0)) {
        throw DomainError("Gamma model mean reversion a must be positive");
    }
    if (!(sigma_r >= 0.0)) {
        throw DomainError("Gamma model sigma_r must be nonnegative");
    }
    const std::size_t dim = static_cast<std::size_t>(dir_perp.size());
    require_unit(dir_perp, dim, "dir_perp");
    return GammaModel(dim, VasicekOrthogonalGamma{a, sigma_r, std::move(dir_perp)});
}

GammaModel GammaModel::synthetic_sqrt(double c_R, double c_perp, Vec dir_R, Vec dir_perp) {
    if (!(c_R >= 0.0) || !(c_perp >= 0.0)) {
        throw DomainError("c_R and c_perp must be nonnegative");
    }
    const std::size_t dim = static_cast<std::size_t>(dir_R.size());
    require_unit(dir_R, dim, "dir_R");
    require_unit(dir_perp, dim, "dir_perp");
    return GammaModel(dim, SyntheticSqrtGamma{c_R, c_perp, std::move(dir_R), std::move(dir_perp)});
}

GammaModel GammaModel::custom(std::vector<double> taus, std::vector<Vec> values,
                              Extrapolation extrapolation) {
    if (taus.size() < 2 || taus.size() != values.size()) {
        throw DomainError("custom Gamma table needs at least two (tau, value) rows");
    }
    if (taus.front() != 0.0) {
        throw DomainError("custom Gamma table must start at tau = 0");
    }
    const std::size_t dim = static_cast<std::size_t>(values.front().size());
    if (dim == 0 || values.front().norm() != 0.0) {
        throw DomainError("custom Gamma table must vanish at tau = 0");
    }
    for (std::size_t i = 1; i < taus.size(); ++i) {
        if (!(taus[i] > taus[i - 1])) {
            throw DomainError("custom Gamma taus must be strictly increasing");
        }
        if (static_cast<std::size_t>(values[i].size()) != dim) {
            throw DomainError("custom Gamma rows have inconsistent dimension");
        }
    }
    return GammaModel(dim, CustomGamma{std::move(taus), std::move(values), extrapolation});
}

GammaModel GammaModel::zero(std::size_t dim) {
    if (dim == 0) {
        throw DomainError("Gamma model dimension must be positive");
    }
    return custom({0.0, 1.0}, {Vec::Zero(dim), Vec::Zero(dim)}, Extrapolation::flat);
}

std::string GammaModel::kind() const {
    if (std::holds_alternative<VasicekOrthogonalGamma>(rep_)) {
        return "vasicek_orthogonal";
    }
    if (std::holds_alternative<SyntheticSqrtGamma>(rep_)) {
        return "synthetic_sqrt";
    }
    return "custom";
}

Vec GammaModel::gamma(double s, double T) const {
    if (s >= T) {
        return Vec::Zero(dim_);
    }
    const double tau = T - s;
    if (const auto* v = std::get_if<VasicekOrthogonalGamma>(&rep_)) {
        return (-std::expm1(-v->a * tau) * v->sigma_r / v->a) * v->dir_perp;
    }
    if (const auto* q = std::get_if<SyntheticSqrtGamma>(&rep_)) {
        return std::sqrt(q->c_R * tau) * q->dir_R + std::sqrt(q->c_perp * tau) * q->dir_perp;
    }
    return eval_custom(std::get<CustomGamma>(rep_), tau).value;
}

Vec GammaModel::dgamma_dT(double s, double T) const {
    if (s >= T) {
        throw DomainError("d Gamma / dT is evaluated for s < T only");
    }
    const double tau = T - s;
    if (const auto* v = std::get_if<VasicekOrthogonalGamma>(&rep_)) {
        return (v->sigma_r * std::exp(-v->a * tau)) * v->dir_perp;
    }
    if (const auto* q = std::get_if<SyntheticSqrtGamma>(&rep_)) {
        return 0.5 * std::sqrt(q->c_R / tau) * q->dir_R +
               0.5 * std::sqrt(q->c_perp / tau) * q->dir_perp;
    }
    return eval_custom(std::get<CustomGamma>(rep_), tau).slope;
}

void GammaModel::validate(const SubspaceR& R) const {
    if (R.dim() != dim_) {
        throw DomainError("Gamma model and subspace dimensions differ");
    }
    if (const auto* v = std::get_if<VasicekOrthogonalGamma>(&rep_)) {
        if (!R.orthogonal_to(v->dir_perp)) {
            throw SubspaceViolation("Vasicek Gamma direction must lie in R^perp");
        }
    } else if (const auto* q = std::get_if<SyntheticSqrtGamma>(&rep_)) {
        if (q->c_R > 0.0 && !R.contains(q->dir_R)) {
            throw SubspaceViolation("synthetic Gamma dir_R must lie in R");
        }
        if (q->c_perp > 0.0 && !R.orthogonal_to(q->dir_perp)) {
            throw SubspaceViolation("synthetic Gamma dir_perp must lie in R^perp");
        }
    }
}

GammaModel::Asymptotics GammaModel::asymptotics(const SubspaceR& R) const {
    validate(R);
    if (std::holds_alternative<VasicekOrthogonalGamma>(rep_)) {
        return {true, 0.0, 0.0};
    }
    if (const auto* q = std::get_if<SyntheticSqrtGamma>(&rep_)) {
        return {true, q->c_R, q->c_perp};
    }
    const auto& c = std::get<CustomGamma>(rep_);
    if (c.extrapolation == Extrapolation::flat) {
        return {true, 0.0, 0.0};
    }
    const Vec slope = eval_custom(c, c.taus.back()).slope;
    if (slope.norm() == 0.0) {
        return {true, 0.0, 0.0};
    }
    return {false, 0.0, 0.0};
}

// ---------------------------------------------------------------------------

InitialCurve InitialCurve::flat(double rate) {
    return {[rate](double t) { return rate * t; }, [rate](double) { return rate; }};
}

void BackwardSpec::validate() const {
    if (!(T_H > 0.0)) {
        throw DomainError("horizon T_H must be positive");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw DomainError("risk aversion alpha must lie in (0,1)");
    }
    if (gamma.dim() != dim || R.dim() != dim || eta_R.dim() != dim) {
        throw DomainError("backward spec dimensions are inconsistent");
    }
    if (!curve.integrated || !curve.forward) {
        throw DomainError("backward spec needs an initial curve");
    }
    gamma.validate(R);
}

MarketModel BackwardSpec::market() const {
    return MarketModel{dim, ShortRateModel::constant(0.0), eta_R, R};
}

BackwardVols solve_backward_vols(const BackwardSpec& spec) {
    spec.validate();
    const double a = spec.alpha;
    const double T_H = spec.T_H;
    const auto gamma = spec.gamma;
    const auto R = spec.R;
    const auto eta = spec.eta_R;
    auto nu = DeterministicFn::closed_form(
        "backward nu*", spec.dim, [=](double t) -> Vec {
            return -(1.0 - a) * R.proj_perp(gamma.gamma(t, T_H));
        });
    auto kappa = DeterministicFn::closed_form(
        "backward kappa*", spec.dim, [=](double t) -> Vec {
            return (eta(t) - (1.0 - a) * R.proj_R(gamma.gamma(t, T_H))) / a;
        });
    return {std::move(nu), std::move(kappa)};
}

RatePaths gaussian_rate_paths(const GammaModel& gamma, const InitialCurve& curve,
                              const TimeGrid& grid, const BrownianBatch& batch) {
    if (batch.dim() != gamma.dim() || batch.n_steps() != grid.n_steps()) {
        throw DomainError("brownian batch does not match the Gamma model and grid");
    }
    const std::size_t n_steps = grid.n_steps();
    const std::size_t d = gamma.dim();
    const double dt = grid.dt();

    // Every model is a function of T - s, so one table per lag suffices.
    std::vector<double> g((n_steps + 1) * d, 0.0);
    std::vector<double> dg((n_steps + 1) * d, 0.0);
    for (std::size_t lag = 1; lag <= n_steps; ++lag) {
        const double tau = static_cast<double>(lag) * dt;
        const Vec v = gamma.gamma(0.0, tau);
        const Vec dv = gamma.dgamma_dT(0.0, tau);
        for (std::size_t i = 0; i < d; ++i) {
            g[lag * d + i] = v[i];
            dg[lag * d + i] = dv[i];
        }
    }
    std::vector<double> m(grid.n_points());
    std::vector<double> f(grid.n_points());
    for (std::size_t k = 0; k < grid.n_points(); ++k) {
        m[k] = curve.integrated(grid.time(k));
        f[k] = curve.forward(grid.time(k));
    }

    const std::size_t n = batch.n_paths();
    RatePaths out{PathMatrix(n, grid.n_points()), PathMatrix(n, grid.n_points())};
    parallel_for(n, [&](std::size_t p) {
        for (std::size_t k = 0; k < grid.n_points(); ++k) {
            double s_int = 0.0;
            double s_rate = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                const auto dW = batch.increment(p, j);
                const std::size_t lag = k - j;
                for (std::size_t i = 0; i < d; ++i) {
                    s_int += g[lag * d + i] * dW[i];
                    s_rate += dg[lag * d + i] * dW[i];
                }
            }
            out.int_r(p, k) = m[k] - s_int;
            out.r(p, k) = f[k] - s_rate;
        }
    });
    return out;
}

OptimalTriple simulate_backward(const BackwardSpec& spec, const BackwardVols& vols,
                                const TimeGrid& grid, const BrownianBatch& batch, double x0,
                                double y0) {
    spec.validate();
    const auto market = spec.market();
    market.validate(grid);
    auto rates = gaussian_rate_paths(spec.gamma, spec.curve, grid, batch);
    auto X = wealth_paths(market, grid, batch, rates, vols.kappa_star, ConsumptionRule::none(),
                          x0);
    auto Y = state_price_paths(market, grid, batch, rates, vols.nu_star, y0);
    return assemble_triple(spec.alpha, grid, std::move(rates), std::move(X), std::move(Y),
                           DeterministicFn::constant_scalar(0.0));
}

OptimalTriple simulate_backward(const BackwardSpec& spec, const TimeGrid& grid,
                                const BrownianBatch& batch, double x0, double y0) {
    return simulate_backward(spec, solve_backward_vols(spec), grid, batch, x0, y0);
}

TerminalConstraintReport terminal_constraint_check(const BackwardSpec& spec,
                                                   const BackwardVols& vols,
                                                   const TimeGrid& grid,
                                                   const BrownianBatch& batch) {
    if (!grid.contains(spec.T_H)) {
        std::ostringstream msg;
        msg << "terminal constraint check needs T_H = " << spec.T_H << " on the grid";
        throw DomainError(msg.str());
    }
    const std::size_t kH = grid.index_of(spec.T_H);
    const auto triple = simulate_backward(spec, vols, grid, batch);
    const auto z = triple.Zhat.column(kH);
    const auto est = mean_stderr(z);
    const double sd = est.std_error * std::sqrt(static_cast<double>(z.size()));
    const auto [lo, hi] = std::minmax_element(z.begin(), z.end());
    return {est.mean, sd / std::abs(est.mean), *lo, *hi};
}

TerminalConstraintReport terminal_constraint_check(const BackwardSpec& spec,
                                                   const TimeGrid& grid,
                                                   const BrownianBatch& batch) {
    return terminal_constraint_check(spec, solve_backward_vols(spec), grid, batch);
}

// ---------------------------------------------------------------------------

HorizonReport horizon_dependency_experiment(const std::vector<BackwardSpec>& specs,
                                            const TimeGrid& grid, const BrownianBatch& batch,
                                            double common_time) {
    if (specs.size() < 2) {
        throw DomainError("horizon experiment needs at least two horizons");
    }
    for (const auto& s : specs) {
        if (s.T_H < common_time) {
            throw DomainError("common time must not exceed any horizon T_H");
        }
        if (s.gamma.kind() != specs.front().gamma.kind() || s.dim != specs.front().dim) {
            throw DomainError("horizon experiment specs must share one market");
        }
    }
    const std::size_t kc = grid.index_of(common_time);
    const double dt = grid.dt();

    std::vector<OptimalTriple> triples;
    std::vector<BackwardVols> vols;
    for (const auto& s : specs) {
        vols.push_back(solve_backward_vols(s));
        triples.push_back(simulate_backward(s, vols.back(), grid, batch));
    }
    const auto eta = specs.front().eta_R.on_grid(grid);

    HorizonReport rep{common_time, {}, 0.0, 0.0};
    const std::size_t n = batch.n_paths();
    for (std::size_t a = 0; a < specs.size(); ++a) {
        for (std::size_t b = a + 1; b < specs.size(); ++b) {
            const auto ka = vols[a].kappa_star.on_grid(grid);
            const auto kb = vols[b].kappa_star.on_grid(grid);
            const auto na = vols[a].nu_star.on_grid(grid);
            const auto nb = vols[b].nu_star.on_grid(grid);

            HorizonPair pr{specs[a].T_H, specs[b].T_H, 0.0, 0.0, 0.0, 0.0, 0.0};
            double abs_err = 0.0;
            for (std::size_t p = 0; p < n; ++p) {
                double dx = 0.0;
                double dy = 0.0;
                for (std::size_t j = 0; j < kc; ++j) {
                    const auto dW = batch.increment(p, j);
                    const Vec dk = ka[j] - kb[j];
                    const Vec dn = na[j] - nb[j];
                    dx += dot(dk, dW) +
                          (dk.dot(eta[j]) - 0.5 * (ka[j].squaredNorm() - kb[j].squaredNorm())) * dt;
                    dy += dot(dn, dW) - 0.5 *
                                            ((na[j] - eta[j]).squaredNorm() -
                                             (nb[j] - eta[j]).squaredNorm()) *
                                            dt;
                }
                const double xa = triples[a].Xstar.X(p, kc);
                const double xb = triples[b].Xstar.X(p, kc);
                const double ya = triples[a].Ystar.Y(p, kc);
                const double yb = triples[b].Ystar.Y(p, kc);
                const double gx = std::abs(xa - xb) / xb;
                const double gy = std::abs(ya - yb) / yb;
                const double px = std::abs(std::expm1(dx));
                const double py = std::abs(std::expm1(dy));
                pr.x_gap = std::max(pr.x_gap, gx);
                pr.y_gap = std::max(pr.y_gap, gy);
                pr.x_gap_predicted = std::max(pr.x_gap_predicted, px);
                pr.y_gap_predicted = std::max(pr.y_gap_predicted, py);
                abs_err = std::max({abs_err, std::abs(gx - px), std::abs(gy - py)});
            }
            const double scale = std::max({pr.x_gap_predicted, pr.y_gap_predicted, 1e-300});
            pr.prediction_error = abs_err / scale;
            rep.max_x_gap = std::max(rep.max_x_gap, pr.x_gap);
            rep.max_y_gap = std::max(rep.max_y_gap, pr.y_gap);
            rep.pairs.push_back(pr);
        }
    }
    return rep;
}

}  // namespace forward_yield
