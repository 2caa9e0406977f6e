#include "forward_yield/market.hpp"

#include "forward_yield/errors.hpp"

#include <cmath>
#include <sstream>

namespace forward_yield {

ShortRateModel ShortRateModel::constant(double r) {
    if (!std::isfinite(r)) {
        throw DomainError("constant short rate must be finite");
    }
    return ShortRateModel(ConstantRate{r});
}

ShortRateModel ShortRateModel::vasicek(double a, double b, double sigma_r, double r0, Vec w_dir) {
    if (!(a > 0.0)) {
        throw DomainError("Vasicek mean reversion a must be positive");
    }
    if (!(sigma_r >= 0.0)) {
        throw DomainError("Vasicek volatility sigma_r must be nonnegative");
    }
    if (w_dir.size() == 0 || std::abs(w_dir.norm() - 1.0) > 1e-12) {
        throw DomainError("Vasicek noise direction w_dir must be a unit vector");
    }
    return ShortRateModel(VasicekRate{a, b, sigma_r, r0, std::move(w_dir)});
}

const VasicekRate& ShortRateModel::vasicek_params() const {
    if (!is_vasicek()) {
        throw DomainError("short-rate model is not Vasicek");
    }
    return std::get<VasicekRate>(rep_);
}

double ShortRateModel::r0() const {
    if (const auto* c = std::get_if<ConstantRate>(&rep_)) {
        return c->r;
    }
    return std::get<VasicekRate>(rep_).r0;
}

double ShortRateModel::expected_short_rate(double t) const {
    if (const auto* c = std::get_if<ConstantRate>(&rep_)) {
        return c->r;
    }
    const auto& v = std::get<VasicekRate>(rep_);
    return v.b + (v.r0 - v.b) * std::exp(-v.a * t);
}

double ShortRateModel::integrated_mean(double tau, double r_t) const {
    if (const auto* c = std::get_if<ConstantRate>(&rep_)) {
        return c->r * tau;
    }
    const auto& v = std::get<VasicekRate>(rep_);
    const double B = -std::expm1(-v.a * tau) / v.a;
    return v.b * tau + (r_t - v.b) * B;
}

double ShortRateModel::integrated_variance(double tau) const {
    if (std::holds_alternative<ConstantRate>(rep_)) {
        return 0.0;
    }
    const auto& v = std::get<VasicekRate>(rep_);
    const double B = -std::expm1(-v.a * tau) / v.a;
    const double B2 = -std::expm1(-2.0 * v.a * tau) / (2.0 * v.a);
    return v.sigma_r * v.sigma_r / (v.a * v.a) * (tau - 2.0 * B + B2);
}

ShortRateModel ShortRateModel::restarted_at(double r_t) const {
    if (const auto* c = std::get_if<ConstantRate>(&rep_)) {
        return constant(c->r);
    }
    auto v = std::get<VasicekRate>(rep_);
    v.r0 = r_t;
    return ShortRateModel(std::move(v));
}

void MarketModel::validate(const TimeGrid& grid) const {
    if (dim == 0 || R.dim() != dim || eta_R.dim() != dim) {
        throw DomainError("market dimensions are inconsistent");
    }
    if (rate.is_vasicek() &&
        static_cast<std::size_t>(rate.vasicek_params().w_dir.size()) != dim) {
        throw DomainError("Vasicek noise direction has the wrong dimension");
    }
    for (std::size_t k = 0; k < grid.n_points(); ++k) {
        const Vec eta = eta_R(grid.time(k));
        if (!R.contains(eta)) {
            std::ostringstream msg;
            msg << "minimal risk premium eta_R has a component orthogonal to R at t = "
                << grid.time(k);
            throw SubspaceViolation(msg.str());
        }
    }
}

// ---------------------------------------------------------------------------

VasicekStepper::VasicekStepper(const VasicekRate& p, double dt)
    : a_(p.a), b_(p.b), sigma_(p.sigma_r), h_(dt) {
    const double a = a_;
    const double h = h_;
    decay_ = std::exp(-a * h);
    b1_ = -std::expm1(-a * h) / a;
    const double b2 = -std::expm1(-2.0 * a * h) / (2.0 * a);

    // Joint law of (dB, I1, I2) with I1 = int e^{-a(h-u)} dB_u and
    // I2 = int (1 - e^{-a(h-u)}) / a dB_u over one step.
    const double cov_b1 = b1_;
    const double cov_b2 = (h - b1_) / a;
    const double var1 = b2;
    const double var2 = (h - 2.0 * b1_ + b2) / (a * a);
    const double cov12 = (b1_ - b2) / a;

    c1_ = cov_b1 / h;
    c2_ = cov_b2 / h;
    const double v11 = var1 - cov_b1 * cov_b1 / h;
    const double v22 = var2 - cov_b2 * cov_b2 / h;
    const double v12 = cov12 - cov_b1 * cov_b2 / h;
    l11_ = v11 > 0.0 ? std::sqrt(v11) : 0.0;
    l21_ = l11_ > 0.0 ? v12 / l11_ : 0.0;
    const double rest = v22 - l21_ * l21_;
    l22_ = rest > 0.0 ? std::sqrt(rest) : 0.0;
}

VasicekStepper::Step VasicekStepper::step(double r, double dB, double z1, double z2) const {
    const double i1 = c1_ * dB + l11_ * z1;
    const double i2 = c2_ * dB + l21_ * z1 + l22_ * z2;
    const double r_next = r * decay_ + b_ * (1.0 - decay_) - sigma_ * i1;
    const double integral = r * b1_ + b_ * (h_ - b1_) - sigma_ * i2;
    return {r_next, integral};
}

RatePaths simulate_short_rate(const MarketModel& market, const TimeGrid& grid,
                              const BrownianBatch& batch) {
    if (batch.dim() != market.dim) {
        throw DomainError("brownian batch dimension differs from the market dimension");
    }
    if (batch.n_steps() != grid.n_steps()) {
        throw DomainError("brownian batch does not match the grid");
    }
    const std::size_t n = batch.n_paths();
    const std::size_t cols = grid.n_points();
    RatePaths out{PathMatrix(n, cols), PathMatrix(n, cols)};

    if (!market.rate.is_vasicek()) {
        const double r = market.rate.r0();
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t k = 0; k < cols; ++k) {
                out.r(p, k) = r;
                out.int_r(p, k) = r * grid.time(k);
            }
        }
        return out;
    }

    const auto& v = market.rate.vasicek_params();
    const VasicekStepper stepper(v, grid.dt());
    parallel_for(n, [&](std::size_t p) {
        auto rng = path_rng(batch.seed(), p, StreamTag::short_rate_bridge);
        std::normal_distribution<double> normal(0.0, 1.0);
        double r = v.r0;
        double acc = 0.0;
        out.r(p, 0) = r;
        out.int_r(p, 0) = 0.0;
        for (std::size_t k = 0; k < grid.n_steps(); ++k) {
            const double dB = dot(v.w_dir, batch.increment(p, k));
            const double z1 = normal(rng);
            const double z2 = normal(rng);
            const auto s = stepper.step(r, dB, z1, z2);
            r = s.r_next;
            acc += s.integral;
            out.r(p, k + 1) = r;
            out.int_r(p, k + 1) = acc;
        }
    });
    return out;
}

double zc_volatility_vasicek(double a, double sigma_r, double s, double t) {
    if (s > t) {
        throw DomainError("zero-coupon volatility needs s <= t");
    }
    if (!(a > 0.0)) {
        throw DomainError("Vasicek mean reversion a must be positive");
    }
    return -std::expm1(-a * (t - s)) * sigma_r / a;
}

// ---------------------------------------------------------------------------

StatePricePaths state_price_paths(const MarketModel& market, const TimeGrid& grid,
                                  const BrownianBatch& batch, const RatePaths& rates,
                                  const DeterministicFn& nu, double y0, SubspaceCheck check) {
    if (!(y0 > 0.0)) {
        throw DomainError("state price density needs y0 > 0");
    }
    if (nu.dim() != market.dim) {
        throw DomainError("nu has the wrong dimension");
    }
    const auto nu_k = nu.on_grid(grid);
    const auto eta_k = market.eta_R.on_grid(grid);
    if (check == SubspaceCheck::enforce) {
        for (std::size_t k = 0; k < grid.n_points(); ++k) {
            if (!market.R.orthogonal_to(nu_k[k])) {
                std::ostringstream msg;
                msg << "nu must lie in the orthogonal complement of R (violated at t = "
                    << grid.time(k) << ")";
                throw SubspaceViolation(msg.str());
            }
        }
    }
    std::vector<Vec> vol(grid.n_steps());
    std::vector<double> half_sq(grid.n_steps());
    for (std::size_t k = 0; k < grid.n_steps(); ++k) {
        vol[k] = nu_k[k] - eta_k[k];
        half_sq[k] = 0.5 * vol[k].squaredNorm() * grid.dt();
    }

    const std::size_t n = batch.n_paths();
    StatePricePaths out{PathMatrix(n, grid.n_points()), nu, y0};
    const double log_y0 = std::log(y0);
    parallel_for(n, [&](std::size_t p) {
        double log_y = log_y0;
        out.Y(p, 0) = y0;
        for (std::size_t k = 0; k < grid.n_steps(); ++k) {
            const double int_r = rates.int_r(p, k + 1) - rates.int_r(p, k);
            log_y += -int_r - half_sq[k] + dot(vol[k], batch.increment(p, k));
            out.Y(p, k + 1) = std::exp(log_y);
        }
    });
    return out;
}

StatePricePaths state_price_paths(const MarketModel& market, const TimeGrid& grid,
                                  const BrownianBatch& batch, const DeterministicFn& nu,
                                  double y0) {
    market.validate(grid);
    const auto rates = simulate_short_rate(market, grid, batch);
    return state_price_paths(market, grid, batch, rates, nu, y0);
}

// ---------------------------------------------------------------------------

ConsumptionRule ConsumptionRule::proportional(DeterministicFn psi) {
    if (psi.dim() != 1) {
        throw DomainError("consumption rate psi must be scalar");
    }
    ConsumptionRule c;
    c.psi_ = std::move(psi);
    return c;
}

ConsumptionRule ConsumptionRule::none() {
    return proportional(DeterministicFn::constant_scalar(0.0));
}

ConsumptionRule ConsumptionRule::general(std::function<double(double, double)> rule) {
    if (!rule) {
        throw DomainError("consumption rule is empty");
    }
    ConsumptionRule c;
    c.general_ = std::move(rule);
    return c;
}

double ConsumptionRule::operator()(double t, double x) const {
    if (psi_) {
        return psi_->scalar(t) * x;
    }
    return general_(t, x);
}

WealthPaths wealth_paths(const MarketModel& market, const TimeGrid& grid,
                         const BrownianBatch& batch, const RatePaths& rates,
                         const DeterministicFn& kappa, const ConsumptionRule& c_rule, double x0) {
    if (!(x0 >= 0.0)) {
        throw DomainError("initial wealth must be nonnegative");
    }
    if (kappa.dim() != market.dim) {
        throw DomainError("kappa has the wrong dimension");
    }
    const auto kappa_k = kappa.on_grid(grid);
    const auto eta_k = market.eta_R.on_grid(grid);
    for (std::size_t k = 0; k < grid.n_points(); ++k) {
        if (!market.R.contains(kappa_k[k])) {
            std::ostringstream msg;
            msg << "portfolio volatility kappa must lie in R (violated at t = " << grid.time(k)
                << ")";
            throw SubspaceViolation(msg.str());
        }
    }
    const double dt = grid.dt();
    const std::size_t n = batch.n_paths();
    WealthPaths out{PathMatrix(n, grid.n_points()), PathMatrix(n, grid.n_points()), kappa, 0.0};
    std::vector<char> absorbed(n, 0);

    if (c_rule.is_proportional()) {
        std::vector<double> drift(grid.n_steps());
        std::vector<double> psi(grid.n_points());
        for (std::size_t k = 0; k < grid.n_points(); ++k) {
            psi[k] = c_rule.psi().scalar(grid.time(k));
            if (psi[k] < 0.0) {
                throw DomainError("consumption rate psi must be nonnegative");
            }
        }
        for (std::size_t k = 0; k < grid.n_steps(); ++k) {
            drift[k] = (-psi[k] + kappa_k[k].dot(eta_k[k]) - 0.5 * kappa_k[k].squaredNorm()) * dt;
        }
        parallel_for(n, [&](std::size_t p) {
            if (x0 == 0.0) {
                absorbed[p] = 1;
                return;  // rows are zero-filled
            }
            double log_x = std::log(x0);
            out.X(p, 0) = x0;
            out.c(p, 0) = psi[0] * x0;
            for (std::size_t k = 0; k < grid.n_steps(); ++k) {
                const double int_r = rates.int_r(p, k + 1) - rates.int_r(p, k);
                log_x += int_r + drift[k] + dot(kappa_k[k], batch.increment(p, k));
                const double x = std::exp(log_x);
                out.X(p, k + 1) = x;
                out.c(p, k + 1) = psi[k + 1] * x;
            }
        });
    } else {
        parallel_for(n, [&](std::size_t p) {
            double x = x0;
            out.X(p, 0) = x;
            out.c(p, 0) = x > 0.0 ? c_rule(0.0, x) : 0.0;
            for (std::size_t k = 0; k < grid.n_steps(); ++k) {
                if (x <= 0.0) {
                    absorbed[p] = 1;
                    out.X(p, k + 1) = 0.0;
                    out.c(p, k + 1) = 0.0;
                    continue;
                }
                const double t = grid.time(k);
                const double c = c_rule(t, x);
                if (c < 0.0) {
                    throw DomainError("consumption rule returned a negative rate");
                }
                const double int_r = rates.int_r(p, k + 1) - rates.int_r(p, k);
                const auto dW = batch.increment(p, k);
                x += x * (int_r + dot(kappa_k[k], dW) + kappa_k[k].dot(eta_k[k]) * dt) - c * dt;
                if (x <= 0.0) {
                    x = 0.0;
                    absorbed[p] = 1;
                }
                out.X(p, k + 1) = x;
                out.c(p, k + 1) = x > 0.0 ? c_rule(grid.time(k + 1), x) : 0.0;
            }
        });
    }
    std::size_t hits = 0;
    for (char a : absorbed) {
        hits += a != 0 ? 1 : 0;
    }
    out.absorbed_fraction = static_cast<double>(hits) / static_cast<double>(n);
    return out;
}

WealthPaths wealth_paths(const MarketModel& market, const TimeGrid& grid,
                         const BrownianBatch& batch, const DeterministicFn& kappa,
                         const ConsumptionRule& c_rule, double x0) {
    market.validate(grid);
    const auto rates = simulate_short_rate(market, grid, batch);
    return wealth_paths(market, grid, batch, rates, kappa, c_rule, x0);
}

DriftReport local_martingale_drift_test(const StatePricePaths& Y, const WealthPaths& X,
                                        const TimeGrid& grid, double band) {
    const std::size_t n = Y.Y.n_paths();
    if (X.X.n_paths() != n || Y.Y.n_cols() != grid.n_points() ||
        X.X.n_cols() != grid.n_points()) {
        throw DomainError("state price and wealth paths do not share a batch and grid");
    }
    PathMatrix M(n, grid.n_points());
    const double half_dt = 0.5 * grid.dt();
    for (std::size_t p = 0; p < n; ++p) {
        double consumed = 0.0;
        M(p, 0) = Y.Y(p, 0) * X.X(p, 0);
        for (std::size_t k = 0; k < grid.n_steps(); ++k) {
            consumed += half_dt * (Y.Y(p, k) * X.c(p, k) + Y.Y(p, k + 1) * X.c(p, k + 1));
            M(p, k + 1) = Y.Y(p, k + 1) * X.X(p, k + 1) + consumed;
        }
    }
    return drift_report(M, grid, band);
}

}  // namespace forward_yield
