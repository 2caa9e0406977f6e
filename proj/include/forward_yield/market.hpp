#pragma once

#include "forward_yield/stochastic_core.hpp"

#include <functional>
#include <optional>
#include <variant>

namespace forward_yield {

struct ConstantRate {
    double r = 0.0;
};

/// dr = a (b - r) dt - sigma_r dB with B = w_dir . W.
struct VasicekRate {
    double a = 1.0;
    double b = 0.0;
    double sigma_r = 0.0;
    double r0 = 0.0;
    Vec w_dir;
};

class ShortRateModel {
   public:
    static ShortRateModel constant(double r);
    static ShortRateModel vasicek(double a, double b, double sigma_r, double r0, Vec w_dir);

    bool is_vasicek() const { return std::holds_alternative<VasicekRate>(rep_); }
    const VasicekRate& vasicek_params() const;
    double r0() const;

    /// E[r_t] under the historical measure.
    double expected_short_rate(double t) const;
    /// E[int_t^{t+tau} r ds | r_t].
    double integrated_mean(double tau, double r_t) const;
    /// Var[int_t^{t+tau} r ds | r_t].
    double integrated_variance(double tau) const;

    /// Same dynamics started from r_t (used by nested simulation).
    ShortRateModel restarted_at(double r_t) const;

   private:
    explicit ShortRateModel(std::variant<ConstantRate, VasicekRate> rep) : rep_(std::move(rep)) {}
    std::variant<ConstantRate, VasicekRate> rep_;
};

/// The incomplete Ito market: short rate, minimal risk premium eta^R in R,
/// and the admissible portfolio subspace R.
struct MarketModel {
    std::size_t dim;
    ShortRateModel rate;
    DeterministicFn eta_R;
    SubspaceR R;

    /// Checks dimensions and proj_perp(eta_R(t_k)) = 0 on the grid.
    void validate(const TimeGrid& grid) const;
};

/// Short-rate paths and integrated rates int_0^{t_k} r ds, both
/// [n_paths x (n_steps + 1)].
struct RatePaths {
    PathMatrix r;
    PathMatrix int_r;
};

/// Exact Gaussian stepping of (r, int r) for the Vasicek model, conditional
/// on the step's Brownian increment along w_dir. The two conditional
/// residuals come from an auxiliary per-path stream.
class VasicekStepper {
   public:
    VasicekStepper(const VasicekRate& p, double dt);

    struct Step {
        double r_next;
        double integral;
    };

    Step step(double r, double dB, double z1, double z2) const;

   private:
    double a_, b_, sigma_, h_;
    double decay_, b1_;
    double c1_, c2_;
    double l11_, l21_, l22_;
};

RatePaths simulate_short_rate(const MarketModel& market, const TimeGrid& grid,
                              const BrownianBatch& batch);

/// Gamma_s(t) = (1 - exp(-a (t - s))) sigma_r / a.
double zc_volatility_vasicek(double a, double sigma_r, double s, double t);

struct StatePricePaths {
    PathMatrix Y;
    DeterministicFn nu;
    double y0;
};

enum class SubspaceCheck { enforce, skip };

/// Y^nu via the exact log scheme; nu must lie in R^perp unless the check is
/// skipped (used to build deliberately mis-specified densities).
StatePricePaths state_price_paths(const MarketModel& market, const TimeGrid& grid,
                                  const BrownianBatch& batch, const RatePaths& rates,
                                  const DeterministicFn& nu, double y0,
                                  SubspaceCheck check = SubspaceCheck::enforce);
StatePricePaths state_price_paths(const MarketModel& market, const TimeGrid& grid,
                                  const BrownianBatch& batch, const DeterministicFn& nu,
                                  double y0);

/// Proportional consumption c = psi(t) X, or an arbitrary rule c(t, x) >= 0.
class ConsumptionRule {
   public:
    static ConsumptionRule proportional(DeterministicFn psi);
    static ConsumptionRule none();
    static ConsumptionRule general(std::function<double(double, double)> c);

    bool is_proportional() const { return psi_.has_value(); }
    const DeterministicFn& psi() const { return *psi_; }
    double operator()(double t, double x) const;

   private:
    std::optional<DeterministicFn> psi_;
    std::function<double(double, double)> general_;
};

struct WealthPaths {
    PathMatrix X;
    /// Consumption rate at each grid point.
    PathMatrix c;
    DeterministicFn kappa;
    /// Fraction of paths that reached 0 before the horizon.
    double absorbed_fraction = 0.0;
};

WealthPaths wealth_paths(const MarketModel& market, const TimeGrid& grid,
                         const BrownianBatch& batch, const RatePaths& rates,
                         const DeterministicFn& kappa, const ConsumptionRule& c_rule, double x0);
WealthPaths wealth_paths(const MarketModel& market, const TimeGrid& grid,
                         const BrownianBatch& batch, const DeterministicFn& kappa,
                         const ConsumptionRule& c_rule, double x0);

/// Interval drifts of M_t = Y_t X_t + int_0^t Y_s c_s ds (trapezoidal
/// integral on the grid).
DriftReport local_martingale_drift_test(const StatePricePaths& Y, const WealthPaths& X,
                                        const TimeGrid& grid, double band = 4.0);

}  // namespace forward_yield
