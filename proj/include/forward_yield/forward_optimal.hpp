#pragma once

#include "forward_yield/market.hpp"
#include "forward_yield/utility.hpp"

#include <vector>

namespace forward_yield {

/// Characteristics of a consumption-consistent progressive power utility:
/// optimal portfolio volatility kappa* in R, optimal dual volatility nu* in
/// R^perp, and consumption per unit of wealth psi_hat > 0.
struct ForwardPowerSpec {
    double alpha;
    DeterministicFn kappa_star;
    DeterministicFn nu_star;
    DeterministicFn psi_hat;

    void validate(const MarketModel& market, const TimeGrid& grid) const;
};

/// Optimal wealth (unit initial wealth), optimal state price density (unit
/// initial condition) and Zhat = Y* Xhat*^alpha on one batch.
struct OptimalTriple {
    double alpha;
    TimeGrid grid;
    RatePaths rates;
    WealthPaths Xstar;
    StatePricePaths Ystar;
    PathMatrix Zhat;
    DeterministicFn psi_hat;

    std::size_t n_paths() const { return Zhat.n_paths(); }
    ProgressivePowerUtility utility() const;
};

OptimalTriple simulate_optimal(const ForwardPowerSpec& spec, const MarketModel& market,
                               const TimeGrid& grid, const BrownianBatch& batch,
                               double x0 = 1.0, double y0 = 1.0);

/// Builds the triple from already simulated wealth and density paths.
OptimalTriple assemble_triple(double alpha, const TimeGrid& grid, RatePaths rates,
                              WealthPaths X, StatePricePaths Y, DeterministicFn psi_hat);

// ---------------------------------------------------------------------------

struct FirstOrderReport {
    /// max |U_x(t, X*_t(x0)) - Y*_t(y0)| / U_x(t, X*_t(x0))
    double max_marginal_residual;
    /// max |V_c(t, c*_t) - Y*_t(y0)| / V_c(t, c*_t), over points with c* > 0
    double max_consumption_residual;
    /// y0 == U_x(0, x0) to 1e-12 relative
    bool initial_condition_consistent;
};

FirstOrderReport first_order_check(const OptimalTriple& triple,
                                   const ProgressivePowerUtility& utility, double x0, double y0);

// ---------------------------------------------------------------------------

/// Local characteristics (beta^Z, gamma^Z) of the coefficient process Zhat:
/// dZ = beta^Z dt + gamma^Z . dW.
struct PowerCharacteristics {
    double beta;
    Vec gamma;
};

PowerCharacteristics power_characteristics(const ForwardPowerSpec& spec,
                                           const MarketModel& market, double t, double zhat,
                                           double r);

struct HjbOptions {
    std::size_t n_times = 20;
    std::vector<double> x_grid;  // defaults to 20 log-spaced points on [0.05, 20]
    std::vector<std::size_t> paths = {0};
    /// Relative bump applied to beta^Z before evaluating the drift constraint.
    double beta_bump = 0.0;
};

struct HjbReport {
    /// max |beta - (HJB right-hand side)| / max(|beta|, |rhs|)
    double max_drift_residual = 0.0;
    /// max || x kappa_bar - (portfolio equation rhs) || / ||x kappa*|| scale
    double max_policy_residual = 0.0;
    /// max || kappa_bar(t,x) - kappa*(t) ||
    double max_kappa_error = 0.0;
    /// Conjugate-side drift constraint, relative.
    double max_dual_residual = 0.0;
    std::size_t n_nodes = 0;
};

HjbReport hjb_residual(const ForwardPowerSpec& spec, const OptimalTriple& triple,
                       const MarketModel& market, const HjbOptions& options = {});

// ---------------------------------------------------------------------------

struct Strategy {
    DeterministicFn kappa;
    ConsumptionRule consumption;
};

Strategy optimal_strategy(const ForwardPowerSpec& spec);
/// kappa* + eps * direction (direction must lie in R).
Strategy volatility_perturbation(const ForwardPowerSpec& spec, const Vec& direction, double eps);
/// Consumption factor * psi_hat * X with the optimal portfolio.
Strategy consumption_perturbation(const ForwardPowerSpec& spec, double factor);

/// Interval drifts of G_t = U(t, X_t) + int_0^t V(s, c_s) ds for the wealth
/// of the given strategy on the utility's own batch.
DriftReport consistency_drift_test(const ProgressivePowerUtility& utility,
                                   const MarketModel& market, const RatePaths& rates,
                                   const Strategy& strategy, const TimeGrid& grid,
                                   const BrownianBatch& batch, double x0 = 1.0,
                                   double band = 4.0);

// ---------------------------------------------------------------------------

struct RepresentationReport {
    /// max |U_x(t,x) - Y*_t(u_x((X*_t)^{-1}(x)))| / U_x(t,x)
    double max_residual = 0.0;
    /// max |X*_t((X*_t)^{-1}(x)) - x| / x
    double max_flow_inversion_error = 0.0;
};

RepresentationReport representation_check(const OptimalTriple& triple, const PowerUtility& u0,
                                          std::span<const double> x_grid);

/// Inverse of the (linear) optimal wealth flow x -> x Xhat*_t on path p.
double inverse_wealth_flow(const OptimalTriple& triple, std::size_t p, std::size_t k, double x);

}  // namespace forward_yield
