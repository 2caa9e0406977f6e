#pragma once

#include "forward_yield/backward_power.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace forward_yield {

enum class CurveMethod { ramsey_mc, marginal_mc, gaussian_closed, risk_neutral };

std::string to_string(CurveMethod m);

/// Continuously compounded yields R(T) = -ln B(T) / (T - asof).
struct YieldCurve {
    double asof = 0.0;
    std::vector<double> tenors;
    std::vector<double> rates;
    /// Standard errors of the rates (zero for closed forms).
    std::vector<double> std_errors;
    /// The prices the rates were built from.
    std::vector<double> prices;
    CurveMethod method = CurveMethod::gaussian_closed;
};

/// tenors are maturities T > asof.
YieldCurve curve_from_prices(std::span<const double> prices, std::span<const double> tenors,
                             double asof, CurveMethod method,
                             std::span<const double> price_std_errors = {});

// ---------------------------------------------------------------------------
// Ramsey rule

/// beta + alpha g - alpha (alpha + 1) sigma^2 / 2.
double ramsey_flat_closed(double beta, double alpha, double g, double sigma);

/// Consumption c_t = c0 exp((g - sigma^2/2) t + sigma B_t), exact on the grid.
PathMatrix gbm_consumption_paths(double c0, double g, double sigma, const TimeGrid& grid,
                                 std::uint64_t seed, std::size_t n_paths);

struct RamseyCurve {
    YieldCurve curve;
    /// max_i R_i - min_j R_j and the standard error of that difference from
    /// paired per-path influence functions.
    double spread = 0.0;
    double spread_std_error = 0.0;
};

/// R(T) = -(1/T) ln(mean[e^{-beta T} c_T^{-alpha}] / c_0^{-alpha}) for every
/// tenor on the grid; standard errors by the delta method.
RamseyCurve ramsey_rate_mc(double beta, double alpha, const PathMatrix& consumption,
                           const TimeGrid& grid, std::span<const double> tenors);

// ---------------------------------------------------------------------------
// Zero-coupon prices

/// B^u_0(T) = mean(Y*_T / Y*_0) with standard error.
Estimate marginal_zc_mc(const StatePricePaths& Y, const TimeGrid& grid, double T);

struct NestedOptions {
    std::size_t inner_paths = 1024;
    std::uint64_t seed = 0;
    /// Outer paths to price (all when empty).
    std::vector<std::size_t> outer_paths;
};

struct NestedPrice {
    std::size_t outer_path;
    double r_t;
    Estimate price;
};

/// B^u_t(T) per outer path for t > 0: the state (r_t) of every selected outer
/// path is restarted with an inner batch seeded from (seed, outer path).
std::vector<NestedPrice> marginal_zc_nested(const MarketModel& market, const DeterministicFn& nu,
                                            const RatePaths& outer_rates, const TimeGrid& grid,
                                            double t, double T, const NestedOptions& options);

/// E[Y_T / Y_t | r_t] in closed form for a Vasicek or constant short rate and
/// deterministic nu, eta.
double marginal_zc_gaussian(const MarketModel& market, const DeterministicFn& nu, double t,
                            double T, double r_t);
double marginal_zc_gaussian(const MarketModel& market, const DeterministicFn& nu, double T);

/// Time-0 price in a Gamma-driven market:
/// exp(-m(T) + 1/2 int ||Gamma_s(T)||^2 ds + int Gamma_s(T).(nu_s - eta_s) ds).
double marginal_zc_gaussian(const GammaModel& gamma, const InitialCurve& curve,
                            const DeterministicFn& nu, const DeterministicFn& eta, double T);

/// Risk-neutral price: the minimal density (nu = 0).
Estimate risk_neutral_zc_mc(const MarketModel& market, const TimeGrid& grid,
                            const BrownianBatch& batch, const RatePaths& rates, double T);
double risk_neutral_zc(const MarketModel& market, double T);

// ---------------------------------------------------------------------------
// HJM

struct HjmReport {
    std::vector<double> tenors;
    /// f_0(T) from central differences of ln B^u_0.
    std::vector<double> forward;
    /// E[r_T] rebuilt from f_0 and the drift identity.
    std::vector<double> reconstructed_mean_rate;
    /// E[r_T] of the rate model itself.
    std::vector<double> model_mean_rate;
    double max_abs_residual = 0.0;
};

/// Forward curve and short-rate reconstruction on tenors spaced by h <= 0.25
/// (coarser spacing is rejected).
HjmReport hjm_forward_rates(const GammaModel& gamma, const InitialCurve& curve,
                            const DeterministicFn& nu, const DeterministicFn& eta,
                            std::span<const double> tenors, double h = 0.25);
/// Same for a Vasicek or constant market (Gamma from the short-rate model).
HjmReport hjm_forward_rates(const MarketModel& market, const DeterministicFn& nu,
                            std::span<const double> tenors, double h = 0.25);

// ---------------------------------------------------------------------------
// Long rate

enum class LongRateMode { forward, backward };
enum class LongRateVerdict { constant, increasing, decreasing, infinite };

std::string to_string(LongRateVerdict v);

struct LongRateReport {
    LongRateVerdict verdict;
    /// dl/dt of the analytic path (constant in t for every model here).
    double slope = 0.0;
    std::vector<double> times;
    std::vector<double> levels;
    struct Proxy {
        double T;
        double t;
        double integrand;
    };
    /// Finite-maturity integrands ||Gamma_t(T)||^2 / (2 (T - t)) (forward) or
    /// their backward analogue.
    std::vector<Proxy> proxies;
};

/// l_t = l_0 + int_0^t lim_T (...) ds, evaluated from the analytic limits of the
/// Gamma model.
LongRateReport long_rate(const GammaModel& gamma, const SubspaceR& R, LongRateMode mode,
                         double alpha, std::span<const double> times, double l0 = 0.0,
                         std::span<const double> probes = {});

// ---------------------------------------------------------------------------
// Davis prices

struct PayoffState {
    double r;
    double int_r;
    double X;
    double Y;
};

using Payoff = std::function<double(const PayoffState&)>;

struct DavisPrice {
    double value;
    double std_error;
    /// Price per unit of payoff quantity (the estimator is linear).
    double per_unit;
};

/// mean(zeta_T Y*_T / Y*_t) over the batch, zeta evaluated on the state at T.
DavisPrice davis_price(const Payoff& payoff, const OptimalTriple& triple, double t, double T,
                       double quantity = 1.0);

struct CapitalizationCheck {
    DavisPrice at_T;
    DavisPrice at_T_H;
    /// Standard error of the per-path difference.
    double diff_std_error;
    double t_stat;
};

/// Prices zeta_T against Y*_T and zeta_T X*_{T_H} / X*_T against Y*_{T_H}
/// on the same paths.
CapitalizationCheck davis_capitalization_check(const Payoff& payoff,
                                               const OptimalTriple& triple, double T,
                                               double T_H);

// ---------------------------------------------------------------------------

/// max over paths and grid times of |V_c(t, c*_t) / V_c(0, c_0) - Y*_t / Y*_0|
/// relative to Y*_t / Y*_0.
double pathwise_ramsey_report(const OptimalTriple& triple,
                              const ProgressivePowerUtility& utility);

}  // namespace forward_yield
