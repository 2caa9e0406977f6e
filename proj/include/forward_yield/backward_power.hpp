#pragma once

#include "forward_yield/forward_optimal.hpp"

#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace forward_yield {

/// Gamma_s(T) = (1 - exp(-a (T - s))) sigma_r / a along a unit direction in R^perp.
struct VasicekOrthogonalGamma {
    double a;
    double sigma_r;
    Vec dir_perp;
};

/// ||Gamma^R_s(T)||^2 = c_R (T - s), ||Gamma^perp_s(T)||^2 = c_perp (T - s).
struct SyntheticSqrtGamma {
    double c_R;
    double c_perp;
    Vec dir_R;
    Vec dir_perp;
};

enum class Extrapolation { flat, linear };

/// Gamma_s(T) = g(T - s) with g piecewise linear through (tau_i, values_i),
/// tau_0 = 0 and values_0 = 0.
struct CustomGamma {
    std::vector<double> taus;
    std::vector<Vec> values;
    Extrapolation extrapolation = Extrapolation::flat;
};

/// Zero-coupon bond volatility Gamma_s(T) of a Gaussian term structure.
class GammaModel {
   public:
    static GammaModel vasicek_orthogonal(double a, double sigma_r, Vec dir_perp);
    static GammaModel synthetic_sqrt(double c_R, double c_perp, Vec dir_R, Vec dir_perp);
    static GammaModel custom(std::vector<double> taus, std::vector<Vec> values,
                             Extrapolation extrapolation);
    /// Deterministic rates.
    static GammaModel zero(std::size_t dim);

    std::size_t dim() const { return dim_; }
    std::string kind() const;
    const std::variant<VasicekOrthogonalGamma, SyntheticSqrtGamma, CustomGamma>& rep() const {
        return rep_;
    }

    /// Gamma_s(T); zero when s >= T.
    Vec gamma(double s, double T) const;
    /// d/dT Gamma_s(T) for s < T.
    Vec dgamma_dT(double s, double T) const;

    /// Checks that the declared components lie in R resp. R^perp.
    void validate(const SubspaceR& R) const;

    /// lim_{T -> inf} ||Gamma^R_s(T)||^2 / (T - s) and the same for Gamma^perp.
    /// finite is false when the ratio diverges.
    struct Asymptotics {
        bool finite;
        double lim_R;
        double lim_perp;
    };
    Asymptotics asymptotics(const SubspaceR& R) const;

   private:
    GammaModel(std::size_t dim, std::variant<VasicekOrthogonalGamma, SyntheticSqrtGamma, CustomGamma> rep)
        : dim_(dim), rep_(std::move(rep)) {}
    std::size_t dim_;
    std::variant<VasicekOrthogonalGamma, SyntheticSqrtGamma, CustomGamma> rep_;
};

/// Time-0 curve input: m(t) = E[int_0^t r ds] and its derivative.
struct InitialCurve {
    std::function<double(double)> integrated;
    std::function<double(double)> forward;

    static InitialCurve flat(double rate);
};

struct BackwardSpec {
    double T_H;
    double alpha;
    GammaModel gamma;
    std::size_t dim;
    SubspaceR R;
    DeterministicFn eta_R;
    InitialCurve curve = InitialCurve::flat(0.0);

    void validate() const;
    /// Market view of this BackwardSpec (its short-rate field is unused: rates come
    /// from Gamma).
    MarketModel market() const;
};

struct BackwardVols {
    DeterministicFn nu_star;
    DeterministicFn kappa_star;
};

/// nu* = -(1-alpha) Gamma^perp(T_H), kappa* = (eta^R - (1-alpha) Gamma^R(T_H)) / alpha.
BackwardVols solve_backward_vols(const BackwardSpec& spec);

/// int_0^{t_k} r = m(t_k) - sum_{j<k} Gamma_{t_j}(t_k) . dW_j and
/// r_{t_k} = m'(t_k) - sum_{j<k} d_T Gamma_{t_j}(t_k) . dW_j.
RatePaths gaussian_rate_paths(const GammaModel& gamma, const InitialCurve& curve,
                              const TimeGrid& grid, const BrownianBatch& batch);

/// Optimal backward processes without consumption; vols default to the
/// solved ones.
OptimalTriple simulate_backward(const BackwardSpec& spec, const TimeGrid& grid,
                                const BrownianBatch& batch, double x0 = 1.0, double y0 = 1.0);
OptimalTriple simulate_backward(const BackwardSpec& spec, const BackwardVols& vols,
                                const TimeGrid& grid, const BrownianBatch& batch,
                                double x0 = 1.0, double y0 = 1.0);

struct TerminalConstraintReport {
    double mean;
    double coefficient_of_variation;
    double min;
    double max;
};

/// Dispersion of Y*_{T_H} (X*_{T_H})^alpha across paths. The grid must contain T_H.
TerminalConstraintReport terminal_constraint_check(const BackwardSpec& spec,
                                                   const TimeGrid& grid,
                                                   const BrownianBatch& batch);
/// Same check for a control solved with another horizon.
TerminalConstraintReport terminal_constraint_check(const BackwardSpec& spec,
                                                   const BackwardVols& vols,
                                                   const TimeGrid& grid,
                                                   const BrownianBatch& batch);

struct HorizonPair {
    double T_a;
    double T_b;
    /// max over paths of |X_a - X_b| / X_b at the common time.
    double x_gap;
    double y_gap;
    /// Same gaps predicted from volatility differences alone.
    double x_gap_predicted;
    double y_gap_predicted;
    /// max |simulated gap - predicted gap| over paths, divided by the largest
    /// predicted gap.
    double prediction_error;
};

struct HorizonReport {
    double common_time;
    std::vector<HorizonPair> pairs;
    double max_x_gap = 0.0;
    double max_y_gap = 0.0;
};

/// Simulates every spec on one batch and compares optimal wealth and
/// state price densities at common_time (on the grid, <= every T_H).
HorizonReport horizon_dependency_experiment(const std::vector<BackwardSpec>& specs,
                                            const TimeGrid& grid, const BrownianBatch& batch,
                                            double common_time);

}  // namespace forward_yield
