#pragma once

#include "forward_yield/stochastic_core.hpp"

#include <span>
#include <vector>

namespace forward_yield {

/// u(x) = K x^{1-alpha} / (1-alpha) with relative risk aversion alpha in (0,1).
struct PowerUtility {
    double alpha;
    double scale = 1.0;

    PowerUtility(double alpha, double scale = 1.0);
};

struct PowerValue {
    double u;
    double u_x;
    double u_xx;
};

struct ConjugateValue {
    double value;
    double derivative;
};

PowerValue power_eval(const PowerUtility& u, double x);

/// Closed-form conjugate: sup_x (u(x) - x y) and its y-derivative.
ConjugateValue power_conjugate(const PowerUtility& u, double y);

/// Brute-force conjugate of a utility sampled on a grid.
struct NumericConjugate {
    std::vector<double> x_grid;
    std::vector<double> y_grid;
    std::vector<double> values;
    /// Grid index of the maximising x for every y.
    std::vector<std::size_t> argmax;

    /// Discrete convexity/monotonicity check on the y grid.
    bool is_convex_decreasing(double tol = 1e-9) const;
};

/// n log-spaced points on [lo, hi].
std::vector<double> log_grid(double lo, double hi, std::size_t n);

/// max_i (u_i - x_i y) for every y. Throws DomainError when the samples are
/// not concave and nondecreasing in x.
NumericConjugate numeric_fenchel(std::span<const double> u_values,
                                 std::span<const double> x_grid,
                                 std::span<const double> y_grid);

/// inf_j (conj_j + x y_j): the primal function recovered from a sampled
/// conjugate.
std::vector<double> numeric_biconjugate(const NumericConjugate& conj,
                                        std::span<const double> x_grid);

/// U(t,x) = Zhat_t x^{1-alpha}/(1-alpha) and V(t,c) = psi_t^alpha U(t,c),
/// with Zhat stored per path on the simulation grid.
struct ProgressivePowerUtility {
    double alpha;
    PathMatrix Zhat;
    DeterministicFn psi_hat;
    TimeGrid grid;
};

struct ProgressiveValue {
    double U;
    double U_x;
    double U_xx;
    double V;
    double V_c;
    /// Conjugate of V evaluated at y = U_x.
    double V_conj;
};

/// Evaluates U, V and their marginals at x on path p, grid index k (for V
/// the argument is the consumption level c = x).
ProgressiveValue progressive_eval(const ProgressivePowerUtility& P, std::size_t p, std::size_t k,
                                  double x);

/// Conjugate of V(t, .) at y: psi_t Zhat_t^{1/alpha} u~(y), with derivative.
ConjugateValue progressive_conjugate_consumption(const ProgressivePowerUtility& P, std::size_t p,
                                                 std::size_t k, double y);

}  // namespace forward_yield
