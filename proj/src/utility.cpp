#include "forward_yield/utility.hpp"

#include "forward_yield/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace forward_yield {

PowerUtility::PowerUtility(double alpha_, double scale_) : alpha(alpha_), scale(scale_) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw DomainError("risk aversion alpha must lie in (0,1)");
    }
    if (!(scale > 0.0)) {
        throw DomainError("utility scale K must be positive");
    }
}

PowerValue power_eval(const PowerUtility& u, double x) {
    if (!(x > 0.0)) {
        throw DomainError("power utility is evaluated at x > 0 only");
    }
    const double a = u.alpha;
    const double xm = std::pow(x, -a);
    return {u.scale * x * xm / (1.0 - a), u.scale * xm, -a * u.scale * xm / x};
}

ConjugateValue power_conjugate(const PowerUtility& u, double y) {
    if (!(y > 0.0)) {
        throw DomainError("conjugate utility is evaluated at y > 0 only");
    }
    const double a = u.alpha;
    // Maximiser x* = (y/K)^{-1/alpha}; the conjugate is u(x*) - x* y.
    const double x_star = std::pow(y / u.scale, -1.0 / a);
    const double value = std::pow(u.scale, 1.0 / a) * a / (1.0 - a) * std::pow(y, 1.0 - 1.0 / a);
    return {value, -x_star};
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
    if (!(lo > 0.0) || !(hi > lo) || n < 2) {
        throw DomainError("log grid needs 0 < lo < hi and at least two points");
    }
    std::vector<double> g(n);
    const double llo = std::log(lo);
    const double step = (std::log(hi) - llo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        g[i] = std::exp(llo + step * static_cast<double>(i));
    }
    g.front() = lo;
    g.back() = hi;
    return g;
}

NumericConjugate numeric_fenchel(std::span<const double> u_values,
                                 std::span<const double> x_grid,
                                 std::span<const double> y_grid) {
    if (u_values.size() != x_grid.size() || x_grid.size() < 3 || y_grid.empty()) {
        throw DomainError("numeric conjugate needs matching samples on at least three points");
    }
    double scale = 0.0;
    for (double v : u_values) {
        scale = std::max(scale, std::abs(v));
    }
    const double tol = 1e-12 * std::max(1.0, scale);
    double prev_slope = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < x_grid.size(); ++i) {
        const double dx = x_grid[i + 1] - x_grid[i];
        if (!(dx > 0.0)) {
            throw DomainError("x grid must be strictly increasing");
        }
        const double du = u_values[i + 1] - u_values[i];
        if (du < -tol) {
            throw DomainError("sampled utility is not nondecreasing");
        }
        const double slope = du / dx;
        if (slope > prev_slope + tol / dx) {
            throw DomainError("sampled utility is not concave");
        }
        prev_slope = slope;
    }

    NumericConjugate out;
    out.x_grid.assign(x_grid.begin(), x_grid.end());
    out.y_grid.assign(y_grid.begin(), y_grid.end());
    out.values.resize(y_grid.size());
    out.argmax.resize(y_grid.size());
    for (std::size_t j = 0; j < y_grid.size(); ++j) {
        const double y = y_grid[j];
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < x_grid.size(); ++i) {
            const double v = u_values[i] - x_grid[i] * y;
            if (v > best) {
                best = v;
                best_i = i;
            }
        }
        out.values[j] = best;
        out.argmax[j] = best_i;
    }
    return out;
}

bool NumericConjugate::is_convex_decreasing(double tol) const {
    double scale = 0.0;
    for (double v : values) {
        scale = std::max(scale, std::abs(v));
    }
    const double abs_tol = tol * std::max(1.0, scale);
    for (std::size_t j = 0; j + 1 < values.size(); ++j) {
        if (values[j + 1] - values[j] > abs_tol) {
            return false;
        }
    }
    for (std::size_t j = 1; j + 1 < values.size(); ++j) {
        const double s0 = (values[j] - values[j - 1]) / (y_grid[j] - y_grid[j - 1]);
        const double s1 = (values[j + 1] - values[j]) / (y_grid[j + 1] - y_grid[j]);
        if ((s1 - s0) * (y_grid[j + 1] - y_grid[j - 1]) < -abs_tol) {
            return false;
        }
    }
    return true;
}

std::vector<double> numeric_biconjugate(const NumericConjugate& conj,
                                        std::span<const double> x_grid) {
    std::vector<double> out(x_grid.size());
    for (std::size_t i = 0; i < x_grid.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < conj.y_grid.size(); ++j) {
            best = std::min(best, conj.values[j] + x_grid[i] * conj.y_grid[j]);
        }
        out[i] = best;
    }
    return out;
}

// ---------------------------------------------------------------------------

ProgressiveValue progressive_eval(const ProgressivePowerUtility& P, std::size_t p, std::size_t k,
                                  double x) {
    if (!(x > 0.0)) {
        throw DomainError("progressive utility is evaluated at x > 0 only");
    }
    if (p >= P.Zhat.n_paths() || k >= P.Zhat.n_cols()) {
        throw DomainError("path or time index outside the utility's simulation");
    }
    const double a = P.alpha;
    const double z = P.Zhat(p, k);
    const double psi = P.psi_hat.scalar(P.grid.time(k));
    const double xm = std::pow(x, -a);
    const double psi_a = std::pow(psi, a);

    ProgressiveValue v{};
    v.U = z * x * xm / (1.0 - a);
    v.U_x = z * xm;
    v.U_xx = -a * z * xm / x;
    v.V = psi_a * v.U;
    v.V_c = psi_a * v.U_x;
    v.V_conj = progressive_conjugate_consumption(P, p, k, v.U_x).value;
    return v;
}

ConjugateValue progressive_conjugate_consumption(const ProgressivePowerUtility& P, std::size_t p,
                                                 std::size_t k, double y) {
    if (!(y > 0.0)) {
        throw DomainError("conjugate utility is evaluated at y > 0 only");
    }
    const double a = P.alpha;
    const double z = P.Zhat(p, k);
    const double psi = P.psi_hat.scalar(P.grid.time(k));
    const double coeff = psi * std::pow(z, 1.0 / a);
    const double base = power_conjugate(PowerUtility(a), y).value;
    // d/dy of y^{1-1/alpha} alpha/(1-alpha) is -y^{-1/alpha}.
    return {coeff * base, -coeff * std::pow(y, -1.0 / a)};
}

}  // namespace forward_yield
