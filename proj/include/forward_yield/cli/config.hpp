#pragma once

#include "forward_yield/backward_power.hpp"
#include "forward_yield/forward_optimal.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace forward_yield::cli {

/// Invalid or missing configuration field; `field` is the dotted path.
class ConfigError : public std::runtime_error {
   public:
    ConfigError(std::string field, const std::string& message)
        : std::runtime_error(field + ": " + message), field_(std::move(field)), detail_(message) {}
    const std::string& field() const { return field_; }
    const std::string& detail() const { return detail_; }

   private:
    std::string field_;
    std::string detail_;
};

struct RateConfig {
    std::string model = "constant";  // constant | vasicek
    double r = 0.0;
    double a = 1.0;
    double b = 0.0;
    double sigma_r = 0.0;
    double r0 = 0.0;
    std::vector<double> w_dir;
};

struct MarketConfig {
    std::size_t dim = 1;
    /// Spanning vectors of R (orthonormalised on build).
    std::vector<std::vector<double>> subspace_basis;
    std::vector<double> eta_R;
    RateConfig rate;
};

struct GammaConfig {
    std::string model = "vasicek_orthogonal";  // vasicek_orthogonal | synthetic_sqrt | custom | zero
    double a = 1.0;
    double sigma_r = 0.0;
    double c_R = 0.0;
    double c_perp = 0.0;
    std::vector<double> dir_R;
    std::vector<double> dir_perp;
    std::vector<double> taus;
    std::vector<std::vector<double>> values;
    std::string extrapolation = "flat";
};

struct SpecConfig {
    std::string type = "forward";  // forward | backward
    double alpha = 0.5;
    std::vector<double> kappa_star;
    std::vector<double> nu_star;
    double psi_hat = 0.0;
    double T_H = 0.0;
    GammaConfig gamma;
    double flat_rate = 0.0;
};

struct SimulationConfig {
    double horizon = 1.0;
    std::size_t n_steps = 10;
    std::size_t n_paths = 10000;
    std::uint64_t seed = 0;
    std::size_t inner_paths = 1024;
};

struct OutputConfig {
    std::vector<double> tenors = {1.0, 2.0, 5.0, 10.0, 30.0};
    std::string path = "out";
    std::string format = "csv";
    /// Step used by the curve subcommands.
    double curve_dt = 0.25;
};

struct RamseyConfig {
    double beta = 0.01;
    double alpha = 0.5;
    double g = 0.02;
    double sigma = 0.1;
    double c0 = 1.0;
};

struct DavisConfig {
    std::string payoff = "zero_coupon";  // zero_coupon | call_on_wealth | wealth_power
    double strike = 1.0;
    double exponent = 1.0;
    double quantity = 1.0;
    double maturity = 1.0;
    std::optional<double> capitalize_to;
};

struct LongRateConfig {
    std::string mode = "forward";  // forward | backward
    std::vector<double> times = {0.0, 1.0, 2.0, 5.0, 10.0};
    std::vector<double> probes = {50.0, 100.0, 200.0};
    double l0 = 0.0;
};

struct VerifyConfig {
    double identity_tol = 1e-9;
    double hjb_tol = 1e-10;
    double band = 4.0;
    double perturbation_factor = 0.5;
    double consumption_delta = 0.5;
    std::size_t identity_paths = 1000;
};

struct HorizonConfig {
    std::vector<double> horizons = {10.0, 50.0};
    double common_time = 5.0;
};

struct ExperimentConfig {
    std::optional<MarketConfig> market;
    std::optional<SpecConfig> spec;
    SimulationConfig simulation;
    OutputConfig output;
    std::optional<RamseyConfig> ramsey;
    std::optional<DavisConfig> davis;
    std::optional<LongRateConfig> long_rate;
    VerifyConfig verify;
    std::optional<HorizonConfig> horizon;
};

/// Parses and domain-checks a JSON configuration (comments allowed). Throws
/// ConfigError naming the offending field.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path, std::string* raw_text = nullptr);

const MarketConfig& require_market(const ExperimentConfig& cfg);
const SpecConfig& require_spec(const ExperimentConfig& cfg, const std::string& type);

MarketModel build_market(const MarketConfig& m);
ForwardPowerSpec build_forward_spec(const SpecConfig& s, std::size_t dim);
BackwardSpec build_backward_spec(const SpecConfig& s, const MarketConfig& m, double T_H);
GammaModel build_gamma(const GammaConfig& g, std::size_t dim);

}  // namespace forward_yield::cli
