#include "forward_yield/cli/config.hpp"

#include "forward_yield/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace forward_yield::cli {

namespace {

using nlohmann::json;

/// Typed access to one JSON object with dotted field names in errors.
class Block {
   public:
    Block(const json& j, std::string path, std::set<std::string> allowed)
        : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) {
            throw ConfigError(path_, "must be an object");
        }
        for (const auto& [key, _] : j_.items()) {
            if (!allowed.count(key)) {
                throw ConfigError(field(key), "unknown field");
            }
        }
    }

    std::string field(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }
    bool has(const std::string& key) const { return j_.contains(key); }
    const json& raw(const std::string& key) const { return j_.at(key); }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) const {
        if (!has(key)) {
            if (fallback) {
                return *fallback;
            }
            throw ConfigError(field(key), "required number is missing");
        }
        const auto& v = j_.at(key);
        if (!v.is_number()) {
            throw ConfigError(field(key), "must be a number");
        }
        const double x = v.get<double>();
        if (!std::isfinite(x)) {
            throw ConfigError(field(key), "must be finite");
        }
        return x;
    }

    std::uint64_t count(const std::string& key, std::optional<std::uint64_t> fallback) const {
        if (!has(key)) {
            if (fallback) {
                return *fallback;
            }
            throw ConfigError(field(key), "required integer is missing");
        }
        const auto& v = j_.at(key);
        if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0)) {
            throw ConfigError(field(key), "must be a nonnegative integer");
        }
        return v.get<std::uint64_t>();
    }

    std::string text(const std::string& key, std::optional<std::string> fallback,
                     const std::set<std::string>& choices = {}) const {
        std::string s;
        if (!has(key)) {
            if (!fallback) {
                throw ConfigError(field(key), "required string is missing");
            }
            s = *fallback;
        } else {
            if (!j_.at(key).is_string()) {
                throw ConfigError(field(key), "must be a string");
            }
            s = j_.at(key).get<std::string>();
        }
        if (!choices.empty() && !choices.count(s)) {
            std::string list;
            for (const auto& c : choices) {
                list += (list.empty() ? "" : " | ") + c;
            }
            throw ConfigError(field(key), "must be one of " + list + " (got \"" + s + "\")");
        }
        return s;
    }

    std::vector<double> numbers(const std::string& key,
                                std::optional<std::vector<double>> fallback = std::nullopt) const {
        if (!has(key)) {
            if (fallback) {
                return *fallback;
            }
            throw ConfigError(field(key), "required array is missing");
        }
        return as_numbers(j_.at(key), field(key));
    }

    std::vector<std::vector<double>> matrix(const std::string& key) const {
        if (!has(key)) {
            return {};
        }
        const auto& v = j_.at(key);
        if (!v.is_array()) {
            throw ConfigError(field(key), "must be an array of arrays");
        }
        std::vector<std::vector<double>> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            out.push_back(as_numbers(v[i], field(key) + "[" + std::to_string(i) + "]"));
        }
        return out;
    }

    static std::vector<double> as_numbers(const json& v, const std::string& where) {
        if (!v.is_array()) {
            throw ConfigError(where, "must be an array of numbers");
        }
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number() || !std::isfinite(e.get<double>())) {
                throw ConfigError(where, "must contain finite numbers only");
            }
            out.push_back(e.get<double>());
        }
        return out;
    }

   private:
    const json& j_;
    std::string path_;
};

void require(bool ok, const std::string& field, const std::string& message) {
    if (!ok) {
        throw ConfigError(field, message);
    }
}

void require_dim(const std::vector<double>& v, std::size_t dim, const std::string& field) {
    require(v.size() == dim, field,
            "must have " + std::to_string(dim) + " entries (got " + std::to_string(v.size()) + ")");
}

void require_alpha(double alpha, const std::string& field) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        std::ostringstream msg;
        msg << "risk aversion must lie in the open interval (0,1) (got " << alpha << ")";
        throw ConfigError(field, msg.str());
    }
}

void require_increasing_positive(const std::vector<double>& v, const std::string& field) {
    require(!v.empty(), field, "must not be empty");
    for (std::size_t i = 0; i < v.size(); ++i) {
        require(v[i] > 0.0, field, "entries must be positive");
        require(i == 0 || v[i] > v[i - 1], field, "entries must be strictly increasing");
    }
}

Vec to_vec(const std::vector<double>& v) {
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

MarketConfig parse_market(const json& j) {
    Block b(j, "market", {"dim", "subspace_basis", "eta_R", "rate"});
    MarketConfig m;
    const auto dim = b.count("dim", std::nullopt);
    require(dim >= 1, "market.dim", "must be at least 1");
    m.dim = dim;
    m.subspace_basis = b.matrix("subspace_basis");
    for (std::size_t i = 0; i < m.subspace_basis.size(); ++i) {
        require_dim(m.subspace_basis[i], dim, "market.subspace_basis[" + std::to_string(i) + "]");
    }
    m.eta_R = b.numbers("eta_R", std::vector<double>(dim, 0.0));
    require_dim(m.eta_R, dim, "market.eta_R");
    if (b.has("rate")) {
        Block r(b.raw("rate"), "market.rate",
                {"model", "r", "a", "b", "sigma_r", "r0", "w_dir"});
        m.rate.model = r.text("model", std::string("constant"), {"constant", "vasicek"});
        if (m.rate.model == "constant") {
            m.rate.r = r.number("r", 0.0);
        } else {
            m.rate.a = r.number("a");
            require(m.rate.a > 0.0, "market.rate.a", "mean reversion must be positive");
            m.rate.b = r.number("b");
            m.rate.sigma_r = r.number("sigma_r");
            require(m.rate.sigma_r >= 0.0, "market.rate.sigma_r", "must be nonnegative");
            m.rate.r0 = r.number("r0");
            m.rate.w_dir = r.numbers("w_dir");
            require_dim(m.rate.w_dir, dim, "market.rate.w_dir");
            require(std::abs(to_vec(m.rate.w_dir).norm() - 1.0) <= 1e-12, "market.rate.w_dir",
                    "must be a unit vector");
        }
    }
    return m;
}

GammaConfig parse_gamma(const json& j, std::size_t dim) {
    Block b(j, "spec.gamma",
            {"model", "a", "sigma_r", "c_R", "c_perp", "dir_R", "dir_perp", "taus", "values",
             "extrapolation"});
    GammaConfig g;
    g.model = b.text("model", std::nullopt,
                     {"vasicek_orthogonal", "synthetic_sqrt", "custom", "zero"});
    if (g.model == "vasicek_orthogonal") {
        g.a = b.number("a");
        require(g.a > 0.0, "spec.gamma.a", "mean reversion must be positive");
        g.sigma_r = b.number("sigma_r");
        require(g.sigma_r >= 0.0, "spec.gamma.sigma_r", "must be nonnegative");
        g.dir_perp = b.numbers("dir_perp");
        require_dim(g.dir_perp, dim, "spec.gamma.dir_perp");
    } else if (g.model == "synthetic_sqrt") {
        g.c_R = b.number("c_R", 0.0);
        g.c_perp = b.number("c_perp", 0.0);
        require(g.c_R >= 0.0, "spec.gamma.c_R", "must be nonnegative");
        require(g.c_perp >= 0.0, "spec.gamma.c_perp", "must be nonnegative");
        g.dir_R = b.numbers("dir_R");
        g.dir_perp = b.numbers("dir_perp");
        require_dim(g.dir_R, dim, "spec.gamma.dir_R");
        require_dim(g.dir_perp, dim, "spec.gamma.dir_perp");
    } else if (g.model == "custom") {
        g.taus = b.numbers("taus");
        g.values = b.matrix("values");
        require(g.taus.size() == g.values.size() && g.taus.size() >= 2, "spec.gamma.values",
                "needs one row per tau and at least two rows");
        for (std::size_t i = 0; i < g.values.size(); ++i) {
            require_dim(g.values[i], dim, "spec.gamma.values[" + std::to_string(i) + "]");
        }
        g.extrapolation = b.text("extrapolation", std::string("flat"), {"flat", "linear"});
    }
    return g;
}

SpecConfig parse_spec(const json& j, std::size_t dim) {
    Block b(j, "spec",
            {"type", "alpha", "kappa_star", "nu_star", "psi_hat", "T_H", "gamma",
             "initial_curve"});
    SpecConfig s;
    s.type = b.text("type", std::nullopt, {"forward", "backward"});
    s.alpha = b.number("alpha");
    require_alpha(s.alpha, "spec.alpha");
    if (s.type == "forward") {
        s.kappa_star = b.numbers("kappa_star", std::vector<double>(dim, 0.0));
        s.nu_star = b.numbers("nu_star", std::vector<double>(dim, 0.0));
        require_dim(s.kappa_star, dim, "spec.kappa_star");
        require_dim(s.nu_star, dim, "spec.nu_star");
        s.psi_hat = b.number("psi_hat", 0.0);
        require(s.psi_hat >= 0.0, "spec.psi_hat", "consumption rate must be nonnegative");
    } else {
        s.T_H = b.number("T_H");
        require(s.T_H > 0.0, "spec.T_H", "horizon must be positive");
        require(b.has("gamma"), "spec.gamma", "backward spec needs a Gamma model");
        s.gamma = parse_gamma(b.raw("gamma"), dim);
        if (b.has("initial_curve")) {
            Block c(b.raw("initial_curve"), "spec.initial_curve", {"flat_rate"});
            s.flat_rate = c.number("flat_rate", 0.0);
        }
    }
    return s;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("<document>", std::string("not valid JSON: ") + e.what());
    }
    Block root(j, "",
               {"market", "spec", "simulation", "output", "ramsey", "davis", "long_rate",
                "verify", "horizon"});
    ExperimentConfig cfg;
    if (root.has("market")) {
        cfg.market = parse_market(root.raw("market"));
    }
    if (root.has("spec")) {
        const std::size_t dim = cfg.market ? cfg.market->dim : 1;
        cfg.spec = parse_spec(root.raw("spec"), dim);
    }
    if (root.has("simulation")) {
        Block b(root.raw("simulation"), "simulation",
                {"horizon", "n_steps", "n_paths", "seed", "inner_paths"});
        auto& s = cfg.simulation;
        s.horizon = b.number("horizon", s.horizon);
        require(s.horizon > 0.0, "simulation.horizon", "must be positive");
        s.n_steps = b.count("n_steps", s.n_steps);
        require(s.n_steps >= 1, "simulation.n_steps", "must be at least 1");
        s.n_paths = b.count("n_paths", s.n_paths);
        require(s.n_paths >= 2, "simulation.n_paths", "must be at least 2");
        s.seed = b.count("seed", s.seed);
        s.inner_paths = b.count("inner_paths", s.inner_paths);
        require(s.inner_paths >= 2, "simulation.inner_paths", "must be at least 2");
    }
    if (root.has("output")) {
        Block b(root.raw("output"), "output", {"tenors", "path", "format", "curve_dt"});
        auto& o = cfg.output;
        o.tenors = b.numbers("tenors", o.tenors);
        require_increasing_positive(o.tenors, "output.tenors");
        o.path = b.text("path", o.path);
        o.format = b.text("format", o.format, {"csv", "json"});
        o.curve_dt = b.number("curve_dt", o.curve_dt);
        require(o.curve_dt > 0.0, "output.curve_dt", "must be positive");
    }
    if (root.has("ramsey")) {
        Block b(root.raw("ramsey"), "ramsey", {"beta", "alpha", "g", "sigma", "c0"});
        RamseyConfig r;
        r.beta = b.number("beta", r.beta);
        r.alpha = b.number("alpha", r.alpha);
        require_alpha(r.alpha, "ramsey.alpha");
        r.g = b.number("g", r.g);
        r.sigma = b.number("sigma", r.sigma);
        require(r.sigma >= 0.0, "ramsey.sigma", "must be nonnegative");
        r.c0 = b.number("c0", r.c0);
        require(r.c0 > 0.0, "ramsey.c0", "must be positive");
        cfg.ramsey = r;
    }
    if (root.has("davis")) {
        Block b(root.raw("davis"), "davis",
                {"payoff", "strike", "exponent", "quantity", "maturity", "capitalize_to"});
        DavisConfig d;
        d.payoff = b.text("payoff", d.payoff, {"zero_coupon", "call_on_wealth", "wealth_power"});
        d.strike = b.number("strike", d.strike);
        d.exponent = b.number("exponent", d.exponent);
        d.quantity = b.number("quantity", d.quantity);
        d.maturity = b.number("maturity", d.maturity);
        require(d.maturity > 0.0, "davis.maturity", "must be positive");
        if (b.has("capitalize_to")) {
            d.capitalize_to = b.number("capitalize_to");
            require(*d.capitalize_to >= d.maturity, "davis.capitalize_to",
                    "must not precede davis.maturity");
        }
        cfg.davis = d;
    }
    if (root.has("long_rate")) {
        Block b(root.raw("long_rate"), "long_rate", {"mode", "times", "probes", "l0"});
        LongRateConfig l;
        l.mode = b.text("mode", l.mode, {"forward", "backward"});
        l.times = b.numbers("times", l.times);
        for (double t : l.times) {
            require(t >= 0.0, "long_rate.times", "must be nonnegative");
        }
        l.probes = b.numbers("probes", l.probes);
        l.l0 = b.number("l0", l.l0);
        cfg.long_rate = l;
    }
    if (root.has("verify")) {
        Block b(root.raw("verify"), "verify",
                {"identity_tol", "hjb_tol", "band", "perturbation_factor", "consumption_delta",
                 "identity_paths"});
        auto& v = cfg.verify;
        v.identity_tol = b.number("identity_tol", v.identity_tol);
        v.hjb_tol = b.number("hjb_tol", v.hjb_tol);
        v.band = b.number("band", v.band);
        v.perturbation_factor = b.number("perturbation_factor", v.perturbation_factor);
        v.consumption_delta = b.number("consumption_delta", v.consumption_delta);
        v.identity_paths = b.count("identity_paths", v.identity_paths);
        require(v.identity_tol > 0.0 && v.hjb_tol > 0.0 && v.band > 0.0, "verify",
                "tolerances and band must be positive");
        require(v.consumption_delta > 0.0 && v.consumption_delta < 1.0,
                "verify.consumption_delta", "must lie in (0,1)");
    }
    if (root.has("horizon")) {
        Block b(root.raw("horizon"), "horizon", {"horizons", "common_time"});
        HorizonConfig h;
        h.horizons = b.numbers("horizons", h.horizons);
        require(h.horizons.size() >= 2, "horizon.horizons", "needs at least two horizons");
        for (double T : h.horizons) {
            require(T > 0.0, "horizon.horizons", "horizons must be positive");
        }
        h.common_time = b.number("common_time", h.common_time);
        require(h.common_time > 0.0, "horizon.common_time", "must be positive");
        cfg.horizon = h;
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path, std::string* raw_text) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("--config", "cannot read file " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    if (raw_text) {
        *raw_text = ss.str();
    }
    return parse_config(ss.str());
}

const MarketConfig& require_market(const ExperimentConfig& cfg) {
    if (!cfg.market) {
        throw ConfigError("market", "this subcommand needs a market block");
    }
    return *cfg.market;
}

const SpecConfig& require_spec(const ExperimentConfig& cfg, const std::string& type) {
    if (!cfg.spec) {
        throw ConfigError("spec", "this subcommand needs a spec block");
    }
    if (cfg.spec->type != type) {
        throw ConfigError("spec.type", "this subcommand needs a " + type + " spec (got " +
                                           cfg.spec->type + ")");
    }
    return *cfg.spec;
}

MarketModel build_market(const MarketConfig& m) {
    std::vector<Vec> span;
    for (const auto& v : m.subspace_basis) {
        span.push_back(to_vec(v));
    }
    auto R = SubspaceR::span_of(m.dim, span);
    auto rate = m.rate.model == "vasicek"
                    ? ShortRateModel::vasicek(m.rate.a, m.rate.b, m.rate.sigma_r, m.rate.r0,
                                              to_vec(m.rate.w_dir))
                    : ShortRateModel::constant(m.rate.r);
    return MarketModel{m.dim, std::move(rate), DeterministicFn::constant(to_vec(m.eta_R)),
                       std::move(R)};
}

ForwardPowerSpec build_forward_spec(const SpecConfig& s, std::size_t dim) {
    if (s.kappa_star.size() != dim || s.nu_star.size() != dim) {
        throw ConfigError("spec", "kappa_star and nu_star must match market.dim");
    }
    return ForwardPowerSpec{s.alpha, DeterministicFn::constant(to_vec(s.kappa_star)),
                            DeterministicFn::constant(to_vec(s.nu_star)),
                            DeterministicFn::constant_scalar(s.psi_hat)};
}

GammaModel build_gamma(const GammaConfig& g, std::size_t dim) {
    if (g.model == "vasicek_orthogonal") {
        return GammaModel::vasicek_orthogonal(g.a, g.sigma_r, to_vec(g.dir_perp));
    }
    if (g.model == "synthetic_sqrt") {
        return GammaModel::synthetic_sqrt(g.c_R, g.c_perp, to_vec(g.dir_R), to_vec(g.dir_perp));
    }
    if (g.model == "custom") {
        std::vector<Vec> values;
        for (const auto& v : g.values) {
            values.push_back(to_vec(v));
        }
        return GammaModel::custom(g.taus, std::move(values),
                                  g.extrapolation == "linear" ? Extrapolation::linear
                                                              : Extrapolation::flat);
    }
    return GammaModel::zero(dim);
}

BackwardSpec build_backward_spec(const SpecConfig& s, const MarketConfig& m, double T_H) {
    const auto market = build_market(m);
    BackwardSpec spec{T_H,          s.alpha,  build_gamma(s.gamma, m.dim),
                      m.dim,        market.R, market.eta_R,
                      InitialCurve::flat(s.flat_rate)};
    spec.validate();
    return spec;
}

}  // namespace forward_yield::cli
