#include "forward_yield/cli/commands.hpp"

#include "forward_yield/curves.hpp"
#include "forward_yield/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <ostream>

namespace forward_yield::cli {

namespace {

std::string flag(bool ok) { return ok ? "true" : "false"; }

std::size_t steps_for(double horizon, double dt) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(horizon / dt)));
}

TimeGrid curve_grid(const ExperimentConfig& cfg, double min_horizon = 0.0) {
    const double horizon = std::max(cfg.output.tenors.back(), min_horizon);
    return TimeGrid(horizon, steps_for(horizon, cfg.output.curve_dt));
}

void add_metric(CommandOutput& out, const std::string& name, double value) {
    out.summary.add({name, value});
}

void add_metric(CommandOutput& out, const std::string& name, const std::string& value) {
    out.summary.add({name, value});
}

Table curve_table() { return Table{{"tenor", "rate", "stderr", "method"}, {}}; }

void append_curve(Table& t, const YieldCurve& c) {
    for (std::size_t i = 0; i < c.tenors.size(); ++i) {
        t.add({c.tenors[i], c.rates[i], c.std_errors[i], to_string(c.method)});
    }
}

// ---------------------------------------------------------------------------

CommandOutput ramsey_flat(const ExperimentConfig& cfg) {
    const RamseyConfig r = cfg.ramsey.value_or(RamseyConfig{});
    const auto grid = curve_grid(cfg);
    const auto c = gbm_consumption_paths(r.c0, r.g, r.sigma, grid, cfg.simulation.seed,
                                         cfg.simulation.n_paths);
    const auto rc = ramsey_rate_mc(r.beta, r.alpha, c, grid, cfg.output.tenors);
    const double closed = ramsey_flat_closed(r.beta, r.alpha, r.g, r.sigma);

    CommandOutput out;
    Table t = curve_table();
    append_curve(t, rc.curve);
    double max_z = 0.0;
    for (std::size_t i = 0; i < rc.curve.rates.size(); ++i) {
        const double se = rc.curve.std_errors[i];
        max_z = std::max(max_z, se > 0.0 ? std::abs(rc.curve.rates[i] - closed) / se
                                         : (rc.curve.rates[i] == closed ? 0.0 : INFINITY));
    }
    out.tables.emplace_back("ramsey_flat", std::move(t));
    add_metric(out, "closed_form_rate", closed);
    add_metric(out, "max_abs_z_vs_closed_form", max_z);
    add_metric(out, "spread", rc.spread);
    add_metric(out, "spread_stderr", rc.spread_std_error);
    return out;
}

CommandOutput forward_curve(const ExperimentConfig& cfg) {
    const auto& mc = require_market(cfg);
    const auto market = build_market(mc);
    const auto spec = build_forward_spec(require_spec(cfg, "forward"), mc.dim);
    const auto grid = curve_grid(cfg);
    const auto batch = sample_brownian(cfg.simulation.seed, grid, mc.dim, cfg.simulation.n_paths);
    const auto triple = simulate_optimal(spec, market, grid, batch);

    std::vector<double> mc_p, mc_se, cf_p, rn_p, rn_se;
    for (double T : cfg.output.tenors) {
        const auto m = marginal_zc_mc(triple.Ystar, grid, T);
        mc_p.push_back(m.mean);
        mc_se.push_back(m.std_error);
        cf_p.push_back(marginal_zc_gaussian(market, spec.nu_star, T));
        const auto rn = risk_neutral_zc_mc(market, grid, batch, triple.rates, T);
        rn_p.push_back(rn.mean);
        rn_se.push_back(rn.std_error);
    }
    const auto& ten = cfg.output.tenors;
    CommandOutput out;
    Table t = curve_table();
    append_curve(t, curve_from_prices(mc_p, ten, 0.0, CurveMethod::marginal_mc, mc_se));
    append_curve(t, curve_from_prices(cf_p, ten, 0.0, CurveMethod::gaussian_closed));
    append_curve(t, curve_from_prices(rn_p, ten, 0.0, CurveMethod::risk_neutral, rn_se));
    out.tables.emplace_back("forward_curve", std::move(t));
    double max_z = 0.0;
    for (std::size_t i = 0; i < ten.size(); ++i) {
        max_z = std::max(max_z, std::abs(mc_p[i] - cf_p[i]) / std::max(mc_se[i], 1e-300));
    }
    add_metric(out, "max_abs_z_marginal_mc_vs_closed", max_z);
    return out;
}

CommandOutput backward_curve(const ExperimentConfig& cfg) {
    const auto& mc = require_market(cfg);
    const auto& sc = require_spec(cfg, "backward");
    const auto spec = build_backward_spec(sc, mc, sc.T_H);
    const auto grid = curve_grid(cfg, spec.T_H);
    const auto batch = sample_brownian(cfg.simulation.seed, grid, mc.dim, cfg.simulation.n_paths);
    const auto vols = solve_backward_vols(spec);
    const auto triple = simulate_backward(spec, vols, grid, batch);
    const auto market = spec.market();
    const auto zero = DeterministicFn::constant(Vec::Zero(static_cast<Eigen::Index>(mc.dim)));
    const auto Y0 = state_price_paths(market, grid, batch, triple.rates, zero, 1.0);

    std::vector<double> mc_p, mc_se, cf_p, rn_p, rn_se;
    for (double T : cfg.output.tenors) {
        const auto m = marginal_zc_mc(triple.Ystar, grid, T);
        mc_p.push_back(m.mean);
        mc_se.push_back(m.std_error);
        cf_p.push_back(marginal_zc_gaussian(spec.gamma, spec.curve, vols.nu_star, spec.eta_R, T));
        const auto rn = marginal_zc_mc(Y0, grid, T);
        rn_p.push_back(rn.mean);
        rn_se.push_back(rn.std_error);
    }
    const auto& ten = cfg.output.tenors;
    CommandOutput out;
    Table t = curve_table();
    append_curve(t, curve_from_prices(mc_p, ten, 0.0, CurveMethod::marginal_mc, mc_se));
    append_curve(t, curve_from_prices(cf_p, ten, 0.0, CurveMethod::gaussian_closed));
    append_curve(t, curve_from_prices(rn_p, ten, 0.0, CurveMethod::risk_neutral, rn_se));
    out.tables.emplace_back("backward_curve", std::move(t));

    const std::size_t kH = grid.index_of(spec.T_H);
    const auto z = triple.Zhat.column(kH);
    const auto est = mean_stderr(z);
    const double cv =
        est.std_error * std::sqrt(static_cast<double>(z.size())) / std::abs(est.mean);
    add_metric(out, "terminal_constraint_mean", est.mean);
    add_metric(out, "terminal_constraint_cv", cv);
    add_metric(out, "terminal_constraint_threshold", 1e-10);
    out.passed = cv <= 1e-10;
    if (!out.passed) {
        out.failure = "terminal constraint dispersion exceeds 1e-10";
    }
    return out;
}

CommandOutput long_rate_cmd(const ExperimentConfig& cfg) {
    const auto& mc = require_market(cfg);
    const auto& sc = require_spec(cfg, "backward");
    const auto spec = build_backward_spec(sc, mc, sc.T_H);
    const LongRateConfig lr = cfg.long_rate.value_or(LongRateConfig{});
    const auto mode = lr.mode == "backward" ? LongRateMode::backward : LongRateMode::forward;
    const auto rep = long_rate(spec.gamma, spec.R, mode, spec.alpha, lr.times, lr.l0, lr.probes);

    CommandOutput out;
    Table levels{{"t", "l_t", "slope", "verdict", "mode"}, {}};
    for (std::size_t i = 0; i < rep.times.size(); ++i) {
        levels.add({rep.times[i], rep.levels[i], rep.slope, to_string(rep.verdict), lr.mode});
    }
    Table proxies{{"T", "t", "integrand"}, {}};
    for (const auto& p : rep.proxies) {
        proxies.add({p.T, p.t, p.integrand});
    }
    out.tables.emplace_back("long_rate", std::move(levels));
    out.tables.emplace_back("long_rate_proxies", std::move(proxies));
    add_metric(out, "gamma_model", spec.gamma.kind());
    add_metric(out, "slope", rep.slope);
    add_metric(out, "verdict", to_string(rep.verdict));
    if (rep.verdict == LongRateVerdict::infinite) {
        out.passed = false;
        out.failure = "long rate is infinite: ||Gamma_t(T)||^2 / (T - t) diverges";
    }
    return out;
}

CommandOutput verify(const ExperimentConfig& cfg) {
    const auto& mc = require_market(cfg);
    const auto market = build_market(mc);
    const auto spec = build_forward_spec(require_spec(cfg, "forward"), mc.dim);
    const auto& v = cfg.verify;
    const TimeGrid grid(cfg.simulation.horizon, cfg.simulation.n_steps);
    const auto batch = sample_brownian(cfg.simulation.seed, grid, mc.dim, cfg.simulation.n_paths);
    const auto triple = simulate_optimal(spec, market, grid, batch);
    const auto utility = triple.utility();

    Table t{{"check", "value", "threshold", "passed"}, {}};
    bool all = true;
    auto row = [&](const std::string& name, double value, double threshold, bool ok) {
        t.add({name, value, threshold, flag(ok)});
        all = all && ok;
    };

    HjbOptions ho;
    ho.n_times = 20;
    ho.paths.clear();
    for (std::size_t p = 0; p < std::min<std::size_t>(4, triple.n_paths()); ++p) {
        ho.paths.push_back(p);
    }
    const auto hjb = hjb_residual(spec, triple, market, ho);
    row("hjb_drift_residual", hjb.max_drift_residual, v.hjb_tol,
        hjb.max_drift_residual <= v.hjb_tol);
    row("hjb_policy_residual", hjb.max_policy_residual, v.hjb_tol,
        hjb.max_policy_residual <= v.hjb_tol);
    row("hjb_kappa_error", hjb.max_kappa_error, 1e-12, hjb.max_kappa_error <= 1e-12);
    row("conjugate_drift_residual", hjb.max_dual_residual, v.hjb_tol,
        hjb.max_dual_residual <= v.hjb_tol);

    double fo = 0.0;
    for (double x0 : {1.0, 0.5, 2.0, 10.0}) {
        const auto r = first_order_check(triple, utility, x0, std::pow(x0, -spec.alpha));
        fo = std::max({fo, r.max_marginal_residual, r.max_consumption_residual});
    }
    row("first_order_residual", fo, v.identity_tol, fo <= v.identity_tol);
    const double pr = pathwise_ramsey_report(triple, utility);
    row("pathwise_ramsey_residual", pr, v.identity_tol, pr <= v.identity_tol);
    const auto rep = representation_check(triple, PowerUtility(spec.alpha), log_grid(0.05, 20.0, 20));
    row("representation_residual", rep.max_residual, v.identity_tol,
        rep.max_residual <= v.identity_tol);
    row("flow_inversion_error", rep.max_flow_inversion_error, 1e-12,
        rep.max_flow_inversion_error <= 1e-12);

    const double band = v.band;
    const auto opt = consistency_drift_test(utility, market, triple.rates, optimal_strategy(spec),
                                            grid, batch, 1.0, band);
    row("optimal_drift_max_abs_t", opt.max_abs_t_stat, band, !opt.any_flagged);

    if (market.R.rank() > 0) {
        const Vec e = market.R.basis().front();
        const double kn = spec.kappa_star(0.0).norm();
        const double eps = v.perturbation_factor * (kn > 0.0 ? kn : 1.0);
        const auto pert = consistency_drift_test(
            utility, market, triple.rates, volatility_perturbation(spec, e, eps), grid, batch,
            1.0, band);
        row("volatility_perturbation_total_t", pert.total.t_stat, -band,
            pert.total.t_stat < -band);
    }
    if (spec.psi_hat.scalar(0.0) > 0.0) {
        for (double sgn : {1.0, -1.0}) {
            const double factor = 1.0 + sgn * v.consumption_delta;
            const auto pert = consistency_drift_test(utility, market, triple.rates,
                                                     consumption_perturbation(spec, factor), grid,
                                                     batch, 1.0, band);
            row(sgn > 0 ? "consumption_up_total_t" : "consumption_down_total_t",
                pert.total.t_stat, -band, pert.total.t_stat < -band);
        }
    }

    CommandOutput out;
    out.tables.emplace_back("verify", std::move(t));
    add_metric(out, "hjb_nodes", static_cast<double>(hjb.n_nodes));
    add_metric(out, "all_passed", flag(all));
    out.passed = all;
    if (!all) {
        out.failure = "invariant suite failed; see the verify table";
    }
    return out;
}

Payoff make_payoff(const DavisConfig& d) {
    if (d.payoff == "call_on_wealth") {
        const double K = d.strike;
        return [K](const PayoffState& s) { return std::max(s.X - K, 0.0); };
    }
    if (d.payoff == "wealth_power") {
        const double e = d.exponent;
        return [e](const PayoffState& s) { return std::pow(s.X, e); };
    }
    return [](const PayoffState&) { return 1.0; };
}

CommandOutput davis(const ExperimentConfig& cfg) {
    const auto& mc = require_market(cfg);
    const DavisConfig d = cfg.davis.value_or(DavisConfig{});
    if (!cfg.spec) {
        throw ConfigError("spec", "davis needs a spec block");
    }
    const double dt = cfg.simulation.horizon / static_cast<double>(cfg.simulation.n_steps);
    const double last = d.capitalize_to.value_or(d.maturity);

    std::optional<OptimalTriple> triple;
    if (cfg.spec->type == "forward") {
        const auto market = build_market(mc);
        const auto spec = build_forward_spec(*cfg.spec, mc.dim);
        const TimeGrid grid(last, steps_for(last, dt));
        const auto batch =
            sample_brownian(cfg.simulation.seed, grid, mc.dim, cfg.simulation.n_paths);
        triple = simulate_optimal(spec, market, grid, batch);
    } else {
        const auto spec = build_backward_spec(*cfg.spec, mc, cfg.spec->T_H);
        const double horizon = std::max(last, spec.T_H);
        const TimeGrid grid(horizon, steps_for(horizon, dt));
        const auto batch =
            sample_brownian(cfg.simulation.seed, grid, mc.dim, cfg.simulation.n_paths);
        triple = simulate_backward(spec, grid, batch);
    }
    const auto payoff = make_payoff(d);
    const auto price = davis_price(payoff, *triple, 0.0, d.maturity, d.quantity);

    CommandOutput out;
    Table t{{"payoff", "maturity", "quantity", "value", "stderr", "per_unit"}, {}};
    t.add({d.payoff, d.maturity, d.quantity, price.value, price.std_error, price.per_unit});
    out.tables.emplace_back("davis", std::move(t));
    add_metric(out, "value", price.value);
    add_metric(out, "stderr", price.std_error);
    if (d.capitalize_to) {
        const auto cap = davis_capitalization_check(payoff, *triple, d.maturity, *d.capitalize_to);
        add_metric(out, "capitalized_value", cap.at_T_H.value);
        add_metric(out, "capitalized_stderr", cap.at_T_H.std_error);
        add_metric(out, "capitalization_t_stat", cap.t_stat);
    }
    return out;
}

CommandOutput horizon(const ExperimentConfig& cfg) {
    const auto& mc = require_market(cfg);
    const auto& sc = require_spec(cfg, "backward");
    const HorizonConfig h = cfg.horizon.value_or(HorizonConfig{});
    std::vector<BackwardSpec> specs;
    for (double T_H : h.horizons) {
        specs.push_back(build_backward_spec(sc, mc, T_H));
    }
    const double dt = cfg.simulation.horizon / static_cast<double>(cfg.simulation.n_steps);
    const TimeGrid grid(h.common_time, steps_for(h.common_time, dt));
    const auto batch = sample_brownian(cfg.simulation.seed, grid, mc.dim, cfg.simulation.n_paths);
    const auto rep = horizon_dependency_experiment(specs, grid, batch, h.common_time);

    CommandOutput out;
    Table t{{"T_a", "T_b", "common_time", "x_gap", "y_gap", "x_gap_predicted", "y_gap_predicted",
             "prediction_error"},
            {}};
    for (const auto& p : rep.pairs) {
        t.add({p.T_a, p.T_b, rep.common_time, p.x_gap, p.y_gap, p.x_gap_predicted,
               p.y_gap_predicted, p.prediction_error});
    }
    out.tables.emplace_back("horizon", std::move(t));
    add_metric(out, "max_x_gap", rep.max_x_gap);
    add_metric(out, "max_y_gap", rep.max_y_gap);
    return out;
}

void diagnostic(std::ostream& err, const std::string& kind, const std::string& field,
                const std::string& message) {
    nlohmann::ordered_json j;
    j["error"] = kind;
    if (!field.empty()) {
        j["field"] = field;
    }
    j["message"] = message;
    err << j.dump() << "\n";
}

}  // namespace

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names = {
        "ramsey-flat", "forward-curve", "backward-curve", "long-rate", "verify", "davis", "horizon"};
    return names;
}

CommandOutput run_command(const std::string& subcommand, const ExperimentConfig& cfg) {
    if (subcommand == "ramsey-flat") {
        return ramsey_flat(cfg);
    }
    if (subcommand == "forward-curve") {
        return forward_curve(cfg);
    }
    if (subcommand == "backward-curve") {
        return backward_curve(cfg);
    }
    if (subcommand == "long-rate") {
        return long_rate_cmd(cfg);
    }
    if (subcommand == "verify") {
        return verify(cfg);
    }
    if (subcommand == "davis") {
        return davis(cfg);
    }
    if (subcommand == "horizon") {
        return horizon(cfg);
    }
    throw ConfigError("<subcommand>", "unknown subcommand " + subcommand);
}

int run(const RunOptions& options, std::ostream& out, std::ostream& err) {
    const auto start = std::chrono::steady_clock::now();
    try {
        std::string raw;
        auto cfg = load_config(options.config_path, &raw);
        if (options.seed) {
            cfg.simulation.seed = *options.seed;
        }
        if (options.paths) {
            if (*options.paths < 2) {
                throw ConfigError("--paths", "must be at least 2");
            }
            cfg.simulation.n_paths = *options.paths;
        }
        if (options.out_dir) {
            cfg.output.path = *options.out_dir;
        }
        if (options.format) {
            if (*options.format != "csv" && *options.format != "json") {
                throw ConfigError("--format", "must be csv or json");
            }
            cfg.output.format = *options.format;
        }

        auto result = run_command(options.subcommand, cfg);

        std::filesystem::create_directories(cfg.output.path);
        RunManifest m;
        m.subcommand = options.subcommand;
        m.config_path = options.config_path;
        m.config_sha256 = sha256_hex(raw);
        m.seed = cfg.simulation.seed;
        m.n_paths = cfg.simulation.n_paths;
        m.version = artifact_version();
        m.summary = result.summary;
        m.passed = result.passed;
        for (const auto& [stem, table] : result.tables) {
            const auto path =
                (std::filesystem::path(cfg.output.path) / (stem + "." + cfg.output.format))
                    .string();
            emit_table(table, cfg.output.format, path);
            m.outputs.push_back(path);
        }
        m.wall_clock_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        write_manifest(m, (std::filesystem::path(cfg.output.path) / "manifest.json").string());
        for (const auto& path : m.outputs) {
            out << "wrote " << path << "\n";
        }
        if (!result.passed) {
            diagnostic(err, "invariant_failure", "", result.failure);
            return exit_invariant;
        }
        return exit_ok;
    } catch (const ConfigError& e) {
        diagnostic(err, "config", e.field(), e.detail());
        return exit_config;
    } catch (const SubspaceViolation& e) {
        diagnostic(err, "subspace_violation", "", e.what());
        return exit_subspace;
    } catch (const DomainError& e) {
        diagnostic(err, "domain", "", e.what());
        return exit_config;
    } catch (const std::exception& e) {
        diagnostic(err, "runtime", "", e.what());
        return exit_runtime;
    }
}

}  // namespace forward_yield::cli
