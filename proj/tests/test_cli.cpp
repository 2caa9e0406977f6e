#include "forward_yield/cli/commands.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace forward_yield::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("forward_yield_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

const char* kRamseyConfig = R"({
  // small flat Ramsey run
  "simulation": {"n_paths": 4000, "seed": 11},
  "output": {"tenors": [1, 5, 10]},
  "ramsey": {"beta": 0.01, "alpha": 0.5, "g": 0.02, "sigma": 0.1}
})";

const char* kForwardConfig = R"({
  "market": {"dim": 2, "subspace_basis": [[1, 0]], "eta_R": [0.3, 0],
             "rate": {"model": "vasicek", "a": 1.0, "b": 0.03, "sigma_r": 0.02, "r0": 0.02, "w_dir": [0.6, 0.8]}},
  "spec": {"type": "forward", "alpha": 0.5, "kappa_star": [0.3, 0], "nu_star": [0, 0.1], "psi_hat": 0.1},
  "simulation": {"horizon": 2.0, "n_steps": 10, "n_paths": 2000, "seed": 5},
  "output": {"tenors": [1, 2, 5]}
})";

std::string replace(std::string s, const std::string& from, const std::string& to) {
    const auto pos = s.find(from);
    REQUIRE(pos != std::string::npos);
    return s.replace(pos, from.size(), to);
}

}  // namespace

TEST_CASE("number formatting and CSV quoting") {
    CHECK(format_number(0.01625) == "0.01625");
    CHECK(format_number(1.0) == "1");
    CHECK(format_number(std::nan("")) == "nan");
    CHECK(format_number(-INFINITY) == "-inf");
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
}

TEST_CASE("tables in both formats carry the same values") {
    Table t{{"tenor", "rate", "stderr", "method"}, {}};
    t.add({1.0, 0.0161234567891234, 3.5e-4, std::string("ramsey_mc")});
    t.add({30.0, -1.25e-7, 0.0, std::string("gaussian_closed")});

    const auto csv = to_csv(t);
    CHECK(csv.rfind("tenor,rate,stderr,method\r\n", 0) == 0);
    const auto j = nlohmann::json::parse(to_json(t));
    REQUIRE(j.size() == 2);

    std::vector<std::vector<std::string>> cells;
    std::stringstream ss(csv);
    std::string line;
    std::getline(ss, line);
    while (std::getline(ss, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        std::vector<std::string> row;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            row.push_back(cell);
        }
        cells.push_back(row);
    }
    REQUIRE(cells.size() == 2);
    for (std::size_t r = 0; r < 2; ++r) {
        CHECK(std::stod(cells[r][0]) == j[r]["tenor"].get<double>());
        CHECK(std::stod(cells[r][1]) == j[r]["rate"].get<double>());
        CHECK(std::stod(cells[r][2]) == j[r]["stderr"].get<double>());
        CHECK(cells[r][3] == j[r]["method"].get<std::string>());
    }
    CHECK_THROWS(t.add({1.0}));
}

TEST_CASE("empty tables are header-only") {
    const Table t{{"tenor", "rate", "stderr", "method"}, {}};
    CHECK(to_csv(t) == "tenor,rate,stderr,method\r\n");
    CHECK(nlohmann::json::parse(to_json(t)).empty());
}

TEST_CASE("SHA-256 of known inputs") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("configuration errors name the field") {
    auto field_of = [](const std::string& text) -> std::string {
        try {
            parse_config(text);
        } catch (const ConfigError& e) {
            return e.field();
        }
        return "<accepted>";
    };
    CHECK(field_of(kForwardConfig) == "<accepted>");
    CHECK(field_of(replace(kForwardConfig, "\"alpha\": 0.5", "\"alpha\": 1.5")) == "spec.alpha");
    CHECK(field_of(replace(kForwardConfig, "\"n_paths\": 2000", "\"n_paths\": -3")) == "simulation.n_paths");
    CHECK(field_of(replace(kForwardConfig, "\"seed\": 5", "\"seed\": 5, \"sede\": 1")) == "simulation.sede");
    CHECK(field_of(replace(kForwardConfig, "\"a\": 1.0", "\"a\": -1.0")) == "market.rate.a");
    CHECK(field_of("{ not json") != "<accepted>");

    try {
        parse_config(replace(kForwardConfig, "\"alpha\": 0.5", "\"alpha\": 1.5"));
        FAIL("accepted alpha = 1.5");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.detail()).find("(0,1)") != std::string::npos);
    }
}

TEST_CASE("ramsey-flat subcommand") {
    const auto out = run_command("ramsey-flat", parse_config(kRamseyConfig));
    REQUIRE(out.tables.size() == 1);
    const auto& t = out.tables[0].second;
    REQUIRE(t.rows.size() == 3);
    CHECK(t.columns == std::vector<std::string>{"tenor", "rate", "stderr", "method"});
    for (const auto& row : t.rows) {
        const double rate = std::get<double>(row[1]);
        const double se = std::get<double>(row[2]);
        CHECK(std::abs(rate - 0.01625) < 4.0 * se);
    }
    CHECK_THROWS_AS(run_command("no-such-command", parse_config(kRamseyConfig)), ConfigError);
}

TEST_CASE("run writes tables and a manifest, reproducibly across thread counts") {
    const auto dir = scratch("run");
    spit(dir / "cfg.json", kForwardConfig);
    RunOptions o;
    o.subcommand = "forward-curve";
    o.config_path = (dir / "cfg.json").string();

    const char* old = std::getenv("FORWARD_YIELD_THREADS");
    const std::string saved = old ? old : "";
    std::vector<std::string> outputs;
    for (const char* threads : {"1", "3"}) {
        setenv("FORWARD_YIELD_THREADS", threads, 1);
        o.out_dir = (dir / threads).string();
        std::ostringstream out, err;
        CHECK(run(o, out, err) == exit_ok);
        CHECK(err.str().empty());
        outputs.push_back(slurp(dir / threads / "forward_curve.csv"));
    }
    if (old) {
        setenv("FORWARD_YIELD_THREADS", saved.c_str(), 1);
    } else {
        unsetenv("FORWARD_YIELD_THREADS");
    }
    CHECK(!outputs[0].empty());
    CHECK(outputs[0] == outputs[1]);

    const auto m = nlohmann::json::parse(slurp(dir / "1" / "manifest.json"));
    CHECK(m["subcommand"] == "forward-curve");
    CHECK(m["config_sha256"] == sha256_hex(kForwardConfig));
    CHECK(m["seed"] == 5);
    CHECK(m["n_paths"] == 2000);
    CHECK(m["passed"] == true);

    o.format = "json";
    o.out_dir = (dir / "json").string();
    o.seed = 6;
    std::ostringstream out, err;
    CHECK(run(o, out, err) == exit_ok);
    const auto rows = nlohmann::json::parse(slurp(dir / "json" / "forward_curve.json"));
    CHECK(rows.size() == 9);
    CHECK(nlohmann::json::parse(slurp(dir / "json" / "manifest.json"))["seed"] == 6);
}

TEST_CASE("run maps failures to exit codes and one-line diagnostics") {
    const auto dir = scratch("errors");
    RunOptions o;
    o.subcommand = "verify";
    o.out_dir = (dir / "out").string();

    SUBCASE("bad alpha") {
        spit(dir / "bad.json", replace(kForwardConfig, "\"alpha\": 0.5", "\"alpha\": 1.5"));
        o.config_path = (dir / "bad.json").string();
        std::ostringstream out, err;
        CHECK(run(o, out, err) == exit_config);
        const auto line = err.str();
        CHECK(std::count(line.begin(), line.end(), '\n') == 1);
        const auto j = nlohmann::json::parse(line);
        CHECK(j["error"] == "config");
        CHECK(j["field"] == "spec.alpha");
        CHECK(j["message"].get<std::string>().find("(0,1)") != std::string::npos);
    }
    SUBCASE("missing file") {
        o.config_path = (dir / "absent.json").string();
        std::ostringstream out, err;
        CHECK(run(o, out, err) == exit_config);
    }
    SUBCASE("nu inside R") {
        spit(dir / "sub.json", replace(kForwardConfig, "\"nu_star\": [0, 0.1]", "\"nu_star\": [0.1, 0.1]"));
        o.config_path = (dir / "sub.json").string();
        std::ostringstream out, err;
        CHECK(run(o, out, err) == exit_subspace);
        CHECK(nlohmann::json::parse(err.str())["error"] == "subspace_violation");
    }
    SUBCASE("too few paths") {
        spit(dir / "ok.json", kForwardConfig);
        o.config_path = (dir / "ok.json").string();
        o.paths = 1;
        std::ostringstream out, err;
        CHECK(run(o, out, err) == exit_config);
    }
}
