#pragma once

#include "forward_yield/cli/config.hpp"
#include "forward_yield/cli/manifest.hpp"
#include "forward_yield/cli/table.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace forward_yield::cli {

const std::vector<std::string>& subcommands();

struct CommandOutput {
    /// (file stem, table) pairs; the first one is the main result.
    std::vector<std::pair<std::string, Table>> tables;
    Table summary{{"metric", "value"}, {}};
    bool passed = true;
    std::string failure;
};

/// Runs one subcommand on a parsed configuration without touching the file
/// system.
CommandOutput run_command(const std::string& subcommand, const ExperimentConfig& cfg);

struct RunOptions {
    std::string subcommand;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    std::optional<std::string> out_dir;
    std::optional<std::string> format;
};

/// Loads the configuration, applies overrides, runs, writes the tables and
/// manifest.json. Returns the process exit status; diagnostics go to err as
/// one JSON object per line.
int run(const RunOptions& options, std::ostream& out, std::ostream& err);

enum ExitCode : int {
    exit_ok = 0,
    exit_runtime = 1,
    exit_config = 2,
    exit_subspace = 3,
    exit_invariant = 4,
};

}  // namespace forward_yield::cli
