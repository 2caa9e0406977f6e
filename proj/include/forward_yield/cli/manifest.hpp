#pragma once

#include "forward_yield/cli/table.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace forward_yield::cli {

std::string sha256_hex(const std::string& bytes);

/// Artifact version, e.g. "0.1.0+g1a2b3c4".
std::string artifact_version();

struct RunManifest {
    std::string subcommand;
    std::string config_path;
    std::string config_sha256;
    std::uint64_t seed = 0;
    std::size_t n_paths = 0;
    std::string version;
    double wall_clock_seconds = 0.0;
    std::vector<std::string> outputs;
    /// Per-experiment summary rows.
    Table summary;
    bool passed = true;
};

std::string manifest_json(const RunManifest& m);
void write_manifest(const RunManifest& m, const std::string& path);

}  // namespace forward_yield::cli
