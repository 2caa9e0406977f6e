#include "forward_yield/cli/manifest.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <stdexcept>

#ifndef FORWARD_YIELD_VERSION
#define FORWARD_YIELD_VERSION "0.1.0"
#endif

namespace forward_yield::cli {

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

std::string artifact_version() { return FORWARD_YIELD_VERSION; }

std::string manifest_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["subcommand"] = m.subcommand;
    j["config_path"] = m.config_path;
    j["config_sha256"] = m.config_sha256;
    j["seed"] = m.seed;
    j["n_paths"] = m.n_paths;
    j["version"] = m.version;
    j["wall_clock_seconds"] = m.wall_clock_seconds;
    j["passed"] = m.passed;
    j["outputs"] = m.outputs;
    j["summary"] = nlohmann::ordered_json::parse(to_json(m.summary));
    return j.dump(2) + "\n";
}

void write_manifest(const RunManifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write manifest " + path);
    }
    out << manifest_json(m);
}

}  // namespace forward_yield::cli
