#pragma once

// Batch experiment front end: parse a JSON config, validate it against the
// published schema shape (strict keys, typed fields), run the requested
// pipeline, and write CSV data, JSON verdicts, and a hash manifest.

#include "htcp/family.hpp"
#include "htcp/text_io.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>

namespace htcp {

// Config rejected before any computation (exit 64 territory).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GridSpec {
    double origin = 0;
    double step = 0;
    long long n_cells = 0;
};

struct ExperimentConfig {
    std::string command; // compound | verify | walk | simulate
    std::optional<Family> family;
    GridSpec grid;
    nlohmann::json params;
    std::string output_dir = "out";
    std::string config_hash; // fnv1a64 of the raw config bytes
};

// Parse and schema-validate raw config text. Throws ConfigError on any
// structural problem: bad JSON, unknown keys, wrong types, missing fields,
// or values outside the schema's stated bounds.
ExperimentConfig parse_config_text(const std::string& raw);

struct RunOptions {
    std::string out_override; // --out
    int threads = 0;          // --threads, 0 = HTCP_THREADS env or 1
    std::optional<std::uint64_t> seed_override;
};

// Execute the experiment. Returns 0 (success) or 2 (a verdict failed).
// Computational failures throw; the caller maps them to exit 1 and an
// error.json. Every run writes a manifest.json listing outputs with hashes.
int run_experiment(const ExperimentConfig& cfg, const RunOptions& opts);

// Effective output directory for a config + options pair.
std::string resolve_output_dir(const ExperimentConfig& cfg, const RunOptions& opts);

} // namespace htcp
