#include "htcp/experiment.hpp"
#include "htcp/random_walk.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <string>

namespace {

// Best-effort machine-readable error report next to the other outputs.
void write_error_json(const std::string& dir, const std::string& type, const std::string& what,
                      int term_cap = -1) {
    try {
        nlohmann::json err = {{"error", what}, {"type", type}};
        if (term_cap >= 0) err["term_cap"] = term_cap;
        std::filesystem::create_directories(dir);
        htcp::write_file(std::filesystem::path(dir) / "error.json", err.dump(2) + "\n");
    } catch (...) {
        // Reporting must not mask the original failure.
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Compound-sum densities and random-walk suprema on grids"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    int threads = 0;
    std::uint64_t seed = 0;
    bool seed_set = false;

    const char* names[] = {"compound", "verify", "walk", "simulate"};
    const char* blurbs[] = {"Evaluate a compound-sum density",
                            "Run a tail-limit verification check",
                            "Build the random-walk supremum from the step law",
                            "Monte Carlo the random-walk supremum"};
    for (int i = 0; i < 4; ++i) {
        CLI::App* sub = app.add_subcommand(names[i], blurbs[i]);
        sub->add_option("--config", config_path, "JSON experiment config")->required();
        sub->add_option("--out", out_dir, "Output directory (overrides config output_dir)");
        sub->add_option("--threads", threads, "Worker threads (HTCP_THREADS env as fallback)");
        sub->add_option("--seed", seed, "Override the config RNG seed")
            ->each([&](const std::string&) { seed_set = true; });
    }

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    std::string raw;
    try {
        raw = htcp::read_file(config_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 64;
    }

    htcp::ExperimentConfig cfg;
    try {
        cfg = htcp::parse_config_text(raw);
        if (cfg.command != command)
            throw htcp::ConfigError("config command \"" + cfg.command +
                                    "\" does not match subcommand \"" + command + "\"");
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 64;
    }

    htcp::RunOptions opts;
    opts.out_override = out_dir;
    opts.threads = threads;
    if (seed_set) opts.seed_override = seed;
    const std::string resolved_out = htcp::resolve_output_dir(cfg, opts);

    try {
        return htcp::run_experiment(cfg, opts);
    } catch (const htcp::SeriesCapError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        write_error_json(resolved_out, "series-cap", e.what(), e.cap);
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        write_error_json(resolved_out, "computation", e.what());
        return 1;
    }
}
