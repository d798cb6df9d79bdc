#include <doctest.h>

#include "htcp/experiment.hpp"
#include "htcp/random_walk.hpp"
#include "htcp/text_io.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <sys/wait.h>

using htcp::ConfigError;
using htcp::GridDensity;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("htcp_io_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) { return htcp::read_file(p); }

json slurp_json(const fs::path& p) { return json::parse(slurp(p)); }

// Minimal well-formed config with an exponential severity on a small grid.
std::string base_compound_config(const std::string& out_dir) {
    json cfg = {{"command", "compound"},
                {"family", {{"kind", "exponential"}, {"rate", 1.0}}},
                {"grid", {{"origin", 0.0}, {"step", 0.01}, {"n_cells", 2200}}},
                {"params", {{"series", "poisson"}, {"lambda", 1.0}, {"t", 1.0}, {"tol", 1e-12}}},
                {"output_dir", out_dir}};
    return cfg.dump();
}

struct CliResult {
    int code = -1;
    std::string out, err;
};

// Run the real binary; stdout/stderr are captured through temp files.
CliResult run_cli(const std::string& args, const std::string& tag) {
    fs::path dir = fresh_dir("cli_" + tag);
    fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
    std::string cmd = std::string(HTCP_CLI_PATH) + " " + args + " >" + out.string() + " 2>" +
                      err.string();
    int rc = std::system(cmd.c_str());
    CliResult r;
    r.code = (rc >= 0 && WIFEXITED(rc)) ? WEXITSTATUS(rc) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

} // namespace

TEST_CASE("doubles survive the shortest round trip") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> vals = {0.0,    1.0,    -1.0,
                                0.1,    1.0 / 3.0, 6.02214076e23,
                                1e-300, std::numeric_limits<double>::denorm_min(),
                                std::numeric_limits<double>::max(), 3.141592653589793};
    for (int i = 0; i < 200; ++i) vals.push_back(std::ldexp(u(rng), (i % 600) - 300));
    for (double v : vals) {
        std::string s = htcp::format_double(v);
        CHECK(htcp::parse_double(s) == v);
    }
}

TEST_CASE("parse_double rejects anything but a full number") {
    CHECK_THROWS_AS(htcp::parse_double("1.5x"), htcp::GridError);
    CHECK_THROWS_AS(htcp::parse_double(""), htcp::GridError);
    CHECK_THROWS_AS(htcp::parse_double("--2"), htcp::GridError);
    CHECK_THROWS_AS(htcp::parse_double("1.5 "), htcp::GridError);
    CHECK(htcp::parse_double("-2.5e-3") == -2.5e-3);
}

TEST_CASE("grid CSV round trip is bit exact") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    GridDensity d;
    d.origin = -1.0 / 3.0;
    d.step = 0.07;
    d.values.resize(57);
    for (auto& v : d.values) v = u(rng) * 1e-3;
    d.defect = 1.25e-9;

    GridDensity back = htcp::grid_from_csv(htcp::to_csv(d));
    CHECK(back.origin == d.origin);
    CHECK(back.step == d.step);
    CHECK(back.defect == d.defect);
    REQUIRE(back.cells() == d.cells());
    for (Eigen::Index i = 0; i < d.cells(); ++i) CHECK(back.values[i] == d.values[i]);
}

TEST_CASE("fnv1a64 matches the published test vectors") {
    CHECK(htcp::fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(htcp::fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    CHECK(htcp::fnv1a64("foobar") == 0x85944171f73967e8ull);
    CHECK(htcp::hex64(0xcbf29ce484222325ull) == "cbf29ce484222325");
    CHECK(htcp::hex64(0x1ull) == "0000000000000001");
}

TEST_CASE("ecdf output thins to evenly spaced order statistics") {
    htcp::McSupremumResult mc;
    for (int i = 0; i < 1000; ++i) mc.maxima.push_back(static_cast<double>(i));
    mc.paths = 1000;

    std::string full = htcp::ecdf_csv(mc);
    std::string thin = htcp::ecdf_csv(mc, 10);
    auto count_rows = [](const std::string& s) {
        std::size_t n = 0;
        for (char c : s)
            if (c == '\n') ++n;
        return n;
    };
    CHECK(count_rows(full) == 1001); // header + every sample
    CHECK(count_rows(thin) <= 11);
    CHECK(thin.find("\n0,") != std::string::npos);    // first order statistic kept
    CHECK(thin.find("\n999,1\n") != std::string::npos); // last kept, cdf exactly 1
}

TEST_CASE("config parsing accepts the documented shape and hashes the bytes") {
    std::string raw = base_compound_config("somewhere");
    auto cfg = htcp::parse_config_text(raw);
    CHECK(cfg.command == "compound");
    CHECK(cfg.grid.n_cells == 2200);
    CHECK(cfg.output_dir == "somewhere");
    CHECK(cfg.config_hash == htcp::hex64(htcp::fnv1a64(raw)));
    REQUIRE(cfg.family.has_value());
    CHECK(cfg.family->kind() == htcp::FamilyKind::exponential);
}

TEST_CASE("config rejection covers structure, types, and vocabulary") {
    auto reject = [](const json& j) {
        CHECK_THROWS_AS(htcp::parse_config_text(j.dump()), ConfigError);
    };
    json good = json::parse(base_compound_config("out"));

    CHECK_THROWS_AS(htcp::parse_config_text("not json"), ConfigError);

    json j = good;
    j["extra"] = 1;
    reject(j); // unknown top-level key

    j = good;
    j.erase("command");
    reject(j);

    j = good;
    j["command"] = "explode";
    reject(j);

    j = good;
    j["family"] = {{"kind", "cauchy"}};
    reject(j);

    j = good;
    j["grid"]["step"] = 0.0;
    reject(j);

    j = good;
    j["grid"]["n_cells"] = 0;
    reject(j);

    j = good;
    j["grid"]["n_cells"] = 10.5; // must be an integer
    reject(j);

    j = good;
    j["params"]["series"] = "zeta";
    reject(j);

    j = good;
    j["params"]["surprise"] = true; // unknown params key
    reject(j);

    j = good;
    j["params"] = {{"check", "subexp"}}; // verify params under compound command
    reject(j);

    j = good;
    j["command"] = "verify";
    j["params"] = {{"check", "unheard_of"},
                   {"window", {{"x_lo", 1.0}, {"x_hi", 2.0}}}};
    reject(j);

    j["params"] = {{"check", "subexp"},
                   {"window", {{"x_lo", 1.0}, {"x_hi", 2.0}, {"spacing", "fractal"}}}};
    reject(j);

    j["params"] = {{"check", "long_tail"},
                   {"window", {{"x_lo", 1.0}, {"x_hi", 2.0}}},
                   {"shifts", "one"}};
    reject(j);

    j = good;
    j["command"] = "simulate";
    j["params"] = {{"shift", 2.0}, {"barrier", 10.0}}; // paths missing
    reject(j);
}

TEST_CASE("compound runs write data, report, and a consistent manifest") {
    fs::path dir = fresh_dir("compound");
    auto cfg = htcp::parse_config_text(base_compound_config(dir.string()));
    int rc = htcp::run_experiment(cfg, {});
    CHECK(rc == 0);

    auto manifest = slurp_json(dir / "manifest.json");
    CHECK(manifest.at("config_hash") == cfg.config_hash);
    REQUIRE(manifest.at("files").size() == 2);
    for (const auto& f : manifest.at("files")) {
        std::string content = slurp(dir / f.at("name").get<std::string>());
        CHECK(f.at("bytes").get<std::size_t>() == content.size());
        CHECK(f.at("fnv1a64").get<std::string>() == htcp::hex64(htcp::fnv1a64(content)));
    }

    GridDensity d = htcp::grid_from_csv(slurp(dir / "density.csv"));
    CHECK(d.cells() == 2200);
    CHECK(d.total() == doctest::Approx(1.0).epsilon(1e-9));

    auto report = slurp_json(dir / "report.json");
    CHECK(report.at("terms_used").get<int>() > 5);
    CHECK(report.at("config_hash") == cfg.config_hash);

    SUBCASE("reruns are byte identical") {
        fs::path dir2 = fresh_dir("compound_rerun");
        htcp::RunOptions opts;
        opts.out_override = dir2.string();
        CHECK(htcp::run_experiment(cfg, opts) == 0);
        CHECK(slurp(dir2 / "density.csv") == slurp(dir / "density.csv"));
        CHECK(slurp(dir2 / "report.json") == slurp(dir / "report.json"));
        CHECK(slurp(dir2 / "manifest.json") == slurp(dir / "manifest.json"));
    }
}

TEST_CASE("verify runs produce a verdict with the evidence embedded") {
    fs::path dir = fresh_dir("verify_pass");
    json cfg = {{"command", "verify"},
                {"family", {{"kind", "pareto_lomax"}, {"alpha", 2.5}, {"scale", 1.0}}},
                {"grid", {{"origin", 0.0}, {"step", 0.05}, {"n_cells", 12000}}},
                {"params",
                 {{"check", "compound_levy"},
                  {"lambda", 1.0},
                  {"window", {{"x_lo", 50.0}, {"x_hi", 400.0}, {"n_points", 48}}}}},
                {"output_dir", dir.string()}};
    auto parsed = htcp::parse_config_text(cfg.dump());
    CHECK(htcp::run_experiment(parsed, {}) == 0);

    auto verdict = slurp_json(dir / "verdict.json");
    CHECK(verdict.at("pass").get<bool>());
    CHECK(verdict.at("config_hash") == parsed.config_hash);
    CHECK(verdict.at("check") == "compound_levy");
    CHECK(verdict.at("tolerances").contains("tol_subexp"));
    CHECK(verdict.at("window").at("x_hi").get<double>() == 400.0);
    CHECK(verdict.at("report").contains("limit_estimate"));
    CHECK(fs::exists(dir / "samples.csv"));

    SUBCASE("a failed check exits 2 and says so in the verdict") {
        fs::path dir2 = fresh_dir("verify_fail");
        json bad = cfg;
        bad["family"] = {{"kind", "exponential"}, {"rate", 1.0}};
        bad["grid"] = {{"origin", 0.0}, {"step", 0.01}, {"n_cells", 5000}};
        bad["params"] = {{"check", "strong_subexp"},
                         {"window", {{"x_lo", 5.0}, {"x_hi", 40.0}}}};
        bad["output_dir"] = dir2.string();
        CHECK(htcp::run_experiment(htcp::parse_config_text(bad.dump()), {}) == 2);
        CHECK_FALSE(slurp_json(dir2 / "verdict.json").at("pass").get<bool>());
    }

    SUBCASE("square-integrability gate blocks heavy probes unless asked") {
        json heavy = cfg;
        heavy["family"] = {{"kind", "weibull"}, {"shape", 0.4}, {"scale", 1.0}};
        heavy["grid"] = {{"origin", 0.0}, {"step", 0.05}, {"n_cells", 2000}};
        heavy["params"]["window"] = {{"x_lo", 10.0}, {"x_hi", 60.0}};
        heavy["output_dir"] = fresh_dir("verify_gate").string();
        CHECK_THROWS_AS(htcp::run_experiment(htcp::parse_config_text(heavy.dump()), {}),
                        htcp::GridError);
        heavy["params"]["allow_heavy_probe"] = true;
        int rc = htcp::run_experiment(htcp::parse_config_text(heavy.dump()), {});
        CHECK((rc == 0 || rc == 2)); // gate lifted; verdict may go either way
    }
}

TEST_CASE("walk runs report the supremum decomposition") {
    // grid chosen power-of-two so the zero boundary is bit exact
    json cfg = {{"command", "walk"},
                {"family", {{"kind", "exponential"}, {"rate", 1.0}}},
                {"grid", {{"origin", -16.0}, {"step", 0.015625}, {"n_cells", 1536}}},
                {"params", {{"shift", 2.0}, {"depth", 8}}},
                {"output_dir", ""}};

    SUBCASE("drifting walk") {
        fs::path dir = fresh_dir("walk");
        cfg["output_dir"] = dir.string();
        CHECK(htcp::run_experiment(htcp::parse_config_text(cfg.dump()), {}) == 0);
        auto report = slurp_json(dir / "walk_report.json");
        double b = report.at("B_partial").get<double>();
        CHECK(b > 0.1);
        CHECK(report.at("atom").get<double>() == doctest::Approx(std::exp(-b)));
        GridDensity pi = htcp::grid_from_csv(slurp(dir / "pi.csv"));
        CHECK(pi.origin == 0.0);
        // short of lambda by the off-grid nu defect (~e^-10 per step here)
        CHECK(pi.mass() == doctest::Approx(-std::expm1(-b)).epsilon(1e-2));
        std::string per_n = slurp(dir / "per_n.csv");
        CHECK(std::count(per_n.begin(), per_n.end(), '\n') == 9); // header + 8 terms
    }

    SUBCASE("negative-only steps give the flat supremum") {
        fs::path dir = fresh_dir("walk_flat");
        cfg["family"] = {{"kind", "counterexample_g"}};
        cfg["output_dir"] = dir.string();
        CHECK(htcp::run_experiment(htcp::parse_config_text(cfg.dump()), {}) == 0);
        auto report = slurp_json(dir / "walk_report.json");
        CHECK(report.at("atom").get<double>() > 1.0 - 1e-9);
        GridDensity pi = htcp::grid_from_csv(slurp(dir / "pi.csv"));
        CHECK(pi.mass() < 1e-9);
    }
}

TEST_CASE("simulate runs are deterministic across thread counts and honor seeds") {
    json cfg = {{"command", "simulate"},
                {"family", {{"kind", "exponential"}, {"rate", 1.0}}},
                {"grid", {{"origin", -16.0}, {"step", 0.015625}, {"n_cells", 1536}}},
                {"params", {{"shift", 2.0}, {"paths", 3000}, {"barrier", 20.0}, {"seed", 5}}},
                {"output_dir", ""}};

    fs::path d1 = fresh_dir("sim1"), d4 = fresh_dir("sim4");
    cfg["output_dir"] = d1.string();
    auto parsed = htcp::parse_config_text(cfg.dump());
    htcp::RunOptions o1;
    o1.threads = 1;
    CHECK(htcp::run_experiment(parsed, o1) == 0);

    htcp::RunOptions o4;
    o4.threads = 4;
    o4.out_override = d4.string();
    CHECK(htcp::run_experiment(parsed, o4) == 0);

    CHECK(slurp(d1 / "ecdf.csv") == slurp(d4 / "ecdf.csv"));
    CHECK(slurp(d1 / "mc_report.json") == slurp(d4 / "mc_report.json"));
    CHECK(slurp_json(d1 / "mc_report.json").at("seed").get<std::uint64_t>() == 5);

    SUBCASE("a seed override changes the sample and is recorded") {
        fs::path d5 = fresh_dir("sim_seed");
        htcp::RunOptions os;
        os.out_override = d5.string();
        os.seed_override = 77;
        CHECK(htcp::run_experiment(parsed, os) == 0);
        auto rep = slurp_json(d5 / "mc_report.json");
        CHECK(rep.at("seed").get<std::uint64_t>() == 77);
        CHECK(slurp(d5 / "ecdf.csv") != slurp(d1 / "ecdf.csv"));
    }
}

TEST_CASE("series caps surface as typed exceptions for the driver to map") {
    json cfg = {{"command", "compound"},
                {"family", {{"kind", "exponential"}, {"rate", 1.0}}},
                {"grid", {{"origin", 0.0}, {"step", 0.01}, {"n_cells", 500}}},
                {"params",
                 {{"series", "poisson"}, {"lambda", 300.0}, {"tol", 1e-10}, {"term_cap", 16}}},
                {"output_dir", fresh_dir("cap").string()}};
    auto parsed = htcp::parse_config_text(cfg.dump());
    CHECK_THROWS_AS(htcp::run_experiment(parsed, {}), htcp::SeriesCapError);
}

TEST_CASE("cli maps outcomes to exit codes and error files") {
    fs::path work = fresh_dir("cli_work");

    SUBCASE("missing subcommand or config is a usage error") {
        CHECK(run_cli("", "noargs").code != 0);
        CHECK(run_cli("compound", "noconfig").code != 0);
    }

    SUBCASE("unreadable config exits 64") {
        auto r = run_cli("compound --config " + (work / "absent.json").string(), "absent");
        CHECK(r.code == 64);
        CHECK(r.err.find("error") != std::string::npos);
    }

    SUBCASE("malformed config exits 64 with a config error message") {
        fs::path cfgp = work / "bad.json";
        htcp::write_file(cfgp, "{\"command\": \"compound\"");
        auto r = run_cli("compound --config " + cfgp.string(), "badjson");
        CHECK(r.code == 64);
        CHECK(r.err.find("config error") != std::string::npos);
    }

    SUBCASE("subcommand and config command must agree") {
        fs::path cfgp = work / "mismatch.json";
        htcp::write_file(cfgp, base_compound_config((work / "mm_out").string()));
        auto r = run_cli("walk --config " + cfgp.string(), "mismatch");
        CHECK(r.code == 64);
        CHECK(r.err.find("does not match") != std::string::npos);
    }

    SUBCASE("a good run exits 0 and --out overrides the config directory") {
        fs::path cfgp = work / "good.json";
        fs::path out = work / "cli_out";
        htcp::write_file(cfgp, base_compound_config((work / "ignored").string()));
        auto r = run_cli("compound --config " + cfgp.string() + " --out " + out.string(),
                         "good");
        CHECK(r.code == 0);
        CHECK(fs::exists(out / "density.csv"));
        CHECK(fs::exists(out / "manifest.json"));
        CHECK_FALSE(fs::exists(work / "ignored"));
    }

    SUBCASE("a series cap exits 1 and names the cap in error.json") {
        fs::path cfgp = work / "cap.json";
        fs::path out = work / "cap_out";
        json cfg = {{"command", "compound"},
                    {"family", {{"kind", "exponential"}, {"rate", 1.0}}},
                    {"grid", {{"origin", 0.0}, {"step", 0.01}, {"n_cells", 500}}},
                    {"params",
                     {{"series", "poisson"}, {"lambda", 300.0}, {"term_cap", 16}}},
                    {"output_dir", out.string()}};
        htcp::write_file(cfgp, cfg.dump());
        auto r = run_cli("compound --config " + cfgp.string(), "cap");
        CHECK(r.code == 1);
        auto err = slurp_json(out / "error.json");
        CHECK(err.at("type") == "series-cap");
        CHECK(err.at("term_cap").get<int>() == 16);
        CHECK(err.at("error").get<std::string>().find("16") != std::string::npos);
    }

    SUBCASE("a failed verification exits 2") {
        fs::path cfgp = work / "vfail.json";
        json cfg = {{"command", "verify"},
                    {"family", {{"kind", "exponential"}, {"rate", 1.0}}},
                    {"grid", {{"origin", 0.0}, {"step", 0.01}, {"n_cells", 5000}}},
                    {"params",
                     {{"check", "strong_subexp"},
                      {"window", {{"x_lo", 5.0}, {"x_hi", 40.0}}}}},
                    {"output_dir", (work / "vfail_out").string()}};
        htcp::write_file(cfgp, cfg.dump());
        auto r = run_cli("verify --config " + cfgp.string(), "vfail");
        CHECK(r.code == 2);
    }
}
