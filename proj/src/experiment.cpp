#include "htcp/experiment.hpp"

#include "htcp/random_walk.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

namespace htcp {

namespace {

using nlohmann::json;

void expect_object_keys(const json& j, const std::set<std::string>& allowed, const char* what) {
    if (!j.is_object()) throw ConfigError(std::string(what) + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError(std::string(what) + ": unknown key \"" + it.key() + "\"");
}

const json& require_key(const json& j, const char* key, const char* what) {
    if (!j.contains(key))
        throw ConfigError(std::string(what) + ": missing required key \"" + key + "\"");
    return j.at(key);
}

double require_number(const json& j, const char* key, const char* what) {
    const json& v = require_key(j, key, what);
    if (!v.is_number()) throw ConfigError(std::string(what) + ": \"" + key + "\" must be a number");
    return v.get<double>();
}

double optional_number(const json& j, const char* key, double fallback, const char* what) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number())
        throw ConfigError(std::string(what) + ": \"" + key + "\" must be a number");
    return j.at(key).get<double>();
}

long long require_integer(const json& j, const char* key, const char* what) {
    const json& v = require_key(j, key, what);
    if (!v.is_number_integer())
        throw ConfigError(std::string(what) + ": \"" + key + "\" must be an integer");
    return v.get<long long>();
}

long long optional_integer(const json& j, const char* key, long long fallback, const char* what) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_integer())
        throw ConfigError(std::string(what) + ": \"" + key + "\" must be an integer");
    return j.at(key).get<long long>();
}

std::string require_string(const json& j, const char* key, const char* what) {
    const json& v = require_key(j, key, what);
    if (!v.is_string()) throw ConfigError(std::string(what) + ": \"" + key + "\" must be a string");
    return v.get<std::string>();
}

const std::set<std::string> kVerifyChecks = {
    "long_tail",      "subexp",       "nfold",         "kesten",
    "compound_levy",  "time_scaling", "negbin_levy",   "local_subexp",
    "strong_subexp",  "negbin_dual_path", "supremum_tail"};

void validate_params_shape(const std::string& command, const json& params) {
    if (command == "compound") {
        expect_object_keys(params, {"series", "lambda", "t", "alpha", "tol", "atom", "term_cap"},
                           "params");
        std::string series = require_string(params, "series", "params");
        if (series != "poisson" && series != "negbin" && series != "log")
            throw ConfigError("params: series must be poisson, negbin, or log");
        require_number(params, "lambda", "params");
        if (series == "negbin") require_number(params, "alpha", "params");
        return;
    }
    if (command == "verify") {
        expect_object_keys(params,
                           {"check", "window", "shifts", "n", "epsilon", "n_max", "x0", "lambda",
                            "t", "alpha", "c", "atom", "tol", "l1_tol", "shift", "depth",
                            "interval_width", "max_step_defect", "allow_heavy_probe",
                            "tolerances"},
                           "params");
        std::string check = require_string(params, "check", "params");
        if (!kVerifyChecks.count(check))
            throw ConfigError("params: unknown check \"" + check + "\"");
        if (check != "negbin_dual_path") {
            const json& w = require_key(params, "window", "params");
            expect_object_keys(w, {"x_lo", "x_hi", "n_points", "spacing"}, "params.window");
            require_number(w, "x_lo", "params.window");
            require_number(w, "x_hi", "params.window");
            if (w.contains("spacing")) {
                if (!w.at("spacing").is_string() ||
                    (w.at("spacing") != "geometric" && w.at("spacing") != "arithmetic"))
                    throw ConfigError("params.window: spacing must be geometric or arithmetic");
            }
        }
        if (params.contains("tolerances"))
            expect_object_keys(params.at("tolerances"),
                               {"tol_long_tail", "tol_subexp", "tol_strong", "tol_walk",
                                "trend_slack", "denom_floor", "max_excluded_fraction",
                                "series_tol", "term_cap"},
                               "params.tolerances");
        if (params.contains("allow_heavy_probe") && !params.at("allow_heavy_probe").is_boolean())
            throw ConfigError("params: allow_heavy_probe must be a boolean");
        if (params.contains("shifts")) {
            if (!params.at("shifts").is_array())
                throw ConfigError("params: shifts must be an array of numbers");
            for (const auto& s : params.at("shifts"))
                if (!s.is_number()) throw ConfigError("params: shifts must be numbers");
        }
        return;
    }
    if (command == "walk") {
        expect_object_keys(params, {"shift", "depth", "max_step_defect", "tol", "term_cap"},
                           "params");
        require_number(params, "shift", "params");
        return;
    }
    if (command == "simulate") {
        expect_object_keys(params, {"shift", "paths", "barrier", "seed"}, "params");
        require_number(params, "shift", "params");
        require_integer(params, "paths", "params");
        require_number(params, "barrier", "params");
        return;
    }
    throw ConfigError("command must be compound, verify, walk, or simulate");
}

TailWindow parse_window(const json& params) {
    const json& w = params.at("window");
    TailWindow out;
    out.x_lo = w.at("x_lo").get<double>();
    out.x_hi = w.at("x_hi").get<double>();
    out.n_points = static_cast<int>(optional_integer(w, "n_points", 64, "params.window"));
    out.spacing = (w.contains("spacing") && w.at("spacing") == "arithmetic")
                      ? TailWindow::Spacing::arithmetic
                      : TailWindow::Spacing::geometric;
    return out;
}

AsymptoticsConfig parse_tolerances(const json& params) {
    AsymptoticsConfig cfg;
    if (!params.contains("tolerances")) return cfg;
    const json& t = params.at("tolerances");
    cfg.tol_long_tail = optional_number(t, "tol_long_tail", cfg.tol_long_tail, "tolerances");
    cfg.tol_subexp = optional_number(t, "tol_subexp", cfg.tol_subexp, "tolerances");
    cfg.tol_strong = optional_number(t, "tol_strong", cfg.tol_strong, "tolerances");
    cfg.tol_walk = optional_number(t, "tol_walk", cfg.tol_walk, "tolerances");
    cfg.trend_slack = optional_number(t, "trend_slack", cfg.trend_slack, "tolerances");
    cfg.denom_floor = optional_number(t, "denom_floor", cfg.denom_floor, "tolerances");
    cfg.max_excluded_fraction =
        optional_number(t, "max_excluded_fraction", cfg.max_excluded_fraction, "tolerances");
    cfg.series_tol = optional_number(t, "series_tol", cfg.series_tol, "tolerances");
    cfg.term_cap = static_cast<int>(optional_integer(t, "term_cap", cfg.term_cap, "tolerances"));
    return cfg;
}

json tolerances_json(const AsymptoticsConfig& cfg) {
    return {{"tol_long_tail", cfg.tol_long_tail},
            {"tol_subexp", cfg.tol_subexp},
            {"tol_strong", cfg.tol_strong},
            {"tol_walk", cfg.tol_walk},
            {"trend_slack", cfg.trend_slack},
            {"denom_floor", cfg.denom_floor},
            {"max_excluded_fraction", cfg.max_excluded_fraction},
            {"series_tol", cfg.series_tol},
            {"term_cap", cfg.term_cap}};
}

// Collects outputs, writes them, and finishes with a manifest of hashes.
class OutputSet {
public:
    OutputSet(std::filesystem::path dir, std::string config_hash)
        : dir_(std::move(dir)), config_hash_(std::move(config_hash)) {
        std::filesystem::create_directories(dir_);
    }

    void add(const std::string& name, const std::string& content) {
        write_file(dir_ / name, content);
        entries_.emplace_back(name, content);
    }

    void finish() {
        std::sort(entries_.begin(), entries_.end());
        json files = json::array();
        for (const auto& [name, content] : entries_)
            files.push_back({{"name", name},
                             {"bytes", content.size()},
                             {"fnv1a64", hex64(fnv1a64(content))}});
        json manifest = {{"config_hash", config_hash_}, {"files", files}};
        write_file(dir_ / "manifest.json", manifest.dump(2) + "\n");
    }

private:
    std::filesystem::path dir_;
    std::string config_hash_;
    std::vector<std::pair<std::string, std::string>> entries_;
};

GridDensity grid_from_config(const ExperimentConfig& cfg, double shift = 0.0) {
    return discretize(*cfg.family, cfg.grid.origin, cfg.grid.step,
                      static_cast<Eigen::Index>(cfg.grid.n_cells), shift);
}

int run_compound(const ExperimentConfig& cfg, OutputSet& out) {
    const json& p = cfg.params;
    const std::string series = p.at("series").get<std::string>();
    const double lambda = p.at("lambda").get<double>();
    const double tol = optional_number(p, "tol", 1e-10, "params");
    SeriesOptions sopts{static_cast<int>(optional_integer(p, "term_cap", 512, "params"))};

    GridDensity severity = grid_from_config(cfg);
    CompoundResult res;
    if (series == "poisson") {
        res = poisson_compound(
            PoissonCompoundSpec{lambda, optional_number(p, "t", 1.0, "params"), severity, tol},
            sopts);
    } else if (series == "negbin") {
        res = negbin_compound(
            NegBinCompoundSpec{p.at("alpha").get<double>(), lambda, severity, tol}, sopts);
    } else {
        res = log_compound(
            NegBinCompoundSpec{optional_number(p, "alpha", 1.0, "params"), lambda, severity, tol},
            sopts);
    }

    json report = {{"command", "compound"},
                   {"series", series},
                   {"terms_used", res.report.terms_used},
                   {"residual_weight", res.report.residual_weight},
                   {"defect", res.report.defect},
                   {"config_hash", cfg.config_hash}};
    if (p.contains("atom")) {
        AtomPlusDensity pi = with_atom(res.density, p.at("atom").get<double>());
        report["atom"] = pi.atom;
        out.add("density.csv", to_csv(pi.density));
    } else {
        out.add("density.csv", to_csv(res.density));
    }
    out.add("report.json", report.dump(2) + "\n");
    return 0;
}

void require_square_integrable(const ExperimentConfig& cfg) {
    bool allowed = cfg.params.contains("allow_heavy_probe") &&
                   cfg.params.at("allow_heavy_probe").get<bool>();
    if (!cfg.family->square_integrable() && !allowed)
        throw GridError(
            "severity family is not square-integrable; the checked statement assumes it "
            "(set allow_heavy_probe to probe anyway)");
}

int run_verify(const ExperimentConfig& cfg, OutputSet& out) {
    const json& p = cfg.params;
    const std::string check = p.at("check").get<std::string>();
    AsymptoticsConfig acfg = parse_tolerances(p);

    json verdict = {{"command", "verify"},
                    {"check", check},
                    {"config_hash", cfg.config_hash},
                    {"tolerances", tolerances_json(acfg)}};

    auto finish_single = [&](const TailRatioReport& rep) {
        out.add("samples.csv", ratio_samples_csv(rep));
        verdict["report"] = report_json(rep);
        verdict["pass"] = rep.pass;
        out.add("verdict.json", verdict.dump(2) + "\n");
        out.finish();
        return rep.pass ? 0 : 2;
    };

    if (check == "negbin_dual_path") {
        const double alpha = require_number(p, "alpha", "params");
        const double lambda = require_number(p, "lambda", "params");
        const double tol = optional_number(p, "tol", 1e-10, "params");
        const double l1_tol = optional_number(p, "l1_tol", 1e-6, "params");
        GridDensity f = grid_from_config(cfg);
        DualPathReport rep = negbin_dual_path_check(alpha, lambda, f, tol,
                                                    SeriesOptions{acfg.term_cap});
        bool pass = rep.l1 <= l1_tol;
        verdict["l1"] = rep.l1;
        verdict["l1_tol"] = l1_tol;
        verdict["terms"] = {{"direct", rep.direct.terms_used},
                            {"inner_log", rep.inner_log.terms_used},
                            {"outer_poisson", rep.outer_poisson.terms_used}};
        verdict["pass"] = pass;
        out.add("verdict.json", verdict.dump(2) + "\n");
        out.finish();
        return pass ? 0 : 2;
    }

    TailWindow w = parse_window(p);
    verdict["window"] = window_json(w);

    if (check == "long_tail") {
        std::vector<double> shifts;
        for (const auto& s : require_key(p, "shifts", "params")) shifts.push_back(s.get<double>());
        GridDensity f = grid_from_config(cfg);
        LongTailReport rep = long_tail_check(f, shifts, w, acfg);
        json per_shift = json::array();
        for (std::size_t i = 0; i < rep.per_shift.size(); ++i) {
            out.add("samples_shift" + std::to_string(i) + ".csv",
                    ratio_samples_csv(rep.per_shift[i]));
            per_shift.push_back(report_json(rep.per_shift[i]));
        }
        verdict["per_shift"] = per_shift;
        verdict["pass"] = rep.long_tailed;
        out.add("verdict.json", verdict.dump(2) + "\n");
        out.finish();
        return rep.long_tailed ? 0 : 2;
    }
    if (check == "subexp") return finish_single(subexp_check(grid_from_config(cfg), w, acfg));
    if (check == "nfold") {
        int n = static_cast<int>(require_integer(p, "n", "params"));
        return finish_single(nfold_check(grid_from_config(cfg), n, w, acfg));
    }
    if (check == "kesten") {
        const double eps = require_number(p, "epsilon", "params");
        const int n_max = static_cast<int>(require_integer(p, "n_max", "params"));
        const double x0 = optional_number(p, "x0", 0.0, "params");
        KestenReport rep = kesten_scan(grid_from_config(cfg), eps, n_max, x0, w, acfg);
        verdict["c_min"] = rep.c_min;
        verdict["violated"] = rep.violated;
        verdict["excluded"] = rep.excluded;
        verdict["argmax_x"] = rep.argmax_x;
        verdict["argmax_n"] = rep.argmax_n;
        verdict["pass"] = !rep.violated;
        out.add("verdict.json", verdict.dump(2) + "\n");
        out.finish();
        return rep.violated ? 2 : 0;
    }
    if (check == "compound_levy") {
        require_square_integrable(cfg);
        const double lambda = require_number(p, "lambda", "params");
        return finish_single(compound_levy_ratio(grid_from_config(cfg), lambda, w, acfg));
    }
    if (check == "time_scaling") {
        require_square_integrable(cfg);
        const double lambda = require_number(p, "lambda", "params");
        const double t = require_number(p, "t", "params");
        return finish_single(time_scaling_ratio(grid_from_config(cfg), lambda, t, w, acfg));
    }
    if (check == "negbin_levy") {
        require_square_integrable(cfg);
        const double alpha = require_number(p, "alpha", "params");
        const double lambda = require_number(p, "lambda", "params");
        return finish_single(negbin_levy_ratio(grid_from_config(cfg), alpha, lambda, w, acfg));
    }
    if (check == "local_subexp") {
        const double c = require_number(p, "c", "params");
        const double atom = optional_number(p, "atom", 0.0, "params");
        AtomPlusDensity rho = with_atom(grid_from_config(cfg), atom);
        return finish_single(local_subexp_check(rho, c, w, acfg));
    }
    if (check == "strong_subexp")
        return finish_single(strong_subexp_check(grid_from_config(cfg), w, acfg));
    if (check == "supremum_tail") {
        const double shift = require_number(p, "shift", "params");
        const int depth = static_cast<int>(optional_integer(p, "depth", 200, "params"));
        SpitzerOptions sopts{optional_number(p, "max_step_defect", 1e-3, "params")};
        GridDensity sd = grid_from_config(cfg, shift);
        WalkSpec spec;
        spec.step_density = sd;
        spec.mean = cfg.family->mean() - shift;
        spec.spitzer_depth = depth;
        const Family fam = *cfg.family;
        auto rho_tail = [fam, shift](double x) { return fam.tail(x + shift); };
        WalkTailReport rep =
            supremum_tail_ratio(spec, rho_tail, w, acfg,
                                optional_number(p, "interval_width", 1.0, "params"), sopts);
        out.add("samples.csv", ratio_samples_csv(rep.density_form));
        out.add("interval_samples.csv", ratio_samples_csv(rep.interval_form));
        verdict["report"] = report_json(rep.density_form);
        verdict["interval_report"] = report_json(rep.interval_form);
        verdict["B_partial"] = rep.spitzer.B_partial;
        verdict["tail_gap"] = rep.spitzer.tail_gap;
        verdict["lambda_rw"] = rep.sup.lambda_rw;
        verdict["atom"] = rep.sup.pi.atom;
        verdict["skipped"] = rep.skipped;
        bool pass = rep.skipped || rep.density_form.pass;
        verdict["pass"] = pass;
        out.add("verdict.json", verdict.dump(2) + "\n");
        out.finish();
        return pass ? 0 : 2;
    }
    throw ConfigError("unknown verify check");
}

int run_walk(const ExperimentConfig& cfg, OutputSet& out) {
    const json& p = cfg.params;
    const double shift = p.at("shift").get<double>();
    WalkSpec spec;
    spec.step_density = grid_from_config(cfg, shift);
    spec.mean = cfg.family->mean() - shift;
    spec.spitzer_depth = static_cast<int>(optional_integer(p, "depth", 200, "params"));
    SpitzerOptions sopts{optional_number(p, "max_step_defect", 1e-3, "params")};

    SpitzerResult sr = spitzer_nu(spec, sopts);
    SupremumResult sup = supremum_from_nu(sr, optional_number(p, "tol", 1e-10, "params"),
                                          static_cast<int>(optional_integer(p, "term_cap", 512, "params")));

    std::string per_n = "n,positive_mass\n";
    for (std::size_t i = 0; i < sr.per_n_positive_mass.size(); ++i)
        per_n += std::to_string(i + 1) + "," + format_double(sr.per_n_positive_mass[i]) + "\n";

    json report = {{"command", "walk"},
                   {"B_partial", sr.B_partial},
                   {"tail_gap", std::isfinite(sr.tail_gap) ? json(sr.tail_gap) : json(nullptr)},
                   {"lambda_rw", sup.lambda_rw},
                   {"atom", sup.pi.atom},
                   {"depth", spec.spitzer_depth},
                   {"mean", spec.mean},
                   {"nu_defect", sr.nu.defect},
                   {"terms_used", sup.report.terms_used},
                   {"config_hash", cfg.config_hash}};
    out.add("nu.csv", to_csv(sr.nu));
    out.add("pi.csv", to_csv(sup.pi.density));
    out.add("per_n.csv", per_n);
    out.add("walk_report.json", report.dump(2) + "\n");
    return 0;
}

int run_simulate(const ExperimentConfig& cfg, const RunOptions& opts, OutputSet& out) {
    const json& p = cfg.params;
    const double shift = p.at("shift").get<double>();
    WalkSpec spec;
    spec.step_density = grid_from_config(cfg, shift);
    spec.mean = cfg.family->mean() - shift;
    spec.mc_paths = p.at("paths").get<long long>();
    spec.mc_barrier = p.at("barrier").get<double>();
    spec.seed = opts.seed_override ? *opts.seed_override
                                   : static_cast<std::uint64_t>(
                                         optional_integer(p, "seed", 0, "params"));

    int threads = opts.threads;
    if (threads <= 0) {
        if (const char* env = std::getenv("HTCP_THREADS")) threads = std::atoi(env);
        if (threads <= 0) threads = 1;
    }

    McSupremumResult mc = montecarlo_supremum(spec, StepModel{*cfg.family, shift}, threads);
    json report = {{"command", "simulate"},
                   {"paths", mc.paths},
                   {"barrier", mc.barrier},
                   {"seed", spec.seed},
                   {"p_positive", mc.p_positive},
                   {"bias_proxy", mc.bias_proxy},
                   {"config_hash", cfg.config_hash}};
    out.add("ecdf.csv", ecdf_csv(mc));
    out.add("mc_report.json", report.dump(2) + "\n");
    return 0;
}

} // namespace

ExperimentConfig parse_config_text(const std::string& raw) {
    json j;
    try {
        j = json::parse(raw);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    expect_object_keys(j, {"command", "family", "grid", "params", "output_dir"}, "config");

    ExperimentConfig cfg;
    cfg.command = require_string(j, "command", "config");
    if (cfg.command != "compound" && cfg.command != "verify" && cfg.command != "walk" &&
        cfg.command != "simulate")
        throw ConfigError("config: command must be compound, verify, walk, or simulate");

    try {
        cfg.family = Family::from_json(require_key(j, "family", "config"));
    } catch (const GridError& e) {
        throw ConfigError(std::string("config.family: ") + e.what());
    }

    const json& g = require_key(j, "grid", "config");
    expect_object_keys(g, {"origin", "step", "n_cells"}, "config.grid");
    cfg.grid.origin = require_number(g, "origin", "config.grid");
    cfg.grid.step = require_number(g, "step", "config.grid");
    cfg.grid.n_cells = require_integer(g, "n_cells", "config.grid");
    if (!(cfg.grid.step > 0)) throw ConfigError("config.grid: step must be positive");
    if (cfg.grid.n_cells < 1) throw ConfigError("config.grid: n_cells must be at least 1");

    cfg.params = require_key(j, "params", "config");
    validate_params_shape(cfg.command, cfg.params);

    if (j.contains("output_dir")) {
        if (!j.at("output_dir").is_string())
            throw ConfigError("config: output_dir must be a string");
        cfg.output_dir = j.at("output_dir").get<std::string>();
    }
    cfg.config_hash = hex64(fnv1a64(raw));
    return cfg;
}

std::string resolve_output_dir(const ExperimentConfig& cfg, const RunOptions& opts) {
    return opts.out_override.empty() ? cfg.output_dir : opts.out_override;
}

int run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
    OutputSet out(resolve_output_dir(cfg, opts), cfg.config_hash);
    if (cfg.command == "compound") {
        int rc = run_compound(cfg, out);
        out.finish();
        return rc;
    }
    if (cfg.command == "verify") {
        return run_verify(cfg, out); // writes its own manifest (several exits)
    }
    if (cfg.command == "walk") {
        int rc = run_walk(cfg, out);
        out.finish();
        return rc;
    }
    int rc = run_simulate(cfg, opts, out);
    out.finish();
    return rc;
}

} // namespace htcp
