#include "htcp/random_walk.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace htcp {

namespace {

Eigen::Index zero_boundary_index(const GridDensity& g, const char* who) {
    if (g.origin >= 0) return 0;
    auto z0 = static_cast<Eigen::Index>(std::llround(-g.origin / g.step));
    if (z0 < 0 || z0 > g.cells() ||
        std::abs(g.origin + static_cast<double>(z0) * g.step) > 1e-9 * g.step)
        throw GridError(std::string(who) + ": grid needs a cell boundary exactly at 0");
    return z0;
}

void validate_walk(const WalkSpec& spec, const char* who) {
    detail::check_finite_nonneg(spec.step_density, who);
    if (!spec.step_density.cells()) throw GridError(std::string(who) + ": empty step density");
    if (!(spec.mean < 0) || !std::isfinite(spec.mean))
        throw GridError(std::string(who) + ": step mean must be negative and finite");
    if (spec.spitzer_depth < 1) throw GridError(std::string(who) + ": depth must be at least 1");
    zero_boundary_index(spec.step_density, who);
}

// Power-law extrapolation of the harmonic-series tail from its last five
// terms a_n = P(S_n > 0)/n: fit log a = log A - gamma log n and integrate
// A n^-gamma beyond the truncation depth.
double extrapolate_tail_gap(const std::vector<double>& per_n) {
    const std::size_t n = per_n.size();
    if (n < 5) return 0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = n - 5; k < n; ++k) {
        double an = per_n[k] / static_cast<double>(k + 1);
        if (!(an > 0)) return 0; // positive mass already dead; nothing beyond
        double lx = std::log(static_cast<double>(k + 1));
        double ly = std::log(an);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    double slope = (5 * sxy - sx * sy) / (5 * sxx - sx * sx);
    double gamma = -slope;
    double log_a = (sy - slope * sx) / 5;
    if (!(gamma > 1)) return std::numeric_limits<double>::infinity();
    return std::exp(log_a) * std::pow(static_cast<double>(n), 1.0 - gamma) / (gamma - 1.0);
}

} // namespace

SpitzerResult spitzer_nu(const WalkSpec& spec, const SpitzerOptions& opts) {
    validate_walk(spec, "spitzer_nu");
    const GridDensity& rho = spec.step_density;
    if (rho.total() > 1.0 + 1e-9) throw GridError("spitzer_nu: step density mass exceeds 1");
    const Eigen::Index z0 = zero_boundary_index(rho, "spitzer_nu");
    const SupportCap cap = SupportCap::window(rho.origin, rho.right_edge());

    GridDensity acc; // nu accumulated on the full two-sided grid
    acc.origin = rho.origin;
    acc.step = rho.step;
    acc.values.setZero(rho.cells());
    double acc_defect = 0;

    SpitzerResult out;
    out.per_n_positive_mass.reserve(static_cast<std::size_t>(spec.spitzer_depth));

    GridDensity power = rho;
    for (int n = 1; n <= spec.spitzer_depth; ++n) {
        if (n > 1) {
            power = convolve(power, rho, cap);
            if (power.cells() != rho.cells() ||
                std::abs(power.origin - rho.origin) > 1e-9 * rho.step)
                throw ComputationError("spitzer_nu: power grid drifted off the step grid");
        }
        if (power.defect > opts.max_step_defect)
            throw ComputationError("spitzer_nu: support overflow at step " + std::to_string(n) +
                                   ": off-grid mass " + std::to_string(power.defect) +
                                   " exceeds bound " + std::to_string(opts.max_step_defect));
        GridDensity pos = restrict_positive(power);
        const double pn = pos.mass() + power.defect;
        out.per_n_positive_mass.push_back(pn);
        acc.values += pos.values / static_cast<double>(n);
        acc_defect += power.defect / static_cast<double>(n);
        out.B_partial += pn / static_cast<double>(n);
    }

    // The late terms must decay for the truncation to mean anything; growth
    // signals a grid too coarse or too narrow for the walk. Terms below 1e-12
    // are spectral round-off, not signal; their ordering is meaningless and
    // their harmonic total stays below depth * 1e-12.
    const std::size_t m = out.per_n_positive_mass.size();
    if (m >= 6) {
        for (std::size_t k = m - 5; k < m; ++k) {
            if (out.per_n_positive_mass[k] > 1e-12 &&
                out.per_n_positive_mass[k] >
                    out.per_n_positive_mass[k - 1] * (1.0 + 1e-9) + 1e-15)
                throw ComputationError(
                    "spitzer_nu: late positive-mass terms are non-monotone (grid too coarse)");
        }
    }

    out.tail_gap = extrapolate_tail_gap(out.per_n_positive_mass);
    out.nu = slice(acc, z0, acc.cells() - z0);
    out.nu.origin = 0.0; // boundary is bit-aligned; pin it
    out.nu.defect = acc_defect;
    return out;
}

SupremumResult supremum_from_nu(const SpitzerResult& sr, double series_tol, int term_cap) {
    SupremumResult out;
    out.source = SupremumSource::spitzer;
    if (!(sr.B_partial > 0)) {
        // No positive ladder at all: the supremum is identically 0.
        out.pi.atom = 1.0;
        out.pi.density = sr.nu;
        if (out.pi.density.cells()) out.pi.density.values.setZero();
        out.pi.density.defect = 0;
        out.lambda_rw = 0;
        return out;
    }
    GridDensity phi = sr.nu;
    phi.values /= sr.B_partial;
    phi.defect /= sr.B_partial;
    CompoundResult p =
        poisson_compound(PoissonCompoundSpec{sr.B_partial, 1.0, phi, series_tol},
                         SeriesOptions{term_cap});
    out.pi = with_atom(p.density, std::exp(-sr.B_partial));
    out.lambda_rw = -std::expm1(-sr.B_partial);
    out.report = p.report;
    return out;
}

SupremumResult supremum_from_ladder(const GridDensity& f_plus, double lambda_rw,
                                    double series_tol, int term_cap) {
    if (!(lambda_rw > 0) || !(lambda_rw < 1))
        throw GridError("supremum_from_ladder: lambda must lie in (0, 1)");
    CompoundResult q = negbin_compound(NegBinCompoundSpec{1.0, lambda_rw, f_plus, series_tol},
                                       SeriesOptions{term_cap});
    SupremumResult out;
    out.source = SupremumSource::ladder;
    out.pi = with_atom(q.density, 1.0 - lambda_rw);
    out.lambda_rw = lambda_rw;
    out.report = q.report;
    return out;
}

WalkTailReport supremum_tail_ratio(const WalkSpec& spec,
                                   const std::function<double(double)>& rho_tail,
                                   const TailWindow& w, const AsymptoticsConfig& cfg,
                                   double interval_width, const SpitzerOptions& opts) {
    WalkTailReport rep;
    rep.spitzer = spitzer_nu(spec, opts);
    rep.sup = supremum_from_nu(rep.spitzer, cfg.series_tol, cfg.term_cap);

    // A genuinely one-sided walk still accumulates ~1e-16 of round-off per
    // convolution into B; anything below this floor is numerically zero.
    if (!(rep.spitzer.B_partial > 1e-12)) {
        rep.skipped = true;
        rep.density_form.quantity = "supremum_tail_ratio";
        rep.density_form.window = w;
        rep.density_form.pass = true;
        rep.density_form.verdict = "no-positive-tail";
        rep.interval_form = rep.density_form;
        rep.interval_form.quantity = "supremum_interval_ratio";
        return rep;
    }

    const GridDensity& d = rep.sup.pi.density; // already carries the 1 - e^-B factor
    const double drift = std::abs(spec.mean);
    auto idx = window_cells(d, w);

    std::vector<double> xs, num, den;
    for (auto i : idx) {
        double x = d.midpoint(i);
        xs.push_back(x);
        num.push_back(drift * d.values[i]);
        den.push_back(rho_tail(x));
    }
    rep.density_form = make_ratio_report("supremum_tail_ratio", w, xs, num, den, 1.0,
                                         cfg.tol_walk, cfg, "tail-law-ok", "tail-law-off");

    const double c_eff =
        static_cast<double>(std::max<long long>(1, std::llround(interval_width / d.step))) *
        d.step;
    std::vector<double> xs2, num2, den2;
    for (auto i : idx) {
        double x = d.left_edge(i);
        if (x + c_eff > d.right_edge() + 1e-9 * d.step) continue;
        xs2.push_back(x);
        num2.push_back(drift * interval_mass(rep.sup.pi, x, c_eff));
        den2.push_back(c_eff * rho_tail(x));
    }
    rep.interval_form =
        make_ratio_report("supremum_interval_ratio(c=" + std::to_string(c_eff) + ")", w, xs2,
                          num2, den2, 1.0, cfg.tol_walk, cfg, "tail-law-ok", "tail-law-off");
    return rep;
}

McSupremumResult montecarlo_supremum(const WalkSpec& spec, const StepModel& model, int threads) {
    validate_walk(spec, "montecarlo_supremum");
    if (spec.mc_paths < 1) throw GridError("montecarlo_supremum: needs at least one path");
    if (!(spec.mc_barrier > 0)) throw GridError("montecarlo_supremum: barrier must be positive");

    const std::int64_t paths = spec.mc_paths;
    const double barrier = spec.mc_barrier;
    const int n_threads =
        std::max(1, std::min<int>(threads, static_cast<int>(std::thread::hardware_concurrency()
                                                                ? std::thread::hardware_concurrency()
                                                                : 1)));

    McSupremumResult out;
    out.maxima.resize(static_cast<std::size_t>(paths));
    out.paths = paths;
    out.barrier = barrier;
    out.threads = n_threads;

    constexpr std::int64_t path_step_cap = 10000000;
    std::atomic<bool> capped{false};

    auto worker = [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t p = lo; p < hi; ++p) {
            CounterRng rng(spec.seed, static_cast<std::uint64_t>(p));
            double s = 0, m = 0;
            std::int64_t steps = 0;
            while (s >= -barrier) {
                s += model.family.sample(rng) - model.shift;
                if (s > m) m = s;
                if (++steps > path_step_cap) {
                    capped.store(true);
                    break;
                }
            }
            out.maxima[static_cast<std::size_t>(p)] = m;
        }
    };

    if (n_threads == 1) {
        worker(0, paths);
    } else {
        std::vector<std::thread> pool;
        std::int64_t chunk = (paths + n_threads - 1) / n_threads;
        for (int t = 0; t < n_threads; ++t) {
            std::int64_t lo = t * chunk;
            std::int64_t hi = std::min(paths, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(worker, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    if (capped.load())
        throw ComputationError("montecarlo_supremum: a path exceeded the 1e7 step cap");

    std::sort(out.maxima.begin(), out.maxima.end());
    std::int64_t positive = 0, small = 0;
    for (double m : out.maxima) {
        if (m > 0) ++positive;
        if (m <= barrier / 10.0) ++small;
    }
    out.p_positive = static_cast<double>(positive) / static_cast<double>(paths);
    out.bias_proxy = static_cast<double>(small) / static_cast<double>(paths);
    return out;
}

double kolmogorov_distance(const McSupremumResult& mc, const AtomPlusDensity& pi, double x_cap) {
    if (mc.maxima.empty()) throw GridError("kolmogorov_distance: empty sample");
    const GridDensity& d = pi.density;

    // CDF of pi at x >= 0: atom plus cumulative density mass, linear within
    // a cell because the density is cellwise constant.
    std::vector<double> cum(static_cast<std::size_t>(d.cells()) + 1, 0.0);
    for (Eigen::Index i = 0; i < d.cells(); ++i)
        cum[static_cast<std::size_t>(i) + 1] = cum[static_cast<std::size_t>(i)] + d.step * d.values[i];
    auto cdf = [&](double x) {
        if (x < d.origin) return pi.atom;
        if (x >= d.right_edge()) return pi.atom + cum.back();
        auto i = d.cell_index(x);
        return pi.atom + cum[static_cast<std::size_t>(i)] + d.values[i] * (x - d.left_edge(i));
    };

    // Walk tied samples as one block: the supremum has an atom at 0, so many
    // samples coincide there and the empirical CDF must be compared once per
    // distinct value, against the CDF and its left limit.
    const double n = static_cast<double>(mc.maxima.size());
    const std::size_t total = mc.maxima.size();
    double dist = 0;
    std::size_t i = 0;
    while (i < total) {
        double x = mc.maxima[i];
        if (x > x_cap) break;
        std::size_t j = i;
        while (j < total && mc.maxima[j] == x) ++j;
        double fx = cdf(x);
        double f_minus = x == 0.0 ? 0.0 : fx; // the atom is the only jump
        dist = std::max(dist, std::abs(static_cast<double>(j) / n - fx));
        dist = std::max(dist, std::abs(static_cast<double>(i) / n - f_minus));
        i = j;
    }
    return dist;
}

StepGrid make_step_grid(const Family& family, double shift, double target_step, double x_max,
                        int depth) {
    if (!(shift > 0) || !std::isfinite(shift))
        throw GridError("make_step_grid: shift must be positive");
    if (!(target_step > 0)) throw GridError("make_step_grid: step must be positive");
    if (depth < 1) throw GridError("make_step_grid: depth must be at least 1");
    if (!(x_max > 0)) throw GridError("make_step_grid: x_max must be positive");

    const auto m = std::max<long long>(1, std::llround(shift / target_step));
    const double h = shift / static_cast<double>(m);
    const double shift_eff = static_cast<double>(m) * h;
    const Eigen::Index left_cells = static_cast<Eigen::Index>(m) * depth;
    const double origin = -static_cast<double>(left_cells) * h;
    const auto right_cells = static_cast<Eigen::Index>(std::ceil(x_max / h - 1e-9));

    StepGrid out;
    out.density = discretize(family, origin, h, left_cells + right_cells, shift_eff);
    out.shift_eff = shift_eff;
    out.mean = family.mean() - shift_eff;
    return out;
}

} // namespace htcp
