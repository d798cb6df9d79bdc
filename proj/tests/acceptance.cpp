// Acceptance gate: one self-contained scenario per line, every tolerance
// pinned here. Exit status is the number of failed criteria.

#include "htcp/asymptotics.hpp"
#include "htcp/compound.hpp"
#include "htcp/convolution.hpp"
#include "htcp/family.hpp"
#include "htcp/grid_density.hpp"
#include "htcp/random_walk.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

using namespace htcp;

namespace {

int g_failures = 0;

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double secs() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

void report(int id, bool pass, const std::string& detail) {
    if (!pass) ++g_failures;
    std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

template <typename Fn>
void criterion(int id, Fn&& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(id, false, fmt("threw: %s", e.what()));
    }
}

TailWindow window(double lo, double hi, int n = 64) {
    TailWindow w;
    w.x_lo = lo;
    w.x_hi = hi;
    w.n_points = n;
    return w;
}

void c1_poisson_exponential_oracle() {
    Timer t;
    auto sev = discretize(Family::exponential(1.0), 0.0, 1e-3, 22000);
    auto res = poisson_compound(PoissonCompoundSpec{1.0, 1.0, sev, 1e-13});
    double max_rel = 0;
    for (Eigen::Index i = 0; i < res.density.cells(); ++i) {
        double x = res.density.midpoint(i);
        if (x < 0.1 || x > 20.0) continue;
        double want = oracle::poisson_exp_density(1.0, x);
        max_rel = std::max(max_rel, std::abs(res.density.values[i] - want) / want);
    }
    double secs = t.secs();
    report(1, max_rel < 1e-6 && secs < 5.0,
           fmt("poisson(exp) vs Bessel series: max rel err %.3g (tol 1e-6) on [0.1,20] "
               "step 1e-3, %.2fs (budget 5s)",
               max_rel, secs));
}

void c2_geometric_exponential_oracle() {
    Timer t;
    auto sev = discretize(Family::exponential(1.0), 0.0, 1e-3, 22000);
    auto res = negbin_compound(NegBinCompoundSpec{1.0, 0.5, sev, 1e-12});
    double max_rel = 0;
    for (Eigen::Index i = 0; i < res.density.cells(); ++i) {
        double x = res.density.midpoint(i);
        if (x > 20.0) continue;
        double want = 0.5 * std::exp(-0.5 * x);
        max_rel = std::max(max_rel, std::abs(res.density.values[i] - want) / want);
    }
    double secs = t.secs();
    report(2, max_rel < 1e-6 && secs < 2.0,
           fmt("negbin(1,0.5)(exp) vs 0.5e^{-x/2}: max rel err %.3g (tol 1e-6) on [0,20], "
               "%.2fs (budget 2s)",
               max_rel, secs));
}

void c3_dual_path_identity() {
    Timer t;
    std::vector<GridDensity> severities = {
        discretize(Family::exponential(1.0), 0.0, 0.01, 6000),
        discretize(Family::pareto_lomax(2.5, 1.0), 0.0, 0.01, 6000)};
    double max_l1 = 0;
    for (const auto& f : severities)
        for (double alpha : {0.5, 1.0, 2.7})
            for (double lambda : {0.3, 0.5, 0.6}) {
                auto rep = negbin_dual_path_check(alpha, lambda, f, 1e-10);
                max_l1 = std::max(max_l1, rep.l1);
            }
    double secs = t.secs();
    report(3, max_l1 < 1e-6 && secs < 60.0,
           fmt("direct negbin vs poisson(log) composition, 18 cases: max L1 %.3g (tol 1e-6), "
               "%.1fs (budget 60s)",
               max_l1, secs));
}

void c4_levy_density_limit(const GridDensity& pareto_wide) {
    Timer t;
    auto rep = compound_levy_ratio(pareto_wide, 1.0, window(100.0, 800.0));
    double secs = t.secs();
    bool pass = rep.limit_estimate >= 0.95 && rep.limit_estimate <= 1.05 && rep.trend_ok &&
                rep.window_valid && secs < 120.0;
    report(4, pass,
           fmt("(1-e^-l)p/(l*phi) on pareto(2.5), window [100,800]: limit %.4f (band "
               "[0.95,1.05]), trend %s, %.1fs (budget 120s)",
               rep.limit_estimate, rep.trend_ok ? "ok" : "broken", secs));
}

void c5_time_scaling(const GridDensity& pareto_wide) {
    Timer t;
    bool pass = true;
    std::string parts;
    for (double tt : {0.5, 2.0}) {
        auto rep = time_scaling_ratio(pareto_wide, 1.0, tt, window(100.0, 800.0));
        bool ok = rep.limit_estimate >= 0.95 && rep.limit_estimate <= 1.05 && rep.trend_ok;
        pass = pass && ok;
        parts += fmt("t=%.1f limit %.4f; ", tt, rep.limit_estimate);
    }
    auto unit = time_scaling_ratio(pareto_wide, 1.0, 1.0, window(100.0, 800.0));
    bool exact = std::abs(unit.limit_estimate - 1.0) <= 1e-12 && unit.max_abs_dev <= 1e-12;
    pass = pass && exact;
    report(5, pass,
           fmt("p^t vs t-scaled p on pareto(2.5): %st=1 dev %.2g (tol 1e-12), %.1fs", parts.c_str(),
               unit.max_abs_dev, t.secs()));
}

void c6_definitional_verdicts(const GridDensity& pareto_wide) {
    Timer t;
    auto sub_p = subexp_check(pareto_wide, window(100.0, 800.0));
    // The weibull(0.5) self-conv ratio approaches 2 like 2/sqrt(x), entering
    // the 5% band only past x ~ 400; spectral round-off caps usable cells
    // near x ~ 700, so the window sits in between.
    auto weib = discretize(Family::weibull(0.5, 1.0), 0.0, 0.05, 28000);
    auto sub_w = subexp_check(weib, window(300.0, 700.0));
    auto expf = discretize(Family::exponential(1.0), 0.0, 0.05, 1200);
    auto sub_e = subexp_check(expf, window(5.0, 40.0));
    bool exp_rejected = !sub_e.pass && sub_e.verdict != "subexponential";
    auto lt = long_tail_check(expf, {1.0}, window(5.0, 40.0));
    double shift_ratio = lt.per_shift.at(0).limit_estimate;
    bool lt_ok = !lt.long_tailed && std::abs(shift_ratio - std::exp(-1.0)) < 1e-9;
    bool pass = sub_p.verdict == "subexponential" && sub_w.verdict == "subexponential" &&
                exp_rejected && lt_ok;
    report(6, pass,
           fmt("verdicts: pareto %s, weibull %s (limit %.4f), exp rejected as %s; exp shift "
               "ratio %.12f vs e^-1 within 1e-9: %s; %.1fs",
               sub_p.verdict.c_str(), sub_w.verdict.c_str(), sub_w.limit_estimate,
               sub_e.verdict.c_str(), shift_ratio, lt_ok ? "yes" : "no", t.secs()));
}

void c7_kesten_and_blowup(const GridDensity& pareto_wide) {
    Timer t;
    auto scan = kesten_scan(pareto_wide, 0.1, 8, 50.0, window(55.0, 1500.0));
    bool finite_c = std::isfinite(scan.c_min) && scan.c_min > 0.0 && !scan.violated;

    auto fam = Family::mixture({{0.5, Family::counterexample_g()},
                                {0.5, Family::pareto_lomax(2.5, 1.0)}});
    double prev_f = 0, prev_p1 = 0, prev_p2 = 0;
    bool increasing = true;
    for (double h : {1e-2, 5e-3, 2.5e-3}) {
        auto f = discretize(fam, 0.0, h, static_cast<Eigen::Index>(std::llround(8.0 / h)));
        auto p = poisson_compound(PoissonCompoundSpec{1.0, 1.0, f, 1e-10});
        double fv = f.values[f.cell_index(1.0 + h / 4)];
        double p1 = p.density.values[p.density.cell_index(1.0 + h / 4)];
        double p2 = p.density.values[p.density.cell_index(2.0 + h / 4)];
        increasing = increasing && fv > prev_f && p1 > prev_p1 && p2 > prev_p2;
        prev_f = fv;
        prev_p1 = p1;
        prev_p2 = p2;
    }
    report(7, finite_c && increasing,
           fmt("pareto scan: C_min %.3f finite, no violation; singular mixture cells at 1 and 2 "
               "grow under refinement (f(1) -> %.2f, p(1) -> %.3f, p(2) -> %.4f): %s; %.1fs",
               scan.c_min, prev_f, prev_p1, prev_p2, increasing ? "yes" : "no", t.secs()));
}

void c8_walk_dual_construction() {
    Timer t;
    auto sg = make_step_grid(Family::exponential(1.0), 2.0, 0.0025, 32.0, 80);
    WalkSpec spec;
    spec.step_density = sg.density;
    spec.mean = sg.mean;
    spec.spitzer_depth = 80;
    auto sr = spitzer_nu(spec);

    double max_gamma_err = 0;
    for (int n = 1; n <= 20; ++n)
        max_gamma_err =
            std::max(max_gamma_err, std::abs(sr.per_n_positive_mass[static_cast<std::size_t>(n - 1)] -
                                             oracle::gamma_tail(n, 2.0 * n)));

    auto sup = supremum_from_nu(sr);
    spec.mc_paths = 1000000;
    spec.mc_barrier = 40.0;
    spec.seed = 2026;
    auto mc = montecarlo_supremum(spec, StepModel{Family::exponential(1.0), 2.0}, 8);
    double ks = kolmogorov_distance(mc, sup.pi);
    double secs = t.secs();
    report(8, ks < 0.01 && max_gamma_err < 1e-6 && secs < 600.0,
           fmt("shifted-exp walk: KS(pi, 1e6-path MC) %.5f (tol 0.01), P(S_n>0) vs incomplete "
               "gamma max err %.2g (tol 1e-6), %.1fs (budget 600s)",
               ks, max_gamma_err, secs));
}

void c9_walk_tail_law() {
    Timer t;
    double limit200 = 0, limit400 = 0, dev200 = 0, dev400 = 0;
    bool trend_ok = true;
    for (int depth : {200, 400}) {
        auto sg = make_step_grid(Family::pareto_lomax(2.5, 1.0), 5.0 / 3.0, 0.05, 1000.0, depth);
        WalkSpec spec;
        spec.step_density = sg.density;
        spec.mean = sg.mean;
        spec.spitzer_depth = depth;
        auto rep = supremum_tail_ratio(
            spec, [](double x) { return Family::pareto_lomax(2.5, 1.0).tail(x + 5.0 / 3.0); },
            window(50.0, 400.0));
        if (depth == 200) {
            limit200 = rep.density_form.limit_estimate;
            dev200 = rep.density_form.max_abs_dev;
            trend_ok = rep.density_form.trend_ok;
        } else {
            limit400 = rep.density_form.limit_estimate;
            dev400 = rep.density_form.max_abs_dev;
        }
    }
    double secs = t.secs();
    bool pass = limit200 >= 0.8 && limit200 <= 1.2 && dev400 <= dev200 + 1e-12 && secs < 900.0;
    report(9, pass,
           fmt("(1-e^-B)p|EX|/rho-tail on pareto(2.5) walk, window [50,400], depth 200: limit "
               "%.4f (band [0.8,1.2], trend %s), dev %.4f -> %.4f at depth 400 (nonincreasing: "
               "%s, limit there %.4f), %.1fs (budget 900s)",
               limit200, trend_ok ? "ok" : "broken", dev200, dev400,
               dev400 <= dev200 + 1e-12 ? "yes" : "no", limit400, secs));
}

void c10_kernel_properties() {
    Timer t;
    double worst_mass = 0, worst_comm = 0, worst_assoc = 0, worst_power = 0;
    for (int seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        auto random_grid = [&]() {
            GridDensity d;
            d.origin = -2.0 + 4.0 * u(rng);
            d.step = 0.05 + 0.5 * u(rng);
            d.values.resize(64);
            for (auto& v : d.values) v = u(rng);
            d.values /= d.values.sum() * d.step; // unit mass
            return d;
        };
        GridDensity a = random_grid(), b = random_grid(), c = random_grid();
        b.step = a.step;
        c.step = a.step;

        auto ab = convolve(a, b);
        worst_mass = std::max(worst_mass, std::abs(ab.mass() - a.mass() * b.mass()));
        auto ba = convolve(b, a);
        for (Eigen::Index i = 0; i < ab.cells(); ++i)
            worst_comm = std::max(worst_comm, std::abs(ab.values[i] - ba.values[i]));
        auto l = convolve(ab, c), r = convolve(a, convolve(b, c));
        for (Eigen::Index i = 0; i < l.cells(); ++i)
            worst_assoc = std::max(worst_assoc, std::abs(l.values[i] - r.values[i]));

        auto p5 = conv_power(a, 5);
        auto chain = convolve(convolve(convolve(convolve(a, a), a), a), a);
        for (Eigen::Index i = 0; i < p5.cells(); ++i)
            worst_power = std::max(worst_power, std::abs(p5.values[i] - chain.values[i]));
    }
    double secs = t.secs();
    bool pass = worst_mass < 1e-12 && worst_comm < 1e-12 && worst_assoc < 1e-10 &&
                worst_power < 1e-8 && secs < 30.0;
    report(10, pass,
           fmt("100 random 64-cell grids: mass gap %.2g (1e-12), commutativity %.2g (1e-12), "
               "associativity %.2g (1e-10), binary-vs-chained power %.2g (1e-8), %.1fs "
               "(budget 30s)",
               worst_mass, worst_comm, worst_assoc, worst_power, secs));
}

} // namespace

int main() {
    std::printf("acceptance run: 10 criteria\n");
    criterion(1, c1_poisson_exponential_oracle);
    criterion(2, c2_geometric_exponential_oracle);
    criterion(3, c3_dual_path_identity);

    GridDensity pareto_wide = discretize(Family::pareto_lomax(2.5, 1.0), 0.0, 0.05, 40000);
    criterion(4, [&] { c4_levy_density_limit(pareto_wide); });
    criterion(5, [&] { c5_time_scaling(pareto_wide); });
    criterion(6, [&] { c6_definitional_verdicts(pareto_wide); });
    criterion(7, [&] { c7_kesten_and_blowup(pareto_wide); });
    criterion(8, c8_walk_dual_construction);
    criterion(9, c9_walk_tail_law);
    criterion(10, c10_kernel_properties);

    std::printf("%d of 10 criteria passed\n", 10 - g_failures);
    return g_failures;
}
