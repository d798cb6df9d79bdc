#include "htcp/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace htcp {

namespace {

// Cell value at the cell whose midpoint is `pos`, resolved by index
// arithmetic so aligned grids hit the intended cell exactly.
double value_at_midpoint(const GridDensity& g, double pos) {
    auto i = static_cast<Eigen::Index>(std::llround((pos - g.origin) / g.step - 0.5));
    if (i < 0 || i >= g.cells())
        throw GridError("ratio sampling: position outside grid support");
    return g.values[i];
}

std::string format_scalar(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

} // namespace

std::vector<Eigen::Index> window_cells(const GridDensity& g, const TailWindow& w,
                                       double probe_margin) {
    if (!(w.x_lo > 0) || !(w.x_hi > w.x_lo))
        throw GridError("tail window: requires 0 < x_lo < x_hi");
    if (w.n_points < 8) throw GridError("tail window: needs at least 8 points");
    if (!g.cells()) throw GridError("tail window: empty grid");
    if (w.x_hi + probe_margin > g.right_edge() + 1e-9 * g.step)
        throw GridError("tail window: window extends past grid support");
    if (w.x_lo < g.origin) throw GridError("tail window: x_lo below grid origin");

    std::vector<Eigen::Index> idx;
    idx.reserve(static_cast<std::size_t>(w.n_points));
    const double m = w.n_points - 1;
    for (int j = 0; j < w.n_points; ++j) {
        double x;
        if (w.spacing == TailWindow::Spacing::geometric) {
            x = w.x_lo * std::pow(w.x_hi / w.x_lo, j / m);
        } else {
            x = w.x_lo + (w.x_hi - w.x_lo) * (j / m);
        }
        auto i = g.cell_index(x);
        if (idx.empty() || i != idx.back()) idx.push_back(i);
    }
    if (idx.size() < 8)
        throw GridError("tail window: fewer than 8 distinct cells; widen the window or refine the grid");
    return idx;
}

TailRatioReport make_ratio_report(std::string quantity, const TailWindow& w,
                                  const std::vector<double>& xs, const std::vector<double>& num,
                                  const std::vector<double>& den, double expected_limit,
                                  double rel_tol, const AsymptoticsConfig& cfg,
                                  const std::string& yes_verdict, const std::string& no_verdict) {
    TailRatioReport rep;
    rep.quantity = std::move(quantity);
    rep.window = w;
    rep.expected_limit = expected_limit;
    rep.rel_tol = rel_tol;

    const std::size_t attempted = xs.size();
    for (std::size_t i = 0; i < attempted; ++i) {
        double r = num[i] / den[i];
        if (!(den[i] > cfg.denom_floor) || !std::isfinite(r)) {
            ++rep.excluded;
            continue;
        }
        rep.samples.push_back({xs[i], r});
    }

    const std::size_t kept = rep.samples.size();
    rep.window_valid = kept >= 8 && attempted > 0 &&
                       rep.excluded <= cfg.max_excluded_fraction * static_cast<double>(attempted);
    if (kept == 0) {
        rep.verdict = "window-invalid";
        return rep;
    }

    // Last-quartile median as the limit estimate.
    const std::size_t q3 = (3 * kept) / 4;
    std::vector<double> tail_ratios;
    tail_ratios.reserve(kept - q3);
    for (std::size_t i = q3; i < kept; ++i) tail_ratios.push_back(rep.samples[i].ratio);
    std::sort(tail_ratios.begin(), tail_ratios.end());
    const std::size_t t = tail_ratios.size();
    rep.limit_estimate =
        (t % 2) ? tail_ratios[t / 2] : 0.5 * (tail_ratios[t / 2 - 1] + tail_ratios[t / 2]);

    rep.max_abs_dev = 0;
    for (std::size_t i = q3; i < kept; ++i)
        rep.max_abs_dev = std::max(rep.max_abs_dev, std::abs(rep.samples[i].ratio - rep.limit_estimate));

    // Per-quartile max deviations from the limit, nonincreasing with slack.
    // The absolute floor keeps exact-ratio cases (deviations at round-off
    // level) from failing on noise ordering.
    double dev[4] = {0, 0, 0, 0};
    for (int q = 0; q < 4; ++q) {
        std::size_t b0 = (static_cast<std::size_t>(q) * kept) / 4;
        std::size_t b1 = (static_cast<std::size_t>(q + 1) * kept) / 4;
        for (std::size_t i = b0; i < b1; ++i)
            dev[q] = std::max(dev[q], std::abs(rep.samples[i].ratio - rep.limit_estimate));
    }
    const double floor = 1e-12 * std::max(std::abs(rep.limit_estimate), 1.0);
    rep.trend_ok = true;
    for (int q = 0; q < 3; ++q)
        if (dev[q + 1] > cfg.trend_slack * dev[q] + floor) rep.trend_ok = false;

    const bool in_band =
        std::abs(rep.limit_estimate - expected_limit) <= rel_tol * std::abs(expected_limit);
    rep.pass = rep.window_valid && rep.trend_ok && in_band;
    rep.verdict = rep.window_valid ? (rep.pass ? yes_verdict : no_verdict) : "window-invalid";
    return rep;
}

LongTailReport long_tail_check(const GridDensity& f, const std::vector<double>& shifts,
                               const TailWindow& w, const AsymptoticsConfig& cfg) {
    detail::check_finite_nonneg(f, "long_tail_check");
    LongTailReport rep;
    rep.long_tailed = !shifts.empty();
    for (double a : shifts) {
        if (!(a >= 0) || !std::isfinite(a))
            throw GridError("long_tail_check: shifts must be nonnegative");
        Eigen::Index k = (a == 0) ? 0
                                  : std::max<Eigen::Index>(
                                        1, static_cast<Eigen::Index>(std::llround(a / f.step)));
        const double a_eff = static_cast<double>(k) * f.step;
        auto idx = window_cells(f, w, a_eff);
        std::vector<double> xs, num, den;
        for (auto i : idx) {
            if (i + k >= f.cells())
                throw GridError("long_tail_check: shifted probe extends past grid support");
            xs.push_back(f.midpoint(i));
            num.push_back(f.values[i + k]);
            den.push_back(f.values[i]);
        }
        auto r = make_ratio_report("density_shift_ratio(a=" + format_scalar(a_eff) + ")", w, xs,
                                   num, den, 1.0, cfg.tol_long_tail, cfg, "long-tailed",
                                   "not-long-tailed");
        rep.long_tailed = rep.long_tailed && r.pass;
        rep.per_shift.push_back(std::move(r));
    }
    return rep;
}

TailRatioReport subexp_check(const GridDensity& f, const TailWindow& w,
                             const AsymptoticsConfig& cfg) {
    detail::check_finite_nonneg(f, "subexp_check");

    // Long-tail precondition. Every length in the probe scales with the
    // problem's own units (step, window, grid margin), so rescaling x
    // rescales the probe and the verdict is scale equivariant.
    double margin = f.right_edge() - w.x_hi;
    double probe = std::min(1e-3 * w.x_hi, 0.5 * margin);
    probe = std::max(probe, f.step);
    LongTailReport lt = long_tail_check(f, {probe}, w, cfg);

    GridDensity f2 = convolve(f, f, SupportCap::upper(f.right_edge()));
    auto idx = window_cells(f, w);
    std::vector<double> xs, num, den;
    for (auto i : idx) {
        double x = f.midpoint(i);
        xs.push_back(x);
        num.push_back(value_at_midpoint(f2, x));
        den.push_back(f.values[i]);
    }
    auto rep = make_ratio_report("self_convolution_ratio", w, xs, num, den, 2.0, cfg.tol_subexp,
                                 cfg, "subexponential", "not-subexponential");
    if (!lt.long_tailed) {
        rep.pass = false;
        rep.verdict = "not-long-tailed";
    }
    return rep;
}

TailRatioReport nfold_check(const GridDensity& f, int n, const TailWindow& w,
                            const AsymptoticsConfig& cfg) {
    detail::check_finite_nonneg(f, "nfold_check");
    if (n < 1) throw GridError("nfold_check: n must be at least 1");
    GridDensity fn = conv_power(f, n, SupportCap::upper(f.right_edge()));
    auto idx = window_cells(f, w);
    std::vector<double> xs, num, den;
    for (auto i : idx) {
        double x = f.midpoint(i);
        xs.push_back(x);
        num.push_back(n == 1 ? f.values[i] : value_at_midpoint(fn, x));
        den.push_back(f.values[i]);
    }
    return make_ratio_report("nfold_ratio(n=" + std::to_string(n) + ")", w, xs, num, den,
                             static_cast<double>(n), cfg.tol_subexp, cfg, "nfold-linear",
                             "nfold-off");
}

KestenReport kesten_scan(const GridDensity& f, double epsilon, int n_max, double x0,
                         const TailWindow& w, const AsymptoticsConfig& cfg) {
    detail::check_finite_nonneg(f, "kesten_scan");
    if (!(epsilon > 0)) throw GridError("kesten_scan: epsilon must be positive");
    if (n_max < 1) throw GridError("kesten_scan: n_max must be at least 1");

    KestenReport rep;
    rep.epsilon = epsilon;
    rep.n_max = n_max;
    rep.x0 = x0;

    auto idx_all = window_cells(f, w);
    std::vector<Eigen::Index> idx;
    for (auto i : idx_all)
        if (f.midpoint(i) > x0) idx.push_back(i);
    if (idx.empty()) throw GridError("kesten_scan: no window points above x0");

    ConvPowerLadder ladder(f, SupportCap::upper(f.right_edge()));
    for (int n = 1; n <= n_max; ++n) {
        GridDensity fn = ladder.power(n);
        const double growth = std::pow(1.0 + epsilon, n);
        for (auto i : idx) {
            double den = f.values[i];
            double fn_val = value_at_midpoint(fn, f.midpoint(i));
            if (!(den > cfg.denom_floor)) {
                // Power mass where the base density vanishes: no constant can
                // dominate, the bound is violated outright. 0/0 is just an
                // uninformative sample.
                if (fn_val > cfg.denom_floor) {
                    rep.violated = true;
                    rep.argmax_x = f.midpoint(i);
                    rep.argmax_n = n;
                } else {
                    ++rep.excluded;
                }
                continue;
            }
            double ratio = fn_val / (growth * den);
            if (!std::isfinite(ratio)) {
                rep.violated = true;
                continue;
            }
            if (ratio > rep.c_min) {
                rep.c_min = ratio;
                rep.argmax_x = f.midpoint(i);
                rep.argmax_n = n;
            }
        }
    }
    return rep;
}

TailRatioReport compound_levy_ratio(const GridDensity& phi, double lambda, const TailWindow& w,
                                    const AsymptoticsConfig& cfg) {
    PoissonCompoundSpec spec{lambda, 1.0, phi, cfg.series_tol};
    CompoundResult p = poisson_compound(spec, SeriesOptions{cfg.term_cap});
    const double factor = -std::expm1(-lambda);
    auto idx = window_cells(phi, w);
    std::vector<double> xs, num, den;
    for (auto i : idx) {
        xs.push_back(phi.midpoint(i));
        num.push_back(factor * p.density.values[i]);
        den.push_back(lambda * phi.values[i]);
    }
    return make_ratio_report("compound_levy_ratio(lambda=" + format_scalar(lambda) + ")", w, xs,
                             num, den, 1.0, cfg.tol_subexp, cfg, "ratio-ok", "ratio-off");
}

TailRatioReport time_scaling_ratio(const GridDensity& phi, double lambda, double t,
                                   const TailWindow& w, const AsymptoticsConfig& cfg) {
    if (!(t > 0) || !std::isfinite(t)) throw GridError("time_scaling_ratio: t must be positive");
    CompoundResult pt =
        poisson_compound(PoissonCompoundSpec{lambda, t, phi, cfg.series_tol}, SeriesOptions{cfg.term_cap});
    CompoundResult p1 =
        poisson_compound(PoissonCompoundSpec{lambda, 1.0, phi, cfg.series_tol}, SeriesOptions{cfg.term_cap});
    const double num_factor = -std::expm1(-lambda * t);
    const double den_factor = t * -std::expm1(-lambda);
    auto idx = window_cells(phi, w);
    std::vector<double> xs, num, den;
    for (auto i : idx) {
        xs.push_back(phi.midpoint(i));
        num.push_back(num_factor * pt.density.values[i]);
        den.push_back(den_factor * p1.density.values[i]);
    }
    return make_ratio_report("time_scaling_ratio(t=" + format_scalar(t) + ")", w, xs, num, den,
                             1.0, cfg.tol_subexp, cfg, "ratio-ok", "ratio-off");
}

TailRatioReport negbin_levy_ratio(const GridDensity& f, double alpha, double lambda,
                                  const TailWindow& w, const AsymptoticsConfig& cfg) {
    NegBinCompoundSpec spec{alpha, lambda, f, cfg.series_tol};
    CompoundResult p = negbin_compound(spec, SeriesOptions{cfg.term_cap});
    const double num_factor = -std::expm1(alpha * std::log1p(-lambda)); // 1 - c0
    const double den_factor = spec.gf_prime_at_one();
    auto idx = window_cells(f, w);
    std::vector<double> xs, num, den;
    for (auto i : idx) {
        xs.push_back(f.midpoint(i));
        num.push_back(num_factor * p.density.values[i]);
        den.push_back(den_factor * f.values[i]);
    }
    return make_ratio_report("negbin_levy_ratio(alpha=" + format_scalar(alpha) +
                                 ",lambda=" + format_scalar(lambda) + ")",
                             w, xs, num, den, 1.0, cfg.tol_subexp, cfg, "ratio-ok", "ratio-off");
}

TailRatioReport local_subexp_check(const AtomPlusDensity& rho, double c, const TailWindow& w,
                                   const AsymptoticsConfig& cfg) {
    if (!(c > 0)) throw GridError("local_subexp_check: interval width must be positive");
    const GridDensity& g = rho.density;
    detail::check_finite_nonneg(g, "local_subexp_check");

    // Snap the interval to whole cells so interval masses are exact sums.
    const double h = g.step;
    const double c_eff = static_cast<double>(std::max<long long>(1, std::llround(c / h))) * h;

    GridDensity g2 = convolve(g, g, SupportCap::upper(g.right_edge()));
    auto idx = window_cells(g, w, c_eff);
    std::vector<double> xs, num, den;
    for (auto i : idx) {
        double x = g.left_edge(i);
        double mg = interval_mass(g, x, c_eff);
        double mg2 = interval_mass(g2, x, c_eff);
        xs.push_back(x);
        num.push_back(2.0 * rho.atom * mg + mg2);
        den.push_back(rho.atom * (x < 0 && 0 <= x + c_eff ? 1.0 : 0.0) + mg);
    }
    return make_ratio_report("interval_self_convolution_ratio(c=" + format_scalar(c_eff) + ")", w,
                             xs, num, den, 2.0, cfg.tol_subexp, cfg, "locally-subexponential",
                             "not-locally-subexponential");
}

TailRatioReport strong_subexp_check(const GridDensity& rho, const TailWindow& w,
                                    const AsymptoticsConfig& cfg) {
    detail::check_finite_nonneg(rho, "strong_subexp_check");
    const double h = rho.step;
    const Eigen::Index n = rho.cells();

    // Index of the boundary at 0 (0 for grids that start on the positive axis).
    Eigen::Index z0 = 0;
    if (rho.origin < 0) {
        z0 = static_cast<Eigen::Index>(std::llround(-rho.origin / h));
        if (z0 < 0 || z0 > n || std::abs(rho.origin + static_cast<double>(z0) * h) > 1e-9 * h)
            throw GridError("strong_subexp_check: grid has no cell boundary at 0");
    }

    // Tail masses at cell boundaries (T[j] = mass strictly above boundary j)
    // and at cell midpoints; the defect counts as right-tail mass.
    std::vector<double> boundary_tail(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<double> mid_tail(static_cast<std::size_t>(n), 0.0);
    boundary_tail[static_cast<std::size_t>(n)] = rho.defect;
    for (Eigen::Index i = n; i-- > 0;) {
        boundary_tail[static_cast<std::size_t>(i)] =
            boundary_tail[static_cast<std::size_t>(i) + 1] + h * rho.values[i];
        mid_tail[static_cast<std::size_t>(i)] =
            boundary_tail[static_cast<std::size_t>(i) + 1] + 0.5 * h * rho.values[i];
    }

    // Positive-part first moment from on-grid mass.
    double m_plus = 0;
    for (Eigen::Index i = z0; i < n; ++i) m_plus += rho.midpoint(i) * h * rho.values[i];
    if (!(m_plus > 0)) throw GridError("strong_subexp_check: positive-part mean vanishes");

    auto idx = window_cells(rho, w);
    std::vector<double> xs, num, den;
    for (auto i : idx) {
        // Sample at the boundary x = left edge of cell i; the convolution
        // integral over (0, x) is a midpoint rule pairing y and x - y.
        Eigen::Index j = i;
        Eigen::Index m = j - z0;
        if (m < 1) continue;
        double integral = 0;
        for (Eigen::Index u = 0; u < m; ++u)
            integral += mid_tail[static_cast<std::size_t>(z0 + u)] *
                        mid_tail[static_cast<std::size_t>(z0 + m - 1 - u)];
        integral *= h;
        xs.push_back(rho.left_edge(j));
        num.push_back(integral);
        den.push_back(2.0 * m_plus * boundary_tail[static_cast<std::size_t>(j)]);
    }
    return make_ratio_report("integrated_tail_ratio", w, xs, num, den, 1.0, cfg.tol_strong, cfg,
                             "strong-subexponential", "not-strong-subexponential");
}

} // namespace htcp
