#include "htcp/compound.hpp"

#include <functional>
#include <string>
#include <vector>

namespace htcp {

namespace {

// Normalized count weights w_1, w_2, ... (sum 1), truncated at the smallest
// length whose remaining weight drops below tol. Weights are generated
// forward from w1 and the consecutive-term ratio; the residual is a suffix
// sum, so no cancellation is involved anywhere.
struct WeightPlan {
    std::vector<double> w;
    double residual = 0;
};

WeightPlan plan_weights(double w1, const std::function<double(int)>& ratio_after, double tol,
                        int term_cap, const char* series_name) {
    if (!(tol > 0)) throw GridError(std::string(series_name) + ": tol must be positive");
    constexpr double floor = 1e-22;
    constexpr int hard_stop = 200000;

    std::vector<double> w{w1};
    for (int n = 1; n < hard_stop; ++n) {
        double r = ratio_after(n); // w_{n+1} / w_n
        double next = w.back() * r;
        if (!(next >= 0) || !std::isfinite(next))
            throw ComputationError(std::string(series_name) + ": weight recurrence diverged");
        if (next < floor && r < 1.0) break;
        w.push_back(next);
    }

    // The weight beyond the generated terms is not zero, only below the
    // generation floor; seeding the suffix sums with the floor keeps the
    // residual an honest upper bound and makes tolerances below the floor
    // unattainable by construction.
    std::vector<double> suffix(w.size() + 1, floor);
    for (std::size_t i = w.size(); i-- > 0;) suffix[i] = suffix[i + 1] + w[i];

    // suffix[k] is the weight remaining after using k terms.
    std::size_t terms = 0;
    for (std::size_t k = 1; k <= w.size(); ++k) {
        if (suffix[k] < tol) {
            terms = k;
            break;
        }
    }
    if (terms == 0)
        throw GridError(std::string(series_name) + ": tol " + std::to_string(tol) +
                        " is below the attainable series resolution");
    if (terms > static_cast<std::size_t>(term_cap))
        throw SeriesCapError(std::string(series_name) + ": needs " + std::to_string(terms) +
                                 " terms, cap is " + std::to_string(term_cap),
                             term_cap);

    WeightPlan plan;
    plan.residual = suffix[terms];
    plan.w.assign(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(terms));
    return plan;
}

void validate_severity(const GridDensity& f, const char* who) {
    detail::check_finite_nonneg(f, who);
    if (!f.cells()) throw GridError(std::string(who) + ": empty severity grid");
    if (std::abs(f.origin) > 1e-9 * f.step)
        throw GridError(std::string(who) + ": severity grid must start at 0");
    if (f.total() > 1.0 + 1e-9)
        throw GridError(std::string(who) + ": severity mass exceeds 1");
}

// Weighted sum of convolution powers of f, all capped to f's own grid so
// every term lives on identical cells. Ascending n keeps accumulation
// deterministic and adds the smallest terms into the largest sums last.
CompoundResult accumulate_series(const GridDensity& f, const WeightPlan& plan) {
    ConvPowerLadder ladder(f, SupportCap::upper(f.right_edge()));
    CompoundResult out;
    out.density.origin = f.origin;
    out.density.step = f.step;
    out.density.values.setZero(f.cells());
    double defect = 0;
    for (std::size_t i = 0; i < plan.w.size(); ++i) {
        GridDensity power = ladder.power(static_cast<std::int64_t>(i + 1));
        if (power.cells() != f.cells() || std::abs(power.origin - f.origin) > 1e-9 * f.step)
            throw ComputationError("compound: power grid drifted off the severity grid");
        out.density.values += plan.w[i] * power.values;
        defect += plan.w[i] * power.defect;
    }
    out.density.defect = defect;
    out.report.terms_used = static_cast<int>(plan.w.size());
    out.report.residual_weight = plan.residual;
    out.report.defect = defect;
    return out;
}

} // namespace

CompoundResult poisson_compound(const PoissonCompoundSpec& spec, const SeriesOptions& opts) {
    if (!(spec.lambda > 0) || !std::isfinite(spec.lambda))
        throw GridError("poisson_compound: lambda must be positive");
    if (!(spec.t > 0) || !std::isfinite(spec.t))
        throw GridError("poisson_compound: t must be positive");
    const double mu = spec.lambda * spec.t;
    if (mu > 400)
        throw GridError("poisson_compound: lambda*t too large for double-precision weights");
    validate_severity(spec.severity, "poisson_compound");

    // Zero-truncated Poisson: w_n = mu^n / (n! (e^mu - 1)).
    const double w1 = mu / std::expm1(mu);
    auto ratio = [mu](int n) { return mu / (n + 1); };
    return accumulate_series(spec.severity,
                             plan_weights(w1, ratio, spec.tol, opts.term_cap, "poisson_compound"));
}

CompoundResult negbin_compound(const NegBinCompoundSpec& spec, const SeriesOptions& opts) {
    if (!(spec.alpha > 0) || !std::isfinite(spec.alpha))
        throw GridError("negbin_compound: alpha must be positive");
    if (!(spec.lambda > 0) || !(spec.lambda < 1))
        throw GridError("negbin_compound: lambda must lie in (0, 1)");
    validate_severity(spec.severity, "negbin_compound");

    // Zero-truncated negative binomial: w_n proportional to
    // binom(alpha + n - 1, n) lambda^n, normalized by (1 - c0).
    const double one_minus_c0 = -std::expm1(spec.alpha * std::log1p(-spec.lambda));
    const double w1 = spec.c0() * spec.alpha * spec.lambda / one_minus_c0;
    auto ratio = [a = spec.alpha, l = spec.lambda](int n) { return l * (a + n) / (n + 1); };
    return accumulate_series(spec.severity,
                             plan_weights(w1, ratio, spec.tol, opts.term_cap, "negbin_compound"));
}

CompoundResult log_compound(const NegBinCompoundSpec& spec, const SeriesOptions& opts) {
    if (!(spec.lambda > 0) || !(spec.lambda < 1))
        throw GridError("log_compound: lambda must lie in (0, 1)");
    validate_severity(spec.severity, "log_compound");

    // Logarithmic weights lambda^n / (n * delta) already sum to 1.
    const double w1 = spec.lambda / spec.delta();
    auto ratio = [l = spec.lambda](int n) { return l * n / (n + 1.0); };
    return accumulate_series(spec.severity,
                             plan_weights(w1, ratio, spec.tol, opts.term_cap, "log_compound"));
}

DualPathReport negbin_dual_path_check(double alpha, double lambda, const GridDensity& f,
                                      double tol, const SeriesOptions& opts) {
    NegBinCompoundSpec nb{alpha, lambda, f, tol};

    CompoundResult direct = negbin_compound(nb, opts);

    // Composed path: logarithmic compound of f becomes the severity of a
    // Poisson compound with rate alpha * delta. Fresh ladders on both legs,
    // so the two sides share no intermediate convolution results.
    CompoundResult inner = log_compound(nb, opts);
    PoissonCompoundSpec outer{alpha * nb.delta(), 1.0, inner.density, tol};
    CompoundResult composed = poisson_compound(outer, opts);

    DualPathReport rep;
    rep.direct = direct.report;
    rep.inner_log = inner.report;
    rep.outer_poisson = composed.report;
    rep.l1 = f.step * (direct.density.values - composed.density.values).abs().sum();
    return rep;
}

AtomPlusDensity with_atom(const GridDensity& density, double atom) {
    if (!(atom >= 0) || !(atom < 1)) throw GridError("with_atom: atom must lie in [0, 1)");
    AtomPlusDensity out;
    out.atom = atom;
    out.density = density;
    out.density.values *= (1.0 - atom);
    out.density.defect *= (1.0 - atom);
    return out;
}

} // namespace htcp
