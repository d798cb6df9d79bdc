#pragma once

// Finite-window estimates of tail limits. Every "ratio tends to L" claim is
// operationalized the same way: sample the ratio at grid cells across a tail
// window, take the median of the last quartile as the limit estimate, and
// require per-quartile deviations to be nonincreasing (with slack) for the
// trend to count as convergent. Deterministic by construction.

#include "htcp/compound.hpp"
#include "htcp/grid_density.hpp"

#include <string>
#include <vector>

namespace htcp {

struct TailWindow {
    enum class Spacing { geometric, arithmetic };

    double x_lo = 0;
    double x_hi = 0;
    int n_points = 64;
    Spacing spacing = Spacing::geometric;
};

struct RatioSample {
    double x = 0;
    double ratio = 0;
};

struct TailRatioReport {
    std::string quantity; // which ratio was sampled
    TailWindow window;
    std::vector<RatioSample> samples; // ascending x, excluded points removed

    double limit_estimate = 0; // median of the last quartile
    double max_abs_dev = 0;    // max |ratio - limit_estimate| over the last quartile
    bool trend_ok = false;     // quartile deviations nonincreasing within slack
    int excluded = 0;          // samples dropped for denominator underflow
    bool window_valid = false; // enough samples survived exclusion

    double expected_limit = 0; // acceptance band center
    double rel_tol = 0;        // acceptance band half-width, relative
    bool pass = false;
    std::string verdict;
};

// Tolerances and window policy. These are configuration, not constants:
// they were set by pilot runs at step 0.05 with x_max 2000 and are meant
// to be overridden per experiment.
struct AsymptoticsConfig {
    double tol_long_tail = 0.02;
    double tol_subexp = 0.05;  // also the compound-ratio checks
    double tol_strong = 0.10;  // integrated-tail (strong subexponential) check
    double tol_walk = 0.20;    // random-walk supremum tail law
    double trend_slack = 1.10; // quartile q+1 deviation may exceed quartile q by 10%
    double denom_floor = 1e-300;
    double max_excluded_fraction = 0.10;
    double series_tol = 1e-10; // truncation tolerance for embedded compound series
    int term_cap = 512;
};

// Cells whose midpoints realize the window positions; deduplicated,
// ascending. `probe_margin` is extra support needed above x_hi (shift
// probes); the window must fit inside the grid with that margin.
std::vector<Eigen::Index> window_cells(const GridDensity& g, const TailWindow& w,
                                       double probe_margin = 0);

// Assemble a report from parallel arrays of sample positions, numerators
// and denominators. Exclusion, quartile statistics, trend, and the pass
// verdict (|limit/expected - 1| <= rel_tol, trend, validity) happen here.
TailRatioReport make_ratio_report(std::string quantity, const TailWindow& w,
                                  const std::vector<double>& xs, const std::vector<double>& num,
                                  const std::vector<double>& den, double expected_limit,
                                  double rel_tol, const AsymptoticsConfig& cfg,
                                  const std::string& yes_verdict, const std::string& no_verdict);

// --- Long-tail and subexponential density checks -------------------------

struct LongTailReport {
    std::vector<TailRatioReport> per_shift;
    bool long_tailed = false;
};

// Ratios f(x + a)/f(x) for each shift a; long-tailed iff every shift's
// limit sits within tol_long_tail of 1 with a convergent trend. Shifts are
// snapped to whole cells so the sampled ratio is exact for exact densities.
LongTailReport long_tail_check(const GridDensity& f, const std::vector<double>& shifts,
                               const TailWindow& w, const AsymptoticsConfig& cfg = {});

// Ratios f*f(x)/f(x); verdict "subexponential" iff the limit sits within
// 2 * (1 +- tol_subexp) and f first passes the long-tail probe.
TailRatioReport subexp_check(const GridDensity& f, const TailWindow& w,
                             const AsymptoticsConfig& cfg = {});

// Ratios of the n-fold convolution power to f; expected limit n.
TailRatioReport nfold_check(const GridDensity& f, int n, const TailWindow& w,
                            const AsymptoticsConfig& cfg = {});

// --- Geometric domination scan -------------------------------------------

struct KestenReport {
    double epsilon = 0;
    int n_max = 0;
    double x0 = 0;
    double c_min = 0; // max over sampled (x, n) of f^n(x) / ((1+eps)^n f(x))
    bool violated = false;
    int excluded = 0;
    double argmax_x = 0;
    int argmax_n = 0;
};

KestenReport kesten_scan(const GridDensity& f, double epsilon, int n_max, double x0,
                         const TailWindow& w, const AsymptoticsConfig& cfg = {});

// --- Compound-density tail laws -------------------------------------------

// (1 - e^{-lambda}) p(x) / (lambda phi(x)) with p the Poisson compound of
// phi at t = 1; expected limit 1. The square-integrability hypothesis is
// the caller's to check via the family flag.
TailRatioReport compound_levy_ratio(const GridDensity& phi, double lambda, const TailWindow& w,
                                    const AsymptoticsConfig& cfg = {});

// (1 - e^{-lambda t}) p^t(x) / (t (1 - e^{-lambda}) p(x)); expected limit 1.
TailRatioReport time_scaling_ratio(const GridDensity& phi, double lambda, double t,
                                   const TailWindow& w, const AsymptoticsConfig& cfg = {});

// (1 - c0) p(x) / (gf'(1) f(x)) with p the negative-binomial compound of f
// and gf'(1) = alpha lambda / (1 - lambda); expected limit 1.
TailRatioReport negbin_levy_ratio(const GridDensity& f, double alpha, double lambda,
                                  const TailWindow& w, const AsymptoticsConfig& cfg = {});

// --- Interval (local) and integrated-tail variants ------------------------

// rho_2*((x, x+c]) / rho((x, x+c]) via the three-term expansion
// atom^2 d0 + 2 atom g + g*g of the square of rho = atom d0 + g; expected
// limit 2 when the density part is subexponential.
TailRatioReport local_subexp_check(const AtomPlusDensity& rho, double c, const TailWindow& w,
                                   const AsymptoticsConfig& cfg = {});

// integral_0^x tail(x-y) tail(y) dy against 2 m+ tail(x), with m+ the
// positive-part first moment of rho; expected limit 1 for strong
// subexponential (class S*) members. rho may live on a two-sided grid.
TailRatioReport strong_subexp_check(const GridDensity& rho, const TailWindow& w,
                                    const AsymptoticsConfig& cfg = {});

} // namespace htcp
