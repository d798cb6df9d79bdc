#pragma once

// Supremum distribution of a negative-drift random walk, built three ways:
// from the harmonic series of convolution-power positive masses (one
// convolution per depth step), from a geometric compound of a given ladder
// height density, and by Monte Carlo. The first two meet in a compound
// Poisson / compound geometric structure; the third cross-checks both.

#include "htcp/asymptotics.hpp"
#include "htcp/compound.hpp"
#include "htcp/counter_rng.hpp"
#include "htcp/family.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace htcp {

struct WalkSpec {
    GridDensity step_density; // two-sided grid with a cell boundary at 0
    double mean = -1;         // E X1, must be negative and finite
    int spitzer_depth = 200;  // truncation of the harmonic series over n
    std::int64_t mc_paths = 0;
    double mc_barrier = 0; // stop a path when the partial sum drops below -barrier
    std::uint64_t seed = 0;
};

struct SpitzerOptions {
    // Per-step bound on mass pushed off the grid; more means the grid is too
    // narrow for the requested depth.
    double max_step_defect = 1e-3;
};

struct SpitzerResult {
    GridDensity nu; // sub-probability density on (0, inf), origin 0
    double B_partial = 0;
    double tail_gap = 0; // power-law extrapolation of the dropped terms; diagnostic only
    std::vector<double> per_n_positive_mass; // P(S_n > 0) for n = 1..depth
};

enum class SupremumSource { spitzer, ladder, montecarlo };

struct SupremumResult {
    AtomPlusDensity pi;   // atom at 0 plus density of the supremum
    double lambda_rw = 0; // 1 - atom
    SupremumSource source = SupremumSource::spitzer;
    CompoundReport report; // series bookkeeping of the compound construction
};

// nu = sum_{n<=N} n^-1 restrict_positive(rho^n), built incrementally.
// B_partial = sum n^-1 P(S_n > 0) where P(S_n > 0) counts on-grid positive
// mass plus the step's accumulated defect.
SpitzerResult spitzer_nu(const WalkSpec& spec, const SpitzerOptions& opts = {});

// pi = e^-B d0 + (1 - e^-B) p with p the Poisson(B) compound of nu / B.
SupremumResult supremum_from_nu(const SpitzerResult& sr, double series_tol = 1e-10,
                                int term_cap = 512);

// pi = (1 - lambda) d0 + lambda * geometric compound of the ladder height.
SupremumResult supremum_from_ladder(const GridDensity& f_plus, double lambda_rw,
                                    double series_tol = 1e-10, int term_cap = 512);

// Tail law of the supremum: density form
//   (1 - e^-B) p(x) |mean| / rho_tail(x) -> 1
// and interval form pi((x, x+c]) |mean| / (c rho_tail(x)) -> 1.
struct WalkTailReport {
    TailRatioReport density_form;
    TailRatioReport interval_form;
    SpitzerResult spitzer;
    SupremumResult sup;
    bool skipped = false; // no positive step tail; nothing to verify
};

WalkTailReport supremum_tail_ratio(const WalkSpec& spec,
                                   const std::function<double(double)>& rho_tail,
                                   const TailWindow& w, const AsymptoticsConfig& cfg = {},
                                   double interval_width = 1.0,
                                   const SpitzerOptions& opts = {});

// Steps are X = Y - shift with Y sampled from the family.
struct StepModel {
    Family family;
    double shift = 0;
};

struct McSupremumResult {
    std::vector<double> maxima; // recorded per-path maxima, sorted ascending
    double p_positive = 0;      // fraction of paths with a strictly positive maximum
    double bias_proxy = 0;      // fraction of paths whose maximum was at most barrier/10:
                                // those need the smallest rebound to beat their record,
                                // so they bound the stopping bias from above
    std::int64_t paths = 0;
    double barrier = 0;
    int threads = 1;
};

McSupremumResult montecarlo_supremum(const WalkSpec& spec, const StepModel& model,
                                     int threads = 1);

// Kolmogorov distance between the empirical maxima and the CDF of pi,
// restricted to sample points in [0, x_cap].
double kolmogorov_distance(const McSupremumResult& mc, const AtomPlusDensity& pi,
                           double x_cap = std::numeric_limits<double>::infinity());

// Two-sided grid for X = Y - shift: the step is snapped so the shift is a
// whole number of cells, the origin sits at exactly -depth * shift (the
// walk's lowest reachable support after `depth` steps), and 0 lands on a
// cell boundary bit-exactly.
struct StepGrid {
    GridDensity density;
    double shift_eff = 0;
    double mean = 0; // family mean minus effective shift
};

StepGrid make_step_grid(const Family& family, double shift, double target_step, double x_max,
                        int depth);

} // namespace htcp
