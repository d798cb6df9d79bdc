#pragma once

// Compound-sum densities: random-count mixtures sum_{n>=1} w_n f^{n(x)}
// of convolution powers of a severity density on [0, inf). Counts covered:
// zero-truncated Poisson, zero-truncated negative binomial, and logarithmic.
// Each evaluator reports how many terms it used, the weight it left behind,
// and the mass its grids pushed into defects, so mass + defect + residual
// always reconstructs 1 for a probability severity.

#include "htcp/convolution.hpp"
#include "htcp/grid_density.hpp"

#include <cmath>

namespace htcp {

struct SeriesOptions {
    int term_cap = 512; // hard ceiling on series length; exceeding it throws SeriesCapError
};

struct CompoundReport {
    int terms_used = 0;
    double residual_weight = 0; // count-distribution weight beyond terms_used
    double defect = 0;          // weight-averaged mass lost past the grid edge
};

struct CompoundResult {
    GridDensity density;
    CompoundReport report;
};

// Poisson(lambda * t) count conditioned on N >= 1; the full law is
// exp(-lambda t) delta_0 + (1 - exp(-lambda t)) * density.
struct PoissonCompoundSpec {
    double lambda = 1;
    double t = 1;
    GridDensity severity;
    double tol = 1e-10; // residual count weight allowed past truncation
};

// Negative binomial weights ((1-lambda)/(1-lambda s))^alpha, conditioned on
// N >= 1. delta and c0 are always derived from (alpha, lambda), never stored.
struct NegBinCompoundSpec {
    double alpha = 1;
    double lambda = 0.5;
    GridDensity severity;
    double tol = 1e-10;

    double delta() const { return -std::log1p(-lambda); }
    double c0() const { return std::exp(alpha * std::log1p(-lambda)); }
    // Derivative of the count generating function at s = 1.
    double gf_prime_at_one() const { return alpha * lambda / (1.0 - lambda); }
};

CompoundResult poisson_compound(const PoissonCompoundSpec& spec, const SeriesOptions& opts = {});
CompoundResult negbin_compound(const NegBinCompoundSpec& spec, const SeriesOptions& opts = {});

// Logarithmic compound: weights lambda^n / (n * delta). Takes the same spec
// as the negative binomial; alpha only feeds validation, not the weights.
CompoundResult log_compound(const NegBinCompoundSpec& spec, const SeriesOptions& opts = {});

// Distance between the two constructions of the same negative-binomial
// compound: directly, and as Poisson(alpha * delta) over the logarithmic
// compound of the severity. The two paths share no intermediate grids.
struct DualPathReport {
    double l1 = 0;
    CompoundReport direct;    // negative-binomial path
    CompoundReport inner_log; // logarithmic severity of the composed path
    CompoundReport outer_poisson;
};

DualPathReport negbin_dual_path_check(double alpha, double lambda, const GridDensity& f,
                                      double tol, const SeriesOptions& opts = {});

// Attach an atom at zero, rescaling the density part to weight 1 - atom.
AtomPlusDensity with_atom(const GridDensity& density, double atom);

} // namespace htcp
