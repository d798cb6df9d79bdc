#pragma once

// Parametric severity and step distributions with exact closed-form CDFs.
// Cell masses are tail differences, so discretization stays accurate far
// into the tail where CDF differences would cancel.

#include "htcp/counter_rng.hpp"
#include "htcp/grid_density.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace htcp {

enum class FamilyKind { exponential, pareto_lomax, weibull, lognormal, counterexample_g, mixture };

class Family {
public:
    static Family exponential(double rate) {
        require(rate > 0 && std::isfinite(rate), "exponential: rate must be positive");
        return Family(FamilyKind::exponential, rate, 0);
    }
    static Family pareto_lomax(double alpha, double scale) {
        require(alpha > 1 && std::isfinite(alpha), "pareto_lomax: alpha must exceed 1");
        require(scale > 0 && std::isfinite(scale), "pareto_lomax: scale must be positive");
        return Family(FamilyKind::pareto_lomax, alpha, scale);
    }
    static Family weibull(double shape, double scale) {
        require(shape > 0 && shape < 1, "weibull: shape must lie in (0, 1)");
        require(scale > 0 && std::isfinite(scale), "weibull: scale must be positive");
        return Family(FamilyKind::weibull, shape, scale);
    }
    static Family lognormal(double location, double scale) {
        require(std::isfinite(location), "lognormal: location must be finite");
        require(scale > 0 && std::isfinite(scale), "lognormal: scale must be positive");
        return Family(FamilyKind::lognormal, location, scale);
    }
    static Family counterexample_g() { return Family(FamilyKind::counterexample_g, 0, 0); }
    static Family mixture(std::vector<std::pair<double, Family>> components) {
        require(!components.empty(), "mixture: needs at least one component");
        double wsum = 0;
        for (const auto& [w, f] : components) {
            require(w > 0 && std::isfinite(w), "mixture: weights must be positive");
            wsum += w;
        }
        require(std::abs(wsum - 1.0) <= 1e-9, "mixture: weights must sum to 1");
        Family out(FamilyKind::mixture, 0, 0);
        out.components_ = std::move(components);
        return out;
    }

    FamilyKind kind() const { return kind_; }
    const std::vector<std::pair<double, Family>>& components() const { return components_; }

    // P(X > x), exact per family, no subtraction from 1.
    double tail(double x) const {
        switch (kind_) {
        case FamilyKind::exponential:
            return x <= 0 ? 1.0 : std::exp(-p1_ * x);
        case FamilyKind::pareto_lomax:
            return x <= 0 ? 1.0 : std::pow(1.0 + x / p2_, -p1_);
        case FamilyKind::weibull:
            return x <= 0 ? 1.0 : std::exp(-std::pow(x / p2_, p1_));
        case FamilyKind::lognormal:
            return x <= 0 ? 1.0 : 0.5 * std::erfc((std::log(x) - p1_) / (p2_ * std::sqrt(2.0)));
        case FamilyKind::counterexample_g:
            return tail_g(x);
        case FamilyKind::mixture: {
            double t = 0;
            for (const auto& [w, f] : components_) t += w * f.tail(x);
            return t;
        }
        }
        return 0;
    }

    double cdf(double x) const { return 1.0 - tail(x); }

    double density(double x) const {
        switch (kind_) {
        case FamilyKind::exponential:
            return x < 0 ? 0.0 : p1_ * std::exp(-p1_ * x);
        case FamilyKind::pareto_lomax:
            return x < 0 ? 0.0 : (p1_ / p2_) * std::pow(1.0 + x / p2_, -p1_ - 1.0);
        case FamilyKind::weibull: {
            if (x <= 0) return 0.0;
            double z = std::pow(x / p2_, p1_);
            return (p1_ / x) * z * std::exp(-z);
        }
        case FamilyKind::lognormal: {
            if (x <= 0) return 0.0;
            double z = (std::log(x) - p1_) / p2_;
            return std::exp(-0.5 * z * z) / (x * p2_ * std::sqrt(2.0 * M_PI));
        }
        case FamilyKind::counterexample_g: {
            double u = std::abs(x - 1.0);
            if (u >= std::exp(-1.0)) return 0.0;
            if (u == 0.0) return std::numeric_limits<double>::infinity();
            double l = std::log(u);
            return 1.0 / (2.0 * u * l * l);
        }
        case FamilyKind::mixture: {
            double d = 0;
            for (const auto& [w, f] : components_) d += w * f.density(x);
            return d;
        }
        }
        return 0;
    }

    // Mass of [a, b), computed as tail(a) - tail(b).
    double cell_mass(double a, double b) const {
        if (!(b > a)) return 0.0;
        return tail(a) - tail(b);
    }

    double mean() const {
        switch (kind_) {
        case FamilyKind::exponential:
            return 1.0 / p1_;
        case FamilyKind::pareto_lomax:
            return p2_ / (p1_ - 1.0);
        case FamilyKind::weibull:
            return p2_ * std::tgamma(1.0 + 1.0 / p1_);
        case FamilyKind::lognormal:
            return std::exp(p1_ + 0.5 * p2_ * p2_);
        case FamilyKind::counterexample_g:
            return 1.0; // symmetric about 1
        case FamilyKind::mixture: {
            double m = 0;
            for (const auto& [w, f] : components_) m += w * f.mean();
            return m;
        }
        }
        return 0;
    }

    // Whether the density is square-integrable. The only failure modes here
    // are the x^(shape-1) blow-up of Weibull at the origin (integrable in
    // square only for shape > 1/2) and the logarithmic singularity of the
    // counterexample density.
    bool square_integrable() const {
        switch (kind_) {
        case FamilyKind::exponential:
        case FamilyKind::pareto_lomax:
        case FamilyKind::lognormal:
            return true;
        case FamilyKind::weibull:
            return p1_ > 0.5;
        case FamilyKind::counterexample_g:
            return false;
        case FamilyKind::mixture: {
            for (const auto& [w, f] : components_)
                if (!f.square_integrable()) return false;
            return true;
        }
        }
        return false;
    }

    double support_left() const {
        switch (kind_) {
        case FamilyKind::counterexample_g:
            return 1.0 - std::exp(-1.0);
        case FamilyKind::mixture: {
            double lo = std::numeric_limits<double>::infinity();
            for (const auto& [w, f] : components_) lo = std::min(lo, f.support_left());
            return lo;
        }
        default:
            return 0.0;
        }
    }

    // Inverse-CDF sampling (Box-Muller for lognormal); one or two uniforms.
    double sample(CounterRng& rng) const {
        switch (kind_) {
        case FamilyKind::exponential:
            return -std::log(rng.next_unit()) / p1_;
        case FamilyKind::pareto_lomax:
            return p2_ * (std::pow(rng.next_unit(), -1.0 / p1_) - 1.0);
        case FamilyKind::weibull:
            return p2_ * std::pow(-std::log(rng.next_unit()), 1.0 / p1_);
        case FamilyKind::lognormal: {
            double u1 = rng.next_unit(), u2 = rng.next_unit();
            double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
            return std::exp(p1_ + p2_ * z);
        }
        case FamilyKind::counterexample_g: {
            double v = rng.next_unit();
            if (v <= 0.5) {
                double denom = 1.0 - 2.0 * v;
                return denom <= 0 ? 1.0 : 1.0 - std::exp(-1.0 / denom);
            }
            return 1.0 + std::exp(-0.5 / (v - 0.5));
        }
        case FamilyKind::mixture: {
            double v = rng.next_unit();
            double acc = 0;
            for (const auto& [w, f] : components_) {
                acc += w;
                if (v <= acc) return f.sample(rng);
            }
            return components_.back().second.sample(rng);
        }
        }
        return 0;
    }

    static Family from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

private:
    Family(FamilyKind k, double p1, double p2) : kind_(k), p1_(p1), p2_(p2) {}

    static void require(bool ok, const char* msg) {
        if (!ok) throw GridError(msg);
    }

    // Tail of the shifted symmetric density g = h(. - 1)/2 with
    // h(u) = |u|^{-1} |log|u||^{-2} on (-1/e, 1/e). Antiderivative of the
    // right half: integral over (a, b) is 1/log(1/b) - 1/log(1/a).
    static double tail_g(double x) {
        const double e_inv = std::exp(-1.0);
        if (x <= 1.0 - e_inv) return 1.0;
        if (x >= 1.0 + e_inv) return 0.0;
        if (x < 1.0) {
            double l = std::log(1.0 / (1.0 - x)); // > 1
            return 0.5 + 0.5 / l;
        }
        if (x == 1.0) return 0.5;
        double l = std::log(1.0 / (x - 1.0)); // > 1
        return 0.5 * (l - 1.0) / l;
    }

    FamilyKind kind_;
    double p1_, p2_;
    std::vector<std::pair<double, Family>> components_;
};

// Grid density of X = Y - shift where Y follows `f`. The defect collects
// everything outside the grid window.
inline GridDensity discretize(const Family& f, double origin, double step, Eigen::Index n_cells,
                              double shift = 0.0) {
    return discretize<double>(
        [&](double a, double b) { return f.cell_mass(a + shift, b + shift); }, 1.0, origin, step,
        n_cells);
}

} // namespace htcp
