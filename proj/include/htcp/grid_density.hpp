#pragma once

// Cell-averaged densities on uniform grids. A GridDensity stores, for each
// cell [origin + i*step, origin + (i+1)*step), the average density value over
// that cell, plus a scalar `defect` carrying probability mass that lives
// outside the grid. Mass on the grid plus defect is conserved by every
// operation in this library, which is what makes long transform chains
// auditable: total() is an invariant, not an approximation.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace htcp {

struct GridError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ComputationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when a series needs more terms than the configured cap allows.
struct SeriesCapError : ComputationError {
    SeriesCapError(const std::string& what, int cap_value) : ComputationError(what), cap(cap_value) {}
    int cap;
};

template <class Scalar>
struct GridDensityT {
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

    Scalar origin = 0;
    Scalar step = 1;
    Array values;      // cell-averaged density, one entry per cell
    Scalar defect = 0; // mass outside [origin, right_edge()]

    Eigen::Index cells() const { return values.size(); }
    Scalar right_edge() const { return origin + static_cast<Scalar>(cells()) * step; }
    Scalar left_edge(Eigen::Index i) const { return origin + static_cast<Scalar>(i) * step; }
    Scalar midpoint(Eigen::Index i) const { return origin + (static_cast<Scalar>(i) + Scalar(0.5)) * step; }

    Scalar mass() const { return cells() ? step * values.sum() : Scalar(0); }
    Scalar total() const { return mass() + defect; }

    // Index of the cell containing x, clamped into range; -1 when empty.
    Eigen::Index cell_index(Scalar x) const {
        if (!cells()) return -1;
        auto i = static_cast<Eigen::Index>(std::floor((x - origin) / step));
        return std::min(std::max(i, Eigen::Index(0)), cells() - 1);
    }
};

using GridDensity = GridDensityT<double>;

// A point mass at zero plus an absolutely continuous part. `density` is
// already scaled: atom + density.total() counts the whole distribution.
template <class Scalar>
struct AtomPlusDensityT {
    Scalar atom = 0;
    GridDensityT<Scalar> density;

    Scalar total() const { return atom + density.total(); }
};

using AtomPlusDensity = AtomPlusDensityT<double>;

namespace detail {
template <class Scalar>
void check_finite_nonneg(const GridDensityT<Scalar>& d, const char* who) {
    if (!(d.step > 0) || !std::isfinite(static_cast<double>(d.step)))
        throw GridError(std::string(who) + ": step must be positive and finite");
    if (!std::isfinite(static_cast<double>(d.origin)))
        throw GridError(std::string(who) + ": origin must be finite");
    if (!d.values.allFinite())
        throw GridError(std::string(who) + ": non-finite cell value");
    if (d.cells() && d.values.minCoeff() < Scalar(0))
        throw GridError(std::string(who) + ": negative cell value");
    if (!(d.defect >= Scalar(0)))
        throw GridError(std::string(who) + ": negative defect");
}
} // namespace detail

// Build a grid density from per-cell masses. `cell_mass(a, b)` must return
// the mass of [a, b); `total_mass` is the mass of the whole distribution, so
// everything the grid does not cover lands in the defect.
template <class Scalar, class CellMassFn>
GridDensityT<Scalar> discretize(CellMassFn&& cell_mass, Scalar total_mass, Scalar origin,
                                Scalar step, Eigen::Index n_cells) {
    if (!(step > 0) || !std::isfinite(static_cast<double>(step)))
        throw GridError("discretize: step must be positive and finite");
    if (n_cells <= 0) throw GridError("discretize: n_cells must be positive");
    if (!std::isfinite(static_cast<double>(origin))) throw GridError("discretize: origin must be finite");
    if (!(total_mass >= 0) || !std::isfinite(static_cast<double>(total_mass)))
        throw GridError("discretize: total mass must be finite and nonnegative");

    GridDensityT<Scalar> out;
    out.origin = origin;
    out.step = step;
    out.values.resize(n_cells);
    Scalar acc = 0;
    const Scalar neg_slack = Scalar(1e-12) * std::max<Scalar>(total_mass, Scalar(1));
    for (Eigen::Index i = 0; i < n_cells; ++i) {
        Scalar a = origin + static_cast<Scalar>(i) * step;
        Scalar b = origin + static_cast<Scalar>(i + 1) * step;
        Scalar m = cell_mass(a, b);
        if (!std::isfinite(static_cast<double>(m)))
            throw GridError("discretize: non-finite cell integral at cell " + std::to_string(i));
        if (m < -neg_slack)
            throw GridError("discretize: negative cell integral at cell " + std::to_string(i));
        if (m < 0) m = 0;
        out.values[i] = m / step;
        acc += m;
    }
    Scalar defect = total_mass - acc;
    if (defect < -Scalar(1e-9) * std::max<Scalar>(total_mass, Scalar(1)))
        throw GridError("discretize: cell masses exceed declared total mass");
    out.defect = std::max<Scalar>(defect, 0);
    return out;
}

// Mass of the half-open interval (x, x+c]. Partial cell overlaps contribute
// proportionally; the density is flat within a cell, so this is exact for
// the stored histogram.
template <class Scalar>
Scalar interval_mass(const GridDensityT<Scalar>& d, Scalar x, Scalar c) {
    if (!(c > 0)) throw GridError("interval_mass: interval width must be positive");
    if (!d.cells()) return 0;
    Scalar lo = x, hi = x + c;
    if (hi <= d.origin || lo >= d.right_edge()) return 0;
    auto i0 = static_cast<Eigen::Index>(std::floor((std::max(lo, d.origin) - d.origin) / d.step));
    auto i1 = static_cast<Eigen::Index>(std::floor((std::min(hi, d.right_edge()) - d.origin) / d.step));
    i0 = std::min(std::max(i0, Eigen::Index(0)), d.cells() - 1);
    i1 = std::min(std::max(i1, Eigen::Index(0)), d.cells() - 1);
    Scalar m = 0;
    for (Eigen::Index i = i0; i <= i1; ++i) {
        Scalar a = std::max(lo, d.left_edge(i));
        Scalar b = std::min(hi, d.left_edge(i + 1));
        if (b > a) m += d.values[i] * (b - a);
    }
    return m;
}

// Interval mass including the atom at zero when 0 lies in (x, x+c].
template <class Scalar>
Scalar interval_mass(const AtomPlusDensityT<Scalar>& d, Scalar x, Scalar c) {
    Scalar m = interval_mass(d.density, x, c);
    if (x < 0 && 0 <= x + c) m += d.atom;
    return m;
}

// Zero out every cell whose right edge is <= 0. The grid shape and the
// defect are unchanged; only on-grid nonpositive mass is discarded.
template <class Scalar>
GridDensityT<Scalar> restrict_positive(const GridDensityT<Scalar>& d) {
    GridDensityT<Scalar> out = d;
    if (!out.cells()) return out;
    // Right edge of cell i is origin + (i+1)*step; it is <= 0 iff i+1 <= -origin/step.
    double boundary = -static_cast<double>(d.origin) / static_cast<double>(d.step);
    auto k = static_cast<Eigen::Index>(std::floor(boundary + 1e-9));
    k = std::min(std::max(k, Eigen::Index(0)), out.cells());
    out.values.head(k).setZero();
    return out;
}

// Contiguous sub-grid [first, first + count), origin shifted accordingly.
template <class Scalar>
GridDensityT<Scalar> slice(const GridDensityT<Scalar>& d, Eigen::Index first, Eigen::Index count) {
    if (first < 0 || count < 0 || first + count > d.cells()) throw GridError("slice: out of range");
    GridDensityT<Scalar> out;
    out.origin = d.left_edge(first);
    out.step = d.step;
    out.values = d.values.segment(first, count);
    out.defect = d.defect;
    return out;
}

// Tail mass strictly above the boundary origin + j*step, plus defect
// (the defect of a one-sided density sits beyond the right edge).
template <class Scalar>
Scalar boundary_tail(const GridDensityT<Scalar>& d, Eigen::Index j) {
    Scalar m = d.defect;
    if (j < d.cells()) m += d.step * d.values.tail(d.cells() - std::max<Eigen::Index>(j, 0)).sum();
    return m;
}

} // namespace htcp
