#pragma once

// Convolution of cell-averaged densities. The discrete sequence
// d_k = sum_i a_i b_{k-i} gives the exact convolution of the two step
// functions evaluated cellwise; averaging adjacent entries,
// c_k = step/2 * (d_{k-1} + d_k), is then the exact cell average of that
// convolution (each pair of source cells produces a triangle over two
// result cells, splitting its mass half and half). The scheme preserves
// mass and first moments exactly, so defects stay purely bookkeeping.

#include "htcp/grid_density.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <complex>
#include <vector>

namespace htcp {

// Window the result of a convolution is allowed to occupy. Cells that fall
// entirely outside [x_lo, x_hi] are dropped and their mass moves to the
// defect. Cells straddling a bound are dropped too: the grid only ever
// holds full cells.
struct SupportCap {
    double x_lo = -std::numeric_limits<double>::infinity();
    double x_hi = std::numeric_limits<double>::infinity();

    static SupportCap none() { return {}; }
    static SupportCap window(double lo, double hi) { return {lo, hi}; }
    static SupportCap upper(double hi) { return {-std::numeric_limits<double>::infinity(), hi}; }
};

// Running account of mass clamped away when spectral round-off produces
// tiny negative cell values. Thread-local so parallel walkers do not race.
struct ConvolveStats {
    double last_clamped = 0;
    double max_clamped = 0;
    std::uint64_t convolutions = 0;
};

inline ConvolveStats& convolve_stats() {
    thread_local ConvolveStats stats;
    return stats;
}

namespace detail {

// Plain linear convolution, length m + n - 1. Small products are done
// directly; larger ones go through a zero-padded power-of-two FFT.
template <class Scalar>
Eigen::Array<Scalar, Eigen::Dynamic, 1> linear_convolve(
    const Eigen::Array<Scalar, Eigen::Dynamic, 1>& a,
    const Eigen::Array<Scalar, Eigen::Dynamic, 1>& b) {
    const Eigen::Index m = a.size(), n = b.size();
    const Eigen::Index out_len = m + n - 1;
    Eigen::Array<Scalar, Eigen::Dynamic, 1> d(out_len);

    if (m * n <= 16384) {
        d.setZero();
        for (Eigen::Index i = 0; i < m; ++i) {
            if (a[i] == Scalar(0)) continue;
            d.segment(i, n) += a[i] * b;
        }
        return d;
    }

    Eigen::Index l = 1;
    while (l < out_len) l <<= 1;
    std::vector<Scalar> pa(static_cast<std::size_t>(l), Scalar(0));
    std::vector<Scalar> pb(static_cast<std::size_t>(l), Scalar(0));
    std::copy(a.data(), a.data() + m, pa.begin());
    std::copy(b.data(), b.data() + n, pb.begin());

    Eigen::FFT<Scalar> fft;
    std::vector<std::complex<Scalar>> fa, fb;
    fft.fwd(fa, pa);
    fft.fwd(fb, pb);
    for (std::size_t i = 0; i < fa.size(); ++i) fa[i] *= fb[i];
    std::vector<Scalar> out;
    fft.inv(out, fa);
    for (Eigen::Index k = 0; k < out_len; ++k) d[k] = out[static_cast<std::size_t>(k)];
    return d;
}

} // namespace detail

// Convolve two densities on grids with equal step. The result grid starts
// at a.origin + b.origin and covers the full summed support, truncated to
// `cap` with the excess mass booked into the defect. Mass conservation:
// result.total() == a.total() * b.total() up to round-off, enforced here.
template <class Scalar>
GridDensityT<Scalar> convolve(const GridDensityT<Scalar>& a, const GridDensityT<Scalar>& b,
                              const SupportCap& cap = SupportCap::none()) {
    detail::check_finite_nonneg(a, "convolve");
    detail::check_finite_nonneg(b, "convolve");
    if (!a.cells() || !b.cells()) throw GridError("convolve: empty operand");
    if (std::abs(static_cast<double>(a.step - b.step)) >
        1e-12 * static_cast<double>(a.step))
        throw GridError("convolve: mismatched steps");

    const Scalar h = a.step;
    const Scalar total_product = a.total() * b.total();
    Eigen::Array<Scalar, Eigen::Dynamic, 1> d = detail::linear_convolve(a.values, b.values);

    const Eigen::Index full_len = a.cells() + b.cells();
    GridDensityT<Scalar> out;
    out.origin = a.origin + b.origin;
    out.step = h;
    out.values.resize(full_len);
    out.values[0] = (h / 2) * d[0];
    out.values[full_len - 1] = (h / 2) * d[full_len - 2];
    if (full_len > 2)
        out.values.segment(1, full_len - 2) =
            (h / 2) * (d.segment(0, full_len - 2) + d.segment(1, full_len - 2));

    // Spectral round-off can leave tiny negative entries; clamp and account.
    Scalar clamped = -h * out.values.min(Scalar(0)).sum();
    if (clamped > 0) out.values = out.values.max(Scalar(0));
    auto& stats = convolve_stats();
    stats.last_clamped = static_cast<double>(clamped);
    stats.max_clamped = std::max(stats.max_clamped, static_cast<double>(clamped));
    ++stats.convolutions;
    const double clamp_budget = 1e-10 * std::max(static_cast<double>(total_product), 1.0);
    if (static_cast<double>(clamped) > clamp_budget)
        throw ComputationError("convolve: clamped negative mass " + std::to_string(clamped) +
                               " exceeds round-off budget");

    // Apply the support cap: drop whole cells outside [x_lo, x_hi].
    Eigen::Index first = 0, last = full_len; // keep [first, last)
    if (std::isfinite(cap.x_lo)) {
        double k = (cap.x_lo - static_cast<double>(out.origin)) / static_cast<double>(h);
        first = std::min<Eigen::Index>(std::max<Eigen::Index>(
            static_cast<Eigen::Index>(std::floor(k + 1e-9)), 0), full_len);
    }
    if (std::isfinite(cap.x_hi)) {
        double k = (cap.x_hi - static_cast<double>(out.origin)) / static_cast<double>(h);
        last = std::min<Eigen::Index>(std::max<Eigen::Index>(
            static_cast<Eigen::Index>(std::floor(k + 1e-9)), first), full_len);
    }
    if (first > 0 || last < full_len) {
        GridDensityT<Scalar> kept;
        kept.origin = out.left_edge(first);
        kept.step = h;
        kept.values = out.values.segment(first, last - first);
        out = std::move(kept);
    }

    Scalar defect = total_product - out.mass();
    if (static_cast<double>(defect) <
        -1e-9 * std::max(static_cast<double>(total_product), 1.0))
        throw ComputationError("convolve: mass conservation violated");
    out.defect = std::max<Scalar>(defect, 0);
    return out;
}

// Memoized binary-exponentiation ladder for convolution powers. Powers of
// two are built once and shared across every exponent requested from the
// same ladder, so a series over n reuses all intermediate squarings.
template <class Scalar>
class ConvPowerLadderT {
public:
    ConvPowerLadderT(GridDensityT<Scalar> base, SupportCap cap = SupportCap::none())
        : cap_(cap) {
        detail::check_finite_nonneg(base, "conv_power");
        if (!base.cells()) throw GridError("conv_power: empty base density");
        pow2_.push_back(std::move(base));
    }

    // base^(2^k) under the ladder's support cap.
    const GridDensityT<Scalar>& power_of_two(int k) {
        while (static_cast<int>(pow2_.size()) <= k) {
            const auto& top = pow2_.back();
            pow2_.push_back(convolve(top, top, cap_));
        }
        return pow2_[static_cast<std::size_t>(k)];
    }

    // n-fold convolution power, combining set bits in ascending order.
    GridDensityT<Scalar> power(std::int64_t n) {
        if (n <= 0) throw GridError("conv_power: exponent must be positive");
        GridDensityT<Scalar> acc;
        bool have = false;
        for (int bit = 0; n >> bit; ++bit) {
            if (!((n >> bit) & 1)) continue;
            const auto& block = power_of_two(bit);
            if (!have) {
                acc = block;
                have = true;
            } else {
                acc = convolve(acc, block, cap_);
            }
        }
        return acc;
    }

private:
    SupportCap cap_;
    std::vector<GridDensityT<Scalar>> pow2_;
};

using ConvPowerLadder = ConvPowerLadderT<double>;

template <class Scalar>
GridDensityT<Scalar> conv_power(const GridDensityT<Scalar>& f, std::int64_t n,
                                const SupportCap& cap = SupportCap::none()) {
    ConvPowerLadderT<Scalar> ladder(f, cap);
    return ladder.power(n);
}

} // namespace htcp
