#pragma once

// Counter-based pseudo-random generator built on the splitmix64 finalizer.
// Each (seed, stream) pair yields an independent, reproducible sequence
// regardless of call interleaving, which is what lets Monte Carlo paths be
// assigned to threads in any order while producing identical output.

#include <cstdint>

namespace htcp {

class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) {
        // Mix seed and stream into a per-stream key; golden-ratio increments
        // keep distinct streams far apart in the counter space.
        key_ = mix(seed + 0x9e3779b97f4a7c15ull * (stream + 1));
        counter_ = mix(key_ ^ 0xbf58476d1ce4e5b9ull);
    }

    std::uint64_t next_u64() {
        counter_ += 0x9e3779b97f4a7c15ull;
        return mix(counter_ ^ key_);
    }

    // Uniform on (0, 1]: 53 significant bits, never zero, so logarithms and
    // inverse CDFs stay finite.
    double next_unit() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ull;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t key_;
    std::uint64_t counter_;
};

} // namespace htcp
