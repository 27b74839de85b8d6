#pragma once

#include <cmath>
#include <cstdint>

namespace unistrat {

// SplitMix64 finalizer. Bijective on 64-bit ints; used as a counter-based
// generator so that every (seed, day, chain, step) tuple addresses an
// independent, reproducible draw with no mutable stream state.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline double to_unit(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53; // [0,1)
}

// Counter-based stream keyed by (seed, day, chain). Each step may consume a
// small number of draws, addressed by a call slot.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t day, std::uint64_t chain)
        : base_(mix64(mix64(mix64(seed) + day) + chain)) {}

    std::uint64_t bits(std::uint64_t step, std::uint64_t call = 0) const {
        return mix64(base_ + step * 4 + call);
    }

    double uniform(std::uint64_t step, std::uint64_t call = 0) const {
        return to_unit(bits(step, call));
    }

    // Uniform integer in [0, n). n must be >= 1.
    std::uint64_t uniform_int(std::uint64_t step, std::uint64_t call, std::uint64_t n) const {
        return static_cast<std::uint64_t>(uniform(step, call) * static_cast<double>(n));
    }

private:
    std::uint64_t base_;
};

// Sequential convenience stream for test-data generation and synthetic
// markets; same keyed construction, consumed in call order.
class SeqRng {
public:
    explicit SeqRng(std::uint64_t seed) : base_(mix64(seed)), counter_(0) {}

    std::uint64_t next_bits() { return mix64(base_ + ++counter_); }
    double uniform() { return to_unit(next_bits()); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::uint64_t uniform_int(std::uint64_t n) {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
    }

    // Box-Muller; two uniforms per draw keeps the stream layout fixed.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

private:
    std::uint64_t base_;
    std::uint64_t counter_;
};

} // namespace unistrat
