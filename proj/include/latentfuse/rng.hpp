#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace latentfuse {

/// Counter-based pseudo-random generator (splitmix64 finalizer).
///
/// Draw i of stream `seed` is a pure function of (seed, i), so results
/// are identical across platforms, compilers and call orderings.  That
/// property is load-bearing: the CLI promises byte-identical output for
/// identical seeds.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    /// i-th raw 64-bit draw of this stream.
    std::uint64_t bits(std::uint64_t i) const {
        std::uint64_t z = seed_ + (i + 1) * 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform(std::uint64_t i) const {
        return static_cast<double>(bits(i) >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller on draws (2i, 2i+1).
    double normal(std::uint64_t i) const {
        // Guard the log: shift u1 away from exact zero.
        double u1 = (static_cast<double>(bits(2 * i) >> 11) + 0.5) * 0x1.0p-53;
        double u2 = uniform(2 * i + 1);
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t seed() const { return seed_; }

    /// Independent stream for a named sub-purpose of this seed.
    CounterRng substream(std::uint64_t tag) const {
        CounterRng mixer(seed_ ^ 0xA5A5A5A5A5A5A5A5ULL);
        return CounterRng(mixer.bits(tag));
    }

private:
    std::uint64_t seed_;
};

}  // namespace latentfuse
