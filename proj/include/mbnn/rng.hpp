#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace mbnn {

/// Counter-based SplitMix64 generator.
///
/// Draw i (0-based) of a stream with seed s is mix64(s + (i + 1) * 0x9E3779B97F4A7C15),
/// where mix64 is the SplitMix64 finalizer. Uniforms take the top 53 bits;
/// Gaussians use Box-Muller on two consecutive uniforms u1, u2 (cos branch only):
/// z = sqrt(-2 ln(1 - u1)) * cos(2 pi u2). Any implementation following these
/// three lines reproduces the same streams bit for bit.
class CounterRng {
public:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

    explicit CounterRng(std::uint64_t seed, std::uint64_t counter = 0) : seed_(seed), counter_(counter) {}

    static constexpr std::uint64_t mix64(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Independent child stream, e.g. one per microphone or per data split.
    CounterRng split(std::uint64_t stream) const { return CounterRng(mix64(seed_ ^ mix64(stream + kGolden))); }

    std::uint64_t next_u64() { return mix64(seed_ + (++counter_) * kGolden); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double gaussian() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return n ? next_u64() % n : 0; }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

}  // namespace mbnn
