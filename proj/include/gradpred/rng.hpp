#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace gradpred {

/// splitmix64 (Steele, Lea & Flood). State advances by the golden-ratio
/// increment; each output is a bijective mix of the state.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer on [0, n). Plain modulo; bias is below 2^-40 for the
    /// ranges used here.
    std::uint64_t below(std::uint64_t n) { return next() % n; }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller, one draw per call (the sine branch is
    /// discarded so the stream position stays a fixed function of call count).
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t state_;
};

}  // namespace gradpred
