#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rfs {

// Seeded generator with explicit scalar draws. All randomness in the library
// goes through this class so results are reproducible for a given seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform in [0,1).
    double uniform() {
        // 53 random mantissa bits, avoids distribution-dependent behaviour.
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller (deterministic draw order, no caching).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    std::uint64_t next_u64() { return engine_(); }

    // Integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return engine_() % n; }

    // Independent stream for a sub-task; decorrelates from the parent stream.
    Rng fork(std::uint64_t salt) {
        return Rng(engine_() ^ (salt * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull));
    }

private:
    std::mt19937_64 engine_;
};

} // namespace rfs
