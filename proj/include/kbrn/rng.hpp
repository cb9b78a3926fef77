#pragma once

#include <cstdint>
#include <random>

#include "kbrn/linalg.hpp"

namespace kbrn {

// Seedable random source. The distribution transforms are implemented here
// (not via std::*_distribution, whose output sequences are implementation
// defined) so a seed pins the exact sample stream.
//
// Single-owner mutable state: never share one Rng across concurrent tasks.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; the spare draw is cached.
    double gaussian();

    double gaussian(double mean, double std) { return mean + std * gaussian(); }

    // Uniform integer on {lo, ..., hi} inclusive; throws std::invalid_argument
    // when lo > hi. Rejection sampling keeps the draw exactly uniform.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// n independent draws from N(mean, std^2); std == 0 yields all entries == mean.
// Throws std::invalid_argument for negative std.
Vector sample_gaussian(Rng& rng, double mean, double std, std::size_t n);

std::int64_t sample_uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi);

}  // namespace kbrn
