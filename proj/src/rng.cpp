#include "kbrn/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace kbrn {

double Rng::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // u in (0,1] so log(u) is finite.
    const double u = 1.0 - uniform();
    const double v = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double theta = 2.0 * std::numbers::pi * v;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) {
        throw std::invalid_argument("uniform_int: lo " + std::to_string(lo) + " > hi " +
                                    std::to_string(hi));
    }
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return lo + static_cast<std::int64_t>(next_u64());  // full 64-bit span
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t draw;
    do {
        draw = next_u64();
    } while (draw >= limit);
    return lo + static_cast<std::int64_t>(draw % range);
}

Vector sample_gaussian(Rng& rng, double mean, double std, std::size_t n) {
    if (std < 0.0) {
        throw std::invalid_argument("sample_gaussian: negative std " + std::to_string(std));
    }
    Vector out(n);
    for (auto& x : out) x = mean + std * rng.gaussian();
    return out;
}

std::int64_t sample_uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
    return rng.uniform_int(lo, hi);
}

}  // namespace kbrn
