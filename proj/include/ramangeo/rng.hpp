#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ramangeo/errors.hpp"

namespace ramangeo {

using Rng = std::mt19937_64;

/// Seed an engine through splitmix64 so that nearby seeds give unrelated streams.
inline Rng seeded_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z = z ^ (z >> 31);
    return Rng(z);
}

/// Uniform double in [0, 1) with 53 random bits. Identical on every platform.
inline double uniform_real(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n). Rejection keeps the distribution exact.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
    if (n == 0) throw ValueError("uniform_below: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = rng();
    while (v >= limit) v = rng();
    return v % n;
}

/// Standard normal draw via Box-Muller (second value discarded).
inline double standard_normal(Rng& rng) {
    double u1 = uniform_real(rng);
    while (u1 <= 0.0) u1 = uniform_real(rng);
    const double u2 = uniform_real(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

/// Normal(0, stddev^2) truncated to +/- bound_sigmas standard deviations,
/// by rejection.
inline double truncated_normal(Rng& rng, double stddev, double bound_sigmas = 2.0) {
    for (;;) {
        const double v = standard_normal(rng);
        if (std::fabs(v) <= bound_sigmas) return v * stddev;
    }
}

/// Fisher-Yates shuffle driven by uniform_below; reproducible across platforms.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(items[i - 1], items[j]);
    }
}

} // namespace ramangeo
