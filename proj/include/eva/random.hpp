#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace eva {

// Uniform helpers on top of mt19937_64. The standard distributions are not pinned
// across library implementations; these are, which keeps seeded runs bit-identical
// everywhere.

inline double uniform_unit(std::mt19937_64& rng) {
    // 53 random bits in [0, 1)
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform_unit(rng);
}

// Unbiased integer in [0, n) via rejection.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

// Standard normal via Box-Muller on the pinned uniform.
inline double normal_unit(std::mt19937_64& rng) {
    double u1 = uniform_unit(rng);
    while (u1 == 0.0) u1 = uniform_unit(rng);
    const double u2 = uniform_unit(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Geometric on {1, 2, ...} with mean 1/p, by CDF inversion.
inline std::uint64_t geometric_from_mean(std::mt19937_64& rng, double mean) {
    const double p = 1.0 / mean;
    double u = uniform_unit(rng);
    while (u == 0.0) u = uniform_unit(rng);
    const double k = 1.0 + std::floor(std::log(u) / std::log1p(-p));
    return k < 1.0 ? 1 : static_cast<std::uint64_t>(k);
}

// Splittable sub-seed so every (seed, stream) pair gets an independent generator.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace eva
