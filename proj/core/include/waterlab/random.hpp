#pragma once

// Counter-based random numbers. Every draw is a pure function of
// (seed, stream, counter), so results are identical across platforms and
// independent streams never perturb each other.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace waterlab::rng {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// FNV-1a, used to turn node identifiers into stream keys.
constexpr std::uint64_t hash_name(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t mix(std::uint64_t a, std::uint64_t b) noexcept {
    return splitmix64(a ^ splitmix64(b));
}

/// Uniform double in [0, 1) with 53 random bits.
constexpr double to_unit(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter,
                      std::uint64_t draw = 0) noexcept {
    return to_unit(mix(mix(mix(seed, stream), counter), draw));
}

/// Standard normal via Box-Muller on two counter draws.
inline double normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
    const double u1 = 1.0 - uniform(seed, stream, counter, 0);  // (0, 1]
    const double u2 = uniform(seed, stream, counter, 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace waterlab::rng
