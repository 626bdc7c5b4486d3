#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace rolab {

using Rng = std::mt19937_64;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_name(std::string_view name) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seed of a named substream. Streams with different names are independent,
/// so drawing more numbers from one never shifts another.
constexpr std::uint64_t substream_seed(std::uint64_t seed, std::string_view name) noexcept {
    return mix64(mix64(seed) ^ hash_name(name));
}

constexpr std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return mix64(mix64(seed) + mix64(index ^ 0x5bd1e995ULL));
}

inline Rng make_rng(std::uint64_t seed, std::string_view name) {
    return Rng(substream_seed(seed, name));
}

/// Uniform draw in [lo, hi]. Implemented directly on the engine output so the
/// sequence does not depend on the standard library's distribution code.
inline double uniform(Rng& rng, double lo, double hi) {
    const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * unit;
}

/// Uniform integer in [0, n).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    // Lemire-style rejection keeps the draw unbiased.
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

}  // namespace rolab
