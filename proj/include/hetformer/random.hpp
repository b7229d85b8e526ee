#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace hetformer {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Uniform double in [0, 1) from the top 53 bits.
inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Index in [0, n); n must be positive.
inline std::size_t pick(std::mt19937_64& rng, std::size_t n) {
    auto i = static_cast<std::size_t>(unit(rng) * static_cast<double>(n));
    return i < n ? i : n - 1;
}

// Standard normal via Box-Muller; spelled out so streams are identical
// across standard library implementations.
inline double normal(std::mt19937_64& rng) {
    constexpr double kTwoPi = 6.283185307179586476925;
    double u1 = unit(rng);
    const double u2 = unit(rng);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

// FNV-1a over the name, mixed with the seed.
inline std::uint64_t hash_name(std::uint64_t seed, std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(splitmix64(seed) ^ h);
}

// Fisher-Yates with the helpers above; std::shuffle's draw pattern is
// implementation-defined.
template <typename T>
void shuffle(std::vector<T>& xs, std::mt19937_64& rng) {
    for (std::size_t i = xs.size(); i > 1; --i) std::swap(xs[i - 1], xs[pick(rng, i)]);
}

}  // namespace hetformer
