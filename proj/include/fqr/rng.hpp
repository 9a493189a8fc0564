#pragma once

#include <cstdint>
#include <random>

namespace fqr {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Independent stream for (master seed, purpose, index). Replicate b of a
/// procedure depends only on these three numbers, never on scheduling.
inline Rng derive_stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index) {
    const std::uint64_t key = splitmix64(splitmix64(seed ^ splitmix64(purpose)) + index);
    std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32),
                      static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(index)};
    return Rng(seq);
}

namespace stream {
inline constexpr std::uint64_t block_bootstrap = 1;
inline constexpr std::uint64_t wild_bootstrap = 2;
inline constexpr std::uint64_t simulation = 3;
inline constexpr std::uint64_t simulation_cluster = 4;
}  // namespace stream

}  // namespace fqr
