#pragma once

#include <cstdint>
#include <random>

namespace cacnet {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent seed streams from
// (seed, index) pairs so parallel generators never share a sequence.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

inline Rng make_rng(std::uint64_t seed, std::uint64_t index) { return Rng(mix_seed(seed, index)); }

}  // namespace cacnet
