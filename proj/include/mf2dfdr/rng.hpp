#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mf2dfdr::rng {

using Engine = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-based child seed: a pure function of (root, key). Draw b of a
// resampling plan always sees substream(seed, b) regardless of scheduling.
inline constexpr std::uint64_t substream(std::uint64_t root, std::uint64_t key) {
    return splitmix64(splitmix64(root) ^ splitmix64(key + 0x632be59bd9b4e019ULL));
}

// FNV-1a, for named substreams ("sampler", "data", ...).
inline constexpr std::uint64_t label_key(std::string_view label) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline constexpr std::uint64_t substream(std::uint64_t root, std::string_view label) {
    return substream(root, label_key(label));
}

inline Engine make_engine(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    return Engine(seq);
}

}  // namespace mf2dfdr::rng
