#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace iswerm {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Child stream seed: a pure function of (master seed, replication, stage tag).
/// Distinct tags never share a stream within a replication.
inline std::uint64_t child_seed(std::uint64_t master, std::uint64_t rep, std::string_view tag) {
    std::uint64_t s = splitmix64(master);
    s = splitmix64(s ^ splitmix64(rep + 0x632be59bd9b4e019ULL));
    return splitmix64(s ^ fnv1a64(tag));
}

inline double standard_normal(Rng& rng) {
    return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline int uniform_arm(Rng& rng, int num_arms) {
    return std::uniform_int_distribution<int>(0, num_arms - 1)(rng);
}

}  // namespace iswerm
