#pragma once

#include <cstdint>
#include <random>

namespace salseg {

// splitmix64 step; used to derive independent stream seeds from (seed, index)
// pairs so scene generation stays order-free and reproducible.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::mt19937_64 make_rng(uint64_t seed) { return std::mt19937_64(seed); }

inline std::mt19937_64 make_rng(uint64_t seed, uint64_t stream) {
    return std::mt19937_64(mix64(mix64(seed) ^ stream));
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gaussian(std::mt19937_64& rng, double sigma) {
    return std::normal_distribution<double>(0.0, sigma)(rng);
}

}  // namespace salseg
