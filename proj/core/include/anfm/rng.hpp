#pragma once

#include <cstdint>
#include <random>

namespace anfm {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent per-item seeds from a base seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline Rng derived_rng(std::uint64_t seed, std::uint64_t index) {
  return Rng(mix_seed(seed ^ mix_seed(index)));
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

}  // namespace anfm
