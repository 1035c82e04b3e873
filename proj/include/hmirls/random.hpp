#pragma once

// Seeded randomness. The generator is std::mt19937_64 and normal deviates come
// from std::normal_distribution<double>; streams are reproducible for a fixed
// seed within one standard-library implementation.

#include <cstdint>
#include <random>

namespace hmirls {

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of an experiment cell: base seed mixed with the sweep coordinates.
/// seed = mix64(mix64(mix64(base) ^ a) ^ b).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(mix64(base) ^ a) ^ b);
}

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

}  // namespace hmirls
