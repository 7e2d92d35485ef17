#pragma once

#include <cstdint>
#include <random>

namespace bridle {

using Rng = std::mt19937_64;

// splitmix64 finalizer; derives independent sub-seeds from (seed, tag)
// so that each consumer of randomness owns a stable stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t tag = 0) {
  return Rng(derive_seed(seed, tag));
}

}  // namespace bridle
