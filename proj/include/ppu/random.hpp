#ifndef PPU_RANDOM_HPP
#define PPU_RANDOM_HPP

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace ppu {

using Rng = std::mt19937_64;

// Derives an independent stream from a base seed and a stream tag (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

}  // namespace ppu

#endif  // PPU_RANDOM_HPP
