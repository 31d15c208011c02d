#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace rppg {

inline std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and a path of indices,
// e.g. (seed, grid point, trial). Same inputs give the same stream no matter
// which thread consumes it.
inline std::uint64_t DeriveSeed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = SplitMix64(base);
  for (std::uint64_t p : path) h = SplitMix64(h ^ SplitMix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

inline std::mt19937_64 MakeEngine(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  return std::mt19937_64(DeriveSeed(base, path));
}

}  // namespace rppg
