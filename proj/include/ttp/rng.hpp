#pragma once

#include <cstdint>
#include <random>

namespace ttp {

// splitmix64 finalizer; used to decorrelate derived stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic child stream for (seed, a, b). Parallel workers each own one;
// reductions over workers use a fixed order so results are reproducible.
inline std::mt19937_64 derive_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return std::mt19937_64(mix64(mix64(seed ^ 0x5851f42d4c957f2dULL) + mix64(a) * 3 + b));
}

}  // namespace ttp
