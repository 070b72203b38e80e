#ifndef NFLOC_RANDOM_HPP
#define NFLOC_RANDOM_HPP

#include <cstdint>
#include <random>

namespace nfloc {

using Rng = std::mt19937_64;

// splitmix64 finalizer; decorrelates neighbouring (seed, stream) pairs.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent generator for Monte Carlo trial `stream` under `master_seed`.
inline Rng substream(std::uint64_t master_seed, std::uint64_t stream) {
  std::seed_seq seq{mix64(master_seed), mix64(master_seed ^ mix64(stream + 1)), stream};
  return Rng(seq);
}

}  // namespace nfloc

#endif  // NFLOC_RANDOM_HPP
