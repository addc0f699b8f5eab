#pragma once

// Random streams for replications.
//
// Every (dgm, repetition) work unit gets its own engine whose seed is a pure
// function of (master_seed, dgm index, rep index). No state is carried from
// one unit to the next, so results do not depend on scheduling or on how many
// workers run the study.

#include <cstdint>
#include <random>

namespace rdgm {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer (Steele, Lea & Flood 2014).
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based seed for one work unit. Chained so that swapping the two
/// indices gives a different stream.
constexpr std::uint64_t stream_seed(std::uint64_t master_seed, std::uint64_t dgm_index,
                                    std::uint64_t rep_index) noexcept {
  std::uint64_t h = splitmix64(master_seed ^ 0x5244474d5f726e67ULL);
  h = splitmix64(h ^ dgm_index);
  h = splitmix64(h ^ (rep_index + 0x632be59bd9b4e019ULL));
  return h;
}

/// Seeded engine for a call-local random purpose (down-selection, sampling
/// strategies). `purpose` separates streams drawn from the same user seed.
inline Rng make_rng(std::uint64_t seed, std::uint64_t purpose = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(purpose >> 32)};
  return Rng(seq);
}

inline Rng stream_rng(std::uint64_t master_seed, std::uint64_t dgm_index, std::uint64_t rep_index) {
  return Rng(stream_seed(master_seed, dgm_index, rep_index));
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) (Lemire's nearly divisionless method).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  unsigned __int128 m = static_cast<unsigned __int128>(rng()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(rng()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace rdgm
