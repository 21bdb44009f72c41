#pragma once

#include <cstdint>
#include <random>

namespace paircal {

/// Worker-thread cap: PAIRCAL_THREADS when set and positive, otherwise the
/// OpenMP default for this machine. Always at least 1.
int max_threads();

/// Execution mode for the parallel kernels. Serial keeps a reference path
/// whose results the tests compare against the OpenMP path.
enum class Exec { Serial, Parallel };

namespace detail {

/// SplitMix64 step; used to derive independent substream seeds from
/// (seed, stream_index) so sharded work is schedule-independent.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Substream seed for shard `index` of a run seeded with `seed`. Two rounds
/// of SplitMix64 decorrelate consecutive indices.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index * 0x9e3779b97f4a7c15ULL + 1));
}

inline std::mt19937_64 substream_rng(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(substream_seed(seed, index));
}

}  // namespace detail

}  // namespace paircal
