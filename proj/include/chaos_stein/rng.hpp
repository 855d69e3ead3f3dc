#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace chaos_stein {

/// Engine used by every sampler. Each Monte-Carlo chunk owns one, seeded by
/// derive_seed(seed, stream, chunk).
using Rng = std::mt19937_64;

/// Seed used when the caller does not supply one.
inline constexpr std::uint64_t kDefaultSeed = 0x5EED'2013'C4A0'5ULL;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Stream derivation rule: splitmix64 chained over (seed, stream, chunk).
/// Distinct (stream, chunk) pairs give statistically independent engines.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t chunk) noexcept;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0, std::uint64_t chunk = 0) {
  return Rng{derive_seed(seed, stream, chunk)};
}

/// Worker count: CHAOS_STEIN_THREADS if set to a positive integer, otherwise
/// std::thread::hardware_concurrency().
unsigned worker_count();

/// Fixed number of draws per Monte-Carlo chunk. Results depend on the chunk
/// layout only, never on the worker count.
inline constexpr std::size_t kChunkSize = 1 << 14;

/// Runs body(chunk_index, begin, end, rng) for every chunk of [0, total),
/// distributing chunks over worker threads. The rng handed to a chunk is
/// make_rng(seed, stream, chunk_index).
void for_each_chunk(std::size_t total, std::uint64_t seed, std::uint64_t stream,
                    const std::function<void(std::size_t, std::size_t, std::size_t, Rng&)>& body);

inline std::size_t chunk_count(std::size_t total) { return (total + kChunkSize - 1) / kChunkSize; }

/// Welford accumulator with Chan's merge.
struct RunningStats {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) noexcept {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }
  void merge(const RunningStats& o) noexcept;
  double variance() const noexcept { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
  double std_error() const noexcept {
    return count > 1 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
  }
};

/// Mean and standard error of f(rng) over n draws, chunked and reproducible.
RunningStats mc_mean(std::size_t n, std::uint64_t seed, std::uint64_t stream,
                     const std::function<double(Rng&)>& draw);

}  // namespace chaos_stein
