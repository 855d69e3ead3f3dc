#include "chaos_stein/rng.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

namespace chaos_stein {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t chunk) noexcept {
  std::uint64_t s = splitmix64(seed);
  s = splitmix64(s ^ splitmix64(stream + 0x51A7));
  return splitmix64(s ^ splitmix64(chunk + 0xC4C4));
}

unsigned worker_count() {
  if (const char* env = std::getenv("CHAOS_STEIN_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

void for_each_chunk(std::size_t total, std::uint64_t seed, std::uint64_t stream,
                    const std::function<void(std::size_t, std::size_t, std::size_t, Rng&)>& body) {
  const std::size_t chunks = chunk_count(total);
  const auto run_chunk = [&](std::size_t c) {
    Rng rng = make_rng(seed, stream, c);
    const std::size_t begin = c * kChunkSize;
    const std::size_t end = std::min(total, begin + kChunkSize);
    body(c, begin, end, rng);
  };
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), chunks));
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < chunks; c = next++) {
          try {
            run_chunk(c);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

void RunningStats::merge(const RunningStats& o) noexcept {
  if (o.count == 0) return;
  if (count == 0) {
    *this = o;
    return;
  }
  const double n1 = static_cast<double>(count);
  const double n2 = static_cast<double>(o.count);
  const double d = o.mean - mean;
  const double n = n1 + n2;
  mean += d * n2 / n;
  m2 += o.m2 + d * d * n1 * n2 / n;
  count += o.count;
}

RunningStats mc_mean(std::size_t n, std::uint64_t seed, std::uint64_t stream,
                     const std::function<double(Rng&)>& draw) {
  std::vector<RunningStats> parts(chunk_count(n));
  for_each_chunk(n, seed, stream, [&](std::size_t c, std::size_t b, std::size_t e, Rng& rng) {
    RunningStats s;
    for (std::size_t i = b; i < e; ++i) s.add(draw(rng));
    parts[c] = s;
  });
  RunningStats total;
  for (const auto& p : parts) total.merge(p);
  return total;
}

}  // namespace chaos_stein
