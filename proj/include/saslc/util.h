// Small numeric, random and threading helpers shared across modules.

#ifndef SASLC_UTIL_H_
#define SASLC_UTIL_H_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>

namespace saslc {

inline double log_sum_exp(std::span<const double> xs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : xs) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}

inline double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);
// Throws std::invalid_argument on trailing garbage or empty input.
double parse_double(const std::string& s);

// SplitMix64 step; used to derive independent child seeds from a master seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// mt19937_64 with distribution code written out so draws are identical
// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Uniform integer on [0, n).
  std::size_t index(std::size_t n);
  double exponential() { return -std::log1p(-uniform()); }
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Runs fn(begin, end, chunk) over fixed chunks of [0, n). The chunking
// depends on n only, so callers that reduce per-chunk results in chunk
// order get output independent of the thread count.
struct ChunkPlan {
  std::size_t n = 0;
  std::size_t chunk_size = 1;
  std::size_t num_chunks = 0;
};

ChunkPlan plan_chunks(std::size_t n, std::size_t max_chunks = 64,
                      std::size_t min_chunk = 8);

void parallel_chunks(const ChunkPlan& plan, unsigned threads,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

unsigned default_threads();

}  // namespace saslc

#endif  // SASLC_UTIL_H_
