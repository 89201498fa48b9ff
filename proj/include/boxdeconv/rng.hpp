#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <vector>

namespace boxdeconv {

// One SplitMix64 step (Steele, Lea & Flood). Advances `state` and returns
// the next output word.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Single finalizer output for a given state value.
inline std::uint64_t mix64(std::uint64_t x) { return splitmix64_next(x); }

// Derives a child seed from a root seed and a tuple of identifiers by
// chaining the SplitMix64 finalizer:
//
//   s = root; for each part p: s = mix64(s ^ p); return s
//
// Used for per-trial seeding so results are independent of execution order.
inline std::uint64_t mix_seed(std::uint64_t root,
                              std::initializer_list<std::uint64_t> parts) {
  std::uint64_t s = root;
  for (std::uint64_t p : parts) s = mix64(s ^ p);
  return s;
}

// Small deterministic generator. Identical seeds give identical streams on
// every platform; no libc or libstdc++ distribution is involved.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64_next(state_); }

  // Uniform in [0, 1), 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [lo, hi], inclusive. Rejection sampling keeps the
  // draw unbiased.
  int uniform_int(int lo, int hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t u;
    do {
      u = next_u64();
    } while (u >= limit);
    return lo + static_cast<int>(u % span);
  }

  bool next_bool() { return (next_u64() & 1ULL) != 0; }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  // `count` distinct indices from {0, ..., n-1}, ascending. Partial
  // Fisher-Yates over an index table.
  std::vector<int> sample_indices(int n, int count) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < count; ++i) {
      const int j = uniform_int(i, n - 1);
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    std::vector<int> out(idx.begin(), idx.begin() + count);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace boxdeconv
