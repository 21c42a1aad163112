#pragma once

// Single-stream RNG wrapper. One engine per run, seeded once; every random
// decision in a run draws from it in dispatch order, which is what makes
// (scenario, seed) -> trace a pure function.

#include <cstdint>
#include <random>

namespace seeknet {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double u01() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased uniform integer in [0, n). Rejection sampling keeps the
  // distribution exact (the backoff uniformity test is chi-squared).
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  bool bernoulli(double p) { return u01() < p; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace seeknet
