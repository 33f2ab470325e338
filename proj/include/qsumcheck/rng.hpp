#pragma once

// Seeded generator with portable output. std::mt19937_64 raw outputs are fixed by the
// standard; the distributions in <random> are not, so bounded draws are done here by
// rejection.

#include <gmpxx.h>

#include <cmath>
#include <cstdint>
#include <random>

#include "qsumcheck/errors.hpp"

namespace qsc {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  /// Independent stream for trial `index` of an experiment seeded with `seed`.
  static Rng for_trial(std::uint64_t seed, std::uint64_t index) {
    return Rng(splitmix64(splitmix64(seed) ^ splitmix64(index + 0x5851F42D4C957F2DULL)));
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw InputError("empty range");
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound + 1) % bound;
    for (;;) {
      const std::uint64_t x = engine_();
      if (x <= limit) return x % bound;
    }
  }

  /// Uniform integer in [0, bound): draw bitlen(bound - 1) random bits, reject values >= bound.
  mpz_class below(const mpz_class& bound) {
    if (bound <= 0) throw InputError("empty range");
    if (bound == 1) return mpz_class(0);
    const mpz_class top = bound - 1;
    const std::size_t bits = mpz_sizeinbase(top.get_mpz_t(), 2);
    const std::size_t words = (bits + 63) / 64;
    const std::size_t excess = words * 64 - bits;
    for (;;) {
      mpz_class x(0);
      for (std::size_t w = 0; w < words; ++w) {
        std::uint64_t v = engine_();
        if (w == 0 && excess) v >>= excess;
        x <<= 64;
        // mpz_class has no uint64 constructor on every platform; split in halves.
        x += mpz_class(static_cast<unsigned long>(v >> 32)) * 4294967296UL +
             static_cast<unsigned long>(v & 0xFFFFFFFFULL);
      }
      if (x < bound) return x;
    }
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (used for random test operators only).
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace qsc
