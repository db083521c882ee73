#pragma once

#include <cstdint>

namespace dssfn {

// Deterministic pseudo-random stream based on the SplitMix64 generator
// (Steele, Lea, Flood 2014). The state transition and output mix are fixed
// constants, so a given seed produces the same stream on every platform and
// compiler. Floating-point draws are built from the top 53 bits of each
// output word, which keeps them exactly reproducible as well.
//
// std::mt19937 with std::uniform_real_distribution is deliberately not used
// here: the distribution's mapping from bits to doubles is
// implementation-defined and differs across standard libraries.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : state_(seed), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  // Next raw 64-bit word.
  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform double in [-1, 1).
  double next_symmetric() { return 2.0 * next_unit() - 1.0; }

  // Uniform integer in [0, bound). Rejection sampling keeps the draw
  // unbiased for every bound. bound must be nonzero.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t threshold = (0ULL - bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  std::uint64_t state_;
  std::uint64_t seed_;
};

}  // namespace dssfn
