#pragma once

#include <cstdint>

namespace bspot {

// xorshift64* (Marsaglia's xorshift scrambled with Vigna's multiplier).
// Validation sampling is specified against exactly this generator and the
// modulo reduction below, so independent implementations can reproduce the
// sampled offsets and values from the seed alone. Seed 0 maps to a fixed
// nonzero constant because the all-zero state is a fixed point.
class Xorshift64Star {
 public:
  explicit Xorshift64Star(std::uint64_t seed)
      : state_(seed ? seed : 0x9E3779B97F4A7C15ull) {}

  std::uint64_t next() {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1Dull;
  }

  std::uint64_t below(std::uint64_t n) { return n ? next() % n : 0; }

 private:
  std::uint64_t state_;
};

}  // namespace bspot
