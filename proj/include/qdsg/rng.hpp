#pragma once

#include <cstdint>
#include <random>

namespace qdsg {

// All randomness in the project flows through this wrapper so that a given
// seed produces the same stream on every platform. std::mt19937_64 output is
// pinned by the standard; the uniform mapping below avoids the
// implementation-defined std::uniform_real_distribution.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  /// Uniform double in [0, 1), 53 random bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound). Exact when bound is a power of two;
  /// modulo bias is negligible for the small bounds used here.
  std::uint64_t below(std::uint64_t bound) { return gen_() % bound; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace qdsg
