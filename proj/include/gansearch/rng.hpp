#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>

namespace gansearch {

// Counter-based generator: the n-th output is a pure function of (key, n).
// split() derives an independent stream, so work handed to other threads or
// to other population members can be seeded from one root without sharing
// mutable state.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : key_(mix(seed ^ kSeedSalt)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() { return mix(key_ + (counter_++) * kGolden); }

  // Independent child stream; does not advance this generator.
  [[nodiscard]] Rng split(std::uint64_t stream_id) const;

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller.
  double normal();
  // Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kSeedSalt = 0x5851F42D4C957F2DULL;
  static std::uint64_t mix(std::uint64_t z);

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace gansearch
