#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

#include "moeids/tensor.hpp"

namespace moeids {

/// Seeded random stream: std::mt19937_64 (a fully specified engine) with
/// uniform and Gaussian transforms implemented here, so a seed yields the same
/// samples on every standard library.
///
/// uniform() takes the top 53 bits of one engine output. normal() uses the
/// Marsaglia polar method and caches the second deviate of each accepted pair.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Unbiased integer in [0, bound).
  std::size_t below(std::size_t bound);
  double normal();

  /// Derive an independent stream; `salt` distinguishes sibling streams.
  Rng fork(std::uint64_t salt) const;

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[below(i)]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer; used to derive child seeds.
std::uint64_t mix_seed(std::uint64_t value);

/// i.i.d. N(0,1) samples of the given shape.
Tensor standard_normal_sample(Rng& rng, const Shape& shape);

}  // namespace moeids
