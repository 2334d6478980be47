#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace moeids::data {

struct SplitIndices {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

/// Per-class split: each class's indices are shuffled with the seeded stream
/// and floor(train_fraction * count) go to train, the rest to test. Every
/// class present must have at least 2 samples.
SplitIndices stratified_split(std::span<const int> labels, double train_fraction, std::uint64_t seed);

template <typename T>
std::vector<T> select(std::span<const T> items, std::span<const std::size_t> indices) {
  std::vector<T> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(items[i]);
  return out;
}

}  // namespace moeids::data
