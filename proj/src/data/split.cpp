#include "moeids/data/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "moeids/errors.hpp"
#include "moeids/rng.hpp"

namespace moeids::data {

SplitIndices stratified_split(std::span<const int> labels, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie strictly between 0 and 1");
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  Rng rng(seed);
  SplitIndices split;
  for (auto& [label, members] : by_class) {
    if (members.size() < 2) {
      throw StratificationError("class " + std::to_string(label) + " has " + std::to_string(members.size()) +
                                " sample(s); stratification needs at least 2");
    }
    rng.shuffle(std::span<std::size_t>(members));
    // The small epsilon keeps exact products such as 0.6 * 100 from flooring to 59.
    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(members.size()) + 1e-9));
    split.train.insert(split.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test.insert(split.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

}  // namespace moeids::data
