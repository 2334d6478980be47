#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "moeids/data/schema.hpp"

namespace moeids::data {

/// Synthetic flow CSV in the 5G-NIDD column layout. Each class has its own
/// numeric centroid and a preferred level per categorical feature, so the
/// classes are well separated. Every categorical level of the full
/// vocabularies (8/12/6/3/11) appears in each class.
struct SyntheticFlowOptions {
  std::vector<std::size_t> rows_per_class = std::vector<std::size_t>(kNumClasses, 200);
  std::uint64_t seed = 1;
  /// Probability that any feature cell is left empty.
  double missing_rate = 0.0;
  /// Standard deviation of numeric noise around the class centroid.
  double spread = 1.0;
  std::string label_column = "Attack Type";
};

/// Level names used for each categorical feature, in schema slot order.
const std::vector<std::vector<std::string>>& synthetic_vocabularies();

/// Dataset spelling of each class label, e.g. "SYNScan", "SlowrateDoS".
const std::vector<std::string>& dataset_label_names();

/// Writes header plus rows; rows of all classes are interleaved.
void write_synthetic_flows(std::ostream& out, const FlowSchema& schema, const SyntheticFlowOptions& options);

}  // namespace moeids::data
