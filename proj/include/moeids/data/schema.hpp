#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace moeids::data {

inline constexpr std::size_t kNumClasses = 9;
inline constexpr std::size_t kEncodedWidth = 78;
inline constexpr std::size_t kMatrixRows = 6;
inline constexpr std::size_t kMatrixCols = 13;

/// Class names in report order.
inline constexpr std::array<std::string_view, kNumClasses> kClassNames{
    "Benign",     "SYN Scan",  "TCP Connect Scan", "UDP Scan",     "ICPM flood",
    "UDP flood",  "SYN flood", "HTTP flood",       "Slow rate DoS"};

/// Maps a label cell to a class index. Matching ignores case, spaces,
/// underscores and dashes, and accepts the dataset's compact spellings
/// ("UDPFlood", "SlowrateDoS", "ICMPFlood", ...).
std::optional<int> class_index(std::string_view label);

enum class FeatureKind { kNumeric, kCategorical };

struct FeatureSpec {
  std::string name;
  FeatureKind kind;
  /// Encoded columns: 1 for numeric, vocabulary size - 1 for categorical.
  std::size_t encoded_width;
  /// Index among features of the same kind.
  std::size_t slot;
};

/// Ordered flow-record features and their encoded widths.
class FlowSchema {
 public:
  /// The 5G-NIDD flow feature table: 43 numeric and 5 categorical features,
  /// 78 encoded columns in total.
  static const FlowSchema& nidd();

  explicit FlowSchema(std::vector<FeatureSpec> features);

  const std::vector<FeatureSpec>& features() const { return features_; }
  std::size_t numeric_count() const { return numeric_names_.size(); }
  std::size_t categorical_count() const { return categorical_names_.size(); }
  const std::vector<std::string>& numeric_names() const { return numeric_names_; }
  const std::vector<std::string>& categorical_names() const { return categorical_names_; }
  std::size_t encoded_width() const;
  /// Declared width of categorical feature `slot`.
  std::size_t categorical_width(std::size_t slot) const;
  /// CRC-32 over feature names, kinds, widths and class names.
  std::uint32_t hash() const;

 private:
  std::vector<FeatureSpec> features_;
  std::vector<std::string> numeric_names_;
  std::vector<std::string> categorical_names_;
  std::vector<std::size_t> categorical_widths_;
};

}  // namespace moeids::data
