#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "moeids/data/records.hpp"
#include "moeids/data/schema.hpp"
#include "moeids/tensor.hpp"

namespace moeids::data {

/// Everything fitted on the training split that encoding needs.
struct PipelineStats {
  std::vector<double> numeric_min;
  std::vector<double> numeric_max;
  /// Levels of each categorical feature in first-seen order; level 0 is the
  /// dropped reference level.
  std::vector<std::vector<std::string>> vocabularies;
  ImputationTable imputation;
  std::size_t fitted_on = 0;
  /// Accept vocabularies smaller than the schema width by zero-padding.
  bool pad_vocabularies = false;
};

/// Min/max and vocabularies from fully imputed training records.
PipelineStats fit_pipeline_stats(const std::vector<RawRecord>& train, const FlowSchema& schema, ImputationTable imputation,
                                 bool pad_vocabularies = false);

nlohmann::json to_json(const PipelineStats& stats);
PipelineStats pipeline_stats_from_json(const nlohmann::json& j);

struct EncodedSample {
  std::array<double, kEncodedWidth> values{};
  int label = -1;

  /// Row-major 6 x 13 view: element (r, c) is values[13 r + c].
  Tensor matrix() const;
  double at(std::size_t row, std::size_t col) const { return values[row * kMatrixCols + col]; }
};

/// Throws SchemaError listing every feature width unless the fitted
/// vocabularies produce exactly the schema's 78 columns.
void check_encoded_width(const PipelineStats& stats, const FlowSchema& schema);

/// Min-max scaling (zero-width ranges map to 0) and drop-first one-hot
/// encoding (unseen levels map to all zeros), concatenated in schema order.
/// Records must be fully imputed.
std::vector<EncodedSample> encode(const std::vector<RawRecord>& records, const PipelineStats& stats,
                                  const FlowSchema& schema);

/// [indices.size() x 6 x 13] batch tensor of the selected samples.
Tensor make_batch(std::span<const EncodedSample> samples, std::span<const std::size_t> indices);
std::vector<int> batch_labels(std::span<const EncodedSample> samples, std::span<const std::size_t> indices);

}  // namespace moeids::data
