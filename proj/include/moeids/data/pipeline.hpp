#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "moeids/data/encoder.hpp"
#include "moeids/data/records.hpp"
#include "moeids/data/schema.hpp"

namespace moeids::data {

/// How missing cells are filled relative to the train/test split.
enum class ImputationProtocol {
  /// Imputers fitted on the training split; per-class fill on train, global fill on test.
  kLeakFree,
  /// Per-class imputers fitted and applied on the whole file before splitting.
  /// Reproduces the original protocol but leaks labels into test features.
  kVerbatim,
};

std::string to_string(ImputationProtocol protocol);
/// Accepts "leak-free" and "verbatim"; throws ConfigError otherwise.
ImputationProtocol parse_imputation_protocol(std::string_view text);

struct PipelineOptions {
  CsvOptions csv;
  ImputationProtocol imputation = ImputationProtocol::kLeakFree;
  double train_fraction = 0.6;
  std::uint64_t seed = 42;
  bool pad_vocabularies = false;

  nlohmann::json to_json() const;
  static PipelineOptions from_json(const nlohmann::json& j);
};

struct PreparedDataset {
  std::vector<EncodedSample> train;
  std::vector<EncodedSample> test;
  PipelineStats stats;
  std::uint32_t schema_hash = 0;
  std::uint32_t source_hash = 0;
  /// Row counts per class and split, missing cells per feature, skipped rows.
  nlohmann::json summary;
};

/// Imputes, splits, fits statistics on the training split and encodes both splits.
PreparedDataset prepare_dataset(ParsedFlows parsed, const FlowSchema& schema, const PipelineOptions& options);

/// Parses `csv` and runs prepare_dataset; source_hash is set from source_fingerprint.
PreparedDataset prepare_dataset(const std::filesystem::path& csv, const FlowSchema& schema,
                                const PipelineOptions& options);

/// Encodes rows with frozen statistics (no refitting). Missing cells are
/// filled from stats.imputation: per class under the verbatim protocol,
/// globally otherwise. With `test_only` the rows are split exactly as
/// prepare_dataset splits them and only the test part is encoded.
std::vector<EncodedSample> encode_frozen(ParsedFlows parsed, const FlowSchema& schema, const PipelineOptions& options,
                                         const PipelineStats& stats, bool test_only);

/// CRC-32 of the file bytes combined with the options that affect encoding.
std::uint32_t source_fingerprint(const std::filesystem::path& csv, const PipelineOptions& options);

}  // namespace moeids::data
