#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "moeids/data/schema.hpp"

namespace moeids::data {

/// One parsed CSV row. Missing cells are std::nullopt.
struct RawRecord {
  std::vector<std::optional<double>> numeric;          // by numeric slot
  std::vector<std::optional<std::string>> categorical;  // by categorical slot
  int label = -1;
  std::size_t line = 0;  // 1-based line in the source file
};

struct CsvOptions {
  std::string label_column = "Attack Type";
};

struct ParsedFlows {
  std::vector<RawRecord> records;
  std::size_t skipped_rows = 0;
  /// First few row-level problems, "line N: ..." formatted.
  std::vector<std::string> warnings;
  std::vector<std::size_t> missing_numeric;      // missing-cell count per numeric slot
  std::vector<std::size_t> missing_categorical;  // per categorical slot
};

/// True for cells treated as missing: empty, NaN, NA, N/A, null, none, "?".
bool is_missing_marker(std::string_view cell);

/// Parses a comma-separated flow file with a header row. Columns not in the
/// schema are ignored. A missing schema column (or label column) throws
/// SchemaError naming it. Rows with an unparseable numeric cell or unknown
/// label are skipped and counted.
ParsedFlows parse_flow_csv(std::istream& in, const FlowSchema& schema, const CsvOptions& options = {});
ParsedFlows parse_flow_csv(const std::filesystem::path& path, const FlowSchema& schema,
                           const CsvOptions& options = {});

/// Splits one CSV line, honouring double-quoted fields.
std::vector<std::string> split_csv_line(std::string_view line);

/// Per-class and global fill values for missing cells.
struct ImputationTable {
  // [class][slot]; nullopt where the class had no observed value
  std::vector<std::vector<std::optional<double>>> class_numeric;
  std::vector<std::vector<std::optional<std::string>>> class_categorical;
  std::vector<double> global_numeric;
  std::vector<std::string> global_categorical;
};

/// Numeric: mean of observed values. Categorical: most frequent value, ties
/// broken by the lexicographically smallest. Per class and overall.
ImputationTable fit_imputers(const std::vector<RawRecord>& records, const FlowSchema& schema);

/// Fills missing cells. With use_labels the record's class statistic is used
/// (falling back to the global one); otherwise the global statistic.
std::vector<RawRecord> apply_imputers(std::vector<RawRecord> records, const ImputationTable& table, bool use_labels);

nlohmann::json to_json(const ImputationTable& table);
ImputationTable imputation_from_json(const nlohmann::json& j);

}  // namespace moeids::data
