#include "moeids/data/records.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "moeids/errors.hpp"

namespace moeids::data {

namespace {

constexpr std::size_t kMaxWarnings = 20;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_number(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    unsigned long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data() + 2, s.data() + s.size(), v, 16);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return static_cast<double>(v);
  }
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

bool is_missing_marker(std::string_view cell) {
  cell = trim(cell);
  if (cell.empty() || cell == "?") return true;
  std::string lower;
  for (char ch : cell) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  return lower == "nan" || lower == "na" || lower == "n/a" || lower == "null" || lower == "none";
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else if (ch != '\r' && ch != '\n') {
      current.push_back(ch);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

ParsedFlows parse_flow_csv(std::istream& in, const FlowSchema& schema, const CsvOptions& options) {
  ParsedFlows result;
  result.missing_numeric.assign(schema.numeric_count(), 0);
  result.missing_categorical.assign(schema.categorical_count(), 0);

  std::string line;
  if (!std::getline(in, line)) throw SchemaError("flow CSV is empty: header row missing");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF && static_cast<unsigned char>(line[1]) == 0xBB &&
      static_cast<unsigned char>(line[2]) == 0xBF) {
    line.erase(0, 3);
  }
  std::unordered_map<std::string, std::size_t> column_of;
  const auto header = split_csv_line(line);
  for (std::size_t i = 0; i < header.size(); ++i) column_of.emplace(std::string(trim(header[i])), i);

  auto locate = [&](const std::string& name) {
    auto it = column_of.find(name);
    if (it == column_of.end()) throw SchemaError("flow CSV is missing required column \"" + name + "\"");
    return it->second;
  };
  std::vector<std::size_t> numeric_cols, categorical_cols;
  for (const auto& name : schema.numeric_names()) numeric_cols.push_back(locate(name));
  for (const auto& name : schema.categorical_names()) categorical_cols.push_back(locate(name));
  const std::size_t label_col = locate(options.label_column);

  auto warn = [&](std::size_t line_no, const std::string& what) {
    ++result.skipped_rows;
    if (result.warnings.size() < kMaxWarnings) {
      result.warnings.push_back("line " + std::to_string(line_no) + ": " + what);
      spdlog::warn("skipping line {}: {}", line_no, what);
    }
  };

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() < header.size()) {
      warn(line_no, "expected " + std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
      continue;
    }
    RawRecord rec;
    rec.line = line_no;
    const auto label = class_index(trim(cells[label_col]));
    if (!label) {
      warn(line_no, "unknown class label \"" + std::string(trim(cells[label_col])) + "\"");
      continue;
    }
    rec.label = *label;

    bool ok = true;
    rec.numeric.reserve(numeric_cols.size());
    for (std::size_t s = 0; s < numeric_cols.size() && ok; ++s) {
      const std::string_view cell = trim(cells[numeric_cols[s]]);
      if (is_missing_marker(cell)) {
        rec.numeric.emplace_back();
        continue;
      }
      auto v = parse_number(cell);
      if (!v) {
        warn(line_no, "column " + schema.numeric_names()[s] + ": cannot parse \"" + std::string(cell) + "\" as a number");
        ok = false;
        break;
      }
      rec.numeric.emplace_back(*v);
    }
    if (!ok) continue;
    rec.categorical.reserve(categorical_cols.size());
    for (std::size_t s = 0; s < categorical_cols.size(); ++s) {
      const std::string_view cell = trim(cells[categorical_cols[s]]);
      if (is_missing_marker(cell)) {
        rec.categorical.emplace_back();
      } else {
        rec.categorical.emplace_back(std::string(cell));
      }
    }
    for (std::size_t s = 0; s < rec.numeric.size(); ++s)
      if (!rec.numeric[s]) ++result.missing_numeric[s];
    for (std::size_t s = 0; s < rec.categorical.size(); ++s)
      if (!rec.categorical[s]) ++result.missing_categorical[s];
    result.records.push_back(std::move(rec));
  }
  if (result.skipped_rows > 0) spdlog::warn("skipped {} malformed rows", result.skipped_rows);
  return result;
}

ParsedFlows parse_flow_csv(const std::filesystem::path& path, const FlowSchema& schema, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open flow CSV " + path.string());
  return parse_flow_csv(in, schema, options);
}

namespace {

struct NumericAcc {
  double sum = 0.0;
  std::size_t count = 0;
};

std::optional<std::string> mode_of(const std::map<std::string, std::size_t>& counts) {
  std::optional<std::string> best;
  std::size_t best_count = 0;
  // std::map iterates keys in ascending order, so the first maximum wins ties.
  for (const auto& [value, count] : counts) {
    if (count > best_count) {
      best = value;
      best_count = count;
    }
  }
  return best;
}

}  // namespace

ImputationTable fit_imputers(const std::vector<RawRecord>& records, const FlowSchema& schema) {
  const std::size_t nn = schema.numeric_count(), nc = schema.categorical_count();
  std::vector<std::vector<NumericAcc>> per_class(kNumClasses, std::vector<NumericAcc>(nn));
  std::vector<NumericAcc> overall(nn);
  std::vector<std::vector<std::map<std::string, std::size_t>>> cat_class(
      kNumClasses, std::vector<std::map<std::string, std::size_t>>(nc));
  std::vector<std::map<std::string, std::size_t>> cat_overall(nc);
  std::vector<std::size_t> class_rows(kNumClasses, 0);

  for (const auto& r : records) {
    if (r.label < 0 || r.label >= static_cast<int>(kNumClasses)) throw LabelError("imputer: record with invalid label");
    ++class_rows[r.label];
    for (std::size_t s = 0; s < nn; ++s) {
      if (!r.numeric[s]) continue;
      per_class[r.label][s].sum += *r.numeric[s];
      ++per_class[r.label][s].count;
      overall[s].sum += *r.numeric[s];
      ++overall[s].count;
    }
    for (std::size_t s = 0; s < nc; ++s) {
      if (!r.categorical[s]) continue;
      ++cat_class[r.label][s][*r.categorical[s]];
      ++cat_overall[s][*r.categorical[s]];
    }
  }

  ImputationTable t;
  t.global_numeric.resize(nn);
  for (std::size_t s = 0; s < nn; ++s) {
    if (overall[s].count == 0) {
      spdlog::warn("imputer: numeric feature {} has no observed values; using 0", schema.numeric_names()[s]);
      t.global_numeric[s] = 0.0;
    } else {
      t.global_numeric[s] = overall[s].sum / static_cast<double>(overall[s].count);
    }
  }
  t.global_categorical.resize(nc);
  for (std::size_t s = 0; s < nc; ++s) {
    auto m = mode_of(cat_overall[s]);
    if (!m) spdlog::warn("imputer: categorical feature {} has no observed values", schema.categorical_names()[s]);
    t.global_categorical[s] = m.value_or("");
  }

  t.class_numeric.assign(kNumClasses, std::vector<std::optional<double>>(nn));
  t.class_categorical.assign(kNumClasses, std::vector<std::optional<std::string>>(nc));
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    for (std::size_t s = 0; s < nn; ++s) {
      const auto& acc = per_class[c][s];
      if (acc.count > 0) {
        t.class_numeric[c][s] = acc.sum / static_cast<double>(acc.count);
      } else if (class_rows[c] > 0) {
        spdlog::warn("imputer: class '{}' has no observed {}; falling back to the global mean", kClassNames[c],
                     schema.numeric_names()[s]);
      }
    }
    for (std::size_t s = 0; s < nc; ++s) {
      t.class_categorical[c][s] = mode_of(cat_class[c][s]);
      if (!t.class_categorical[c][s] && class_rows[c] > 0) {
        spdlog::warn("imputer: class '{}' has no observed {}; falling back to the global mode", kClassNames[c],
                     schema.categorical_names()[s]);
      }
    }
  }
  return t;
}

std::vector<RawRecord> apply_imputers(std::vector<RawRecord> records, const ImputationTable& table, bool use_labels) {
  for (auto& r : records) {
    const bool by_class = use_labels && r.label >= 0 && r.label < static_cast<int>(table.class_numeric.size());
    for (std::size_t s = 0; s < r.numeric.size(); ++s) {
      if (r.numeric[s]) continue;
      std::optional<double> fill;
      if (by_class) fill = table.class_numeric[r.label][s];
      r.numeric[s] = fill.value_or(table.global_numeric.at(s));
    }
    for (std::size_t s = 0; s < r.categorical.size(); ++s) {
      if (r.categorical[s]) continue;
      std::optional<std::string> fill;
      if (by_class) fill = table.class_categorical[r.label][s];
      r.categorical[s] = fill.value_or(table.global_categorical.at(s));
    }
  }
  return records;
}

nlohmann::json to_json(const ImputationTable& t) {
  nlohmann::json j;
  j["global_numeric"] = t.global_numeric;
  j["global_categorical"] = t.global_categorical;
  auto& cn = j["class_numeric"] = nlohmann::json::array();
  for (const auto& row : t.class_numeric) {
    auto arr = nlohmann::json::array();
    for (const auto& v : row) arr.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
    cn.push_back(std::move(arr));
  }
  auto& cc = j["class_categorical"] = nlohmann::json::array();
  for (const auto& row : t.class_categorical) {
    auto arr = nlohmann::json::array();
    for (const auto& v : row) arr.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
    cc.push_back(std::move(arr));
  }
  return j;
}

ImputationTable imputation_from_json(const nlohmann::json& j) {
  ImputationTable t;
  t.global_numeric = j.at("global_numeric").get<std::vector<double>>();
  t.global_categorical = j.at("global_categorical").get<std::vector<std::string>>();
  for (const auto& row : j.at("class_numeric")) {
    auto& out = t.class_numeric.emplace_back();
    for (const auto& v : row) out.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
  }
  for (const auto& row : j.at("class_categorical")) {
    auto& out = t.class_categorical.emplace_back();
    for (const auto& v : row)
      out.push_back(v.is_null() ? std::nullopt : std::optional<std::string>(v.get<std::string>()));
  }
  return t;
}

}  // namespace moeids::data
