#include "moeids/data/pipeline.hpp"

#include <array>
#include <fstream>

#include <spdlog/spdlog.h>
#include <zlib.h>

#include "moeids/data/split.hpp"
#include "moeids/errors.hpp"

namespace moeids::data {

std::string to_string(ImputationProtocol protocol) {
  return protocol == ImputationProtocol::kVerbatim ? "verbatim" : "leak-free";
}

ImputationProtocol parse_imputation_protocol(std::string_view text) {
  if (text == "leak-free" || text == "leakfree") return ImputationProtocol::kLeakFree;
  if (text == "verbatim") return ImputationProtocol::kVerbatim;
  throw ConfigError("unknown imputation protocol '" + std::string(text) + "' (expected verbatim or leak-free)");
}

nlohmann::json PipelineOptions::to_json() const {
  return {{"label_column", csv.label_column},
          {"imputation", to_string(imputation)},
          {"train_fraction", train_fraction},
          {"seed", seed},
          {"pad_vocabularies", pad_vocabularies}};
}

PipelineOptions PipelineOptions::from_json(const nlohmann::json& j) {
  PipelineOptions o;
  o.csv.label_column = j.value("label_column", o.csv.label_column);
  o.imputation = parse_imputation_protocol(j.value("imputation", to_string(o.imputation)));
  o.train_fraction = j.value("train_fraction", o.train_fraction);
  o.seed = j.value("seed", o.seed);
  o.pad_vocabularies = j.value("pad_vocabularies", o.pad_vocabularies);
  return o;
}

namespace {

std::vector<int> labels_of(const std::vector<RawRecord>& records) {
  std::vector<int> labels(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) labels[i] = records[i].label;
  return labels;
}

nlohmann::json build_summary(const ParsedFlows& parsed, const FlowSchema& schema, const std::vector<int>& labels,
                             const SplitIndices& split, const PipelineOptions& options) {
  std::array<std::size_t, kNumClasses> total{}, train{}, test{};
  for (int l : labels) ++total[l];
  for (auto i : split.train) ++train[labels[i]];
  for (auto i : split.test) ++test[labels[i]];
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    classes.push_back({{"name", kClassNames[c]}, {"total", total[c]}, {"train", train[c]}, {"test", test[c]}});
  }
  nlohmann::json missing = nlohmann::json::object();
  for (std::size_t s = 0; s < schema.numeric_count(); ++s) missing[schema.numeric_names()[s]] = parsed.missing_numeric[s];
  for (std::size_t s = 0; s < schema.categorical_count(); ++s) {
    missing[schema.categorical_names()[s]] = parsed.missing_categorical[s];
  }
  return {{"rows", labels.size()},
          {"skipped_rows", parsed.skipped_rows},
          {"warnings", parsed.warnings},
          {"classes", classes},
          {"missing_values", missing},
          {"options", options.to_json()}};
}

}  // namespace

PreparedDataset prepare_dataset(ParsedFlows parsed, const FlowSchema& schema, const PipelineOptions& options) {
  if (parsed.records.empty()) throw InputError("dataset has no usable rows");
  auto records = std::move(parsed.records);
  const std::vector<int> labels = labels_of(records);
  const SplitIndices split = stratified_split(labels, options.train_fraction, options.seed);

  std::vector<RawRecord> train, test;
  ImputationTable table;
  if (options.imputation == ImputationProtocol::kVerbatim) {
    table = fit_imputers(records, schema);
    records = apply_imputers(std::move(records), table, /*use_labels=*/true);
    train = select<RawRecord>(records, split.train);
    test = select<RawRecord>(records, split.test);
  } else {
    train = select<RawRecord>(records, split.train);
    test = select<RawRecord>(records, split.test);
    table = fit_imputers(train, schema);
    train = apply_imputers(std::move(train), table, /*use_labels=*/true);
    test = apply_imputers(std::move(test), table, /*use_labels=*/false);
  }

  PreparedDataset out;
  out.stats = fit_pipeline_stats(train, schema, std::move(table), options.pad_vocabularies);
  out.train = encode(train, out.stats, schema);
  out.test = encode(test, out.stats, schema);
  out.schema_hash = schema.hash();
  parsed.records.clear();
  out.summary = build_summary(parsed, schema, labels, split, options);
  spdlog::info("prepared {} train / {} test samples ({} rows skipped, imputation {})", out.train.size(),
               out.test.size(), parsed.skipped_rows, to_string(options.imputation));
  return out;
}

PreparedDataset prepare_dataset(const std::filesystem::path& csv, const FlowSchema& schema,
                                const PipelineOptions& options) {
  auto prepared = prepare_dataset(parse_flow_csv(csv, schema, options.csv), schema, options);
  prepared.source_hash = source_fingerprint(csv, options);
  return prepared;
}

std::vector<EncodedSample> encode_frozen(ParsedFlows parsed, const FlowSchema& schema, const PipelineOptions& options,
                                         const PipelineStats& stats, bool test_only) {
  if (parsed.records.empty()) throw InputError("dataset has no usable rows");
  auto records = std::move(parsed.records);
  if (test_only) {
    const SplitIndices split = stratified_split(labels_of(records), options.train_fraction, options.seed);
    records = select<RawRecord>(records, split.test);
  }
  const bool by_class = options.imputation == ImputationProtocol::kVerbatim;
  return encode(apply_imputers(std::move(records), stats.imputation, by_class), stats, schema);
}

std::uint32_t source_fingerprint(const std::filesystem::path& csv, const PipelineOptions& options) {
  std::ifstream in(csv, std::ios::binary);
  if (!in) throw InputError("cannot open " + csv.string());
  uLong crc = crc32(0L, Z_NULL, 0);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = in.gcount();
    if (got > 0) crc = crc32(crc, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(got));
  }
  const std::string opts = options.to_json().dump();
  crc = crc32(crc, reinterpret_cast<const Bytef*>(opts.data()), static_cast<uInt>(opts.size()));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace moeids::data
