#include "moeids/data/encoder.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "moeids/errors.hpp"

namespace moeids::data {

PipelineStats fit_pipeline_stats(const std::vector<RawRecord>& train, const FlowSchema& schema, ImputationTable imputation,
                                 bool pad_vocabularies) {
  if (train.empty()) throw InputError("cannot fit preprocessing statistics on an empty training split");
  PipelineStats stats;
  stats.pad_vocabularies = pad_vocabularies;
  stats.fitted_on = train.size();
  stats.imputation = std::move(imputation);
  const std::size_t nn = schema.numeric_count(), nc = schema.categorical_count();
  stats.numeric_min.assign(nn, std::numeric_limits<double>::infinity());
  stats.numeric_max.assign(nn, -std::numeric_limits<double>::infinity());
  stats.vocabularies.assign(nc, {});
  for (const auto& r : train) {
    for (std::size_t s = 0; s < nn; ++s) {
      if (!r.numeric[s]) throw InputError("fit_pipeline_stats: record at line " + std::to_string(r.line) + " is not imputed");
      stats.numeric_min[s] = std::min(stats.numeric_min[s], *r.numeric[s]);
      stats.numeric_max[s] = std::max(stats.numeric_max[s], *r.numeric[s]);
    }
    for (std::size_t s = 0; s < nc; ++s) {
      if (!r.categorical[s]) throw InputError("fit_pipeline_stats: record at line " + std::to_string(r.line) + " is not imputed");
      auto& vocab = stats.vocabularies[s];
      if (std::find(vocab.begin(), vocab.end(), *r.categorical[s]) == vocab.end()) vocab.push_back(*r.categorical[s]);
    }
  }
  return stats;
}

nlohmann::json to_json(const PipelineStats& stats) {
  return {{"numeric_min", stats.numeric_min}, {"numeric_max", stats.numeric_max},
          {"vocabularies", stats.vocabularies}, {"imputation", to_json(stats.imputation)},
          {"fitted_on", stats.fitted_on},       {"pad_vocabularies", stats.pad_vocabularies}};
}

PipelineStats pipeline_stats_from_json(const nlohmann::json& j) {
  PipelineStats s;
  s.numeric_min = j.at("numeric_min").get<std::vector<double>>();
  s.numeric_max = j.at("numeric_max").get<std::vector<double>>();
  s.vocabularies = j.at("vocabularies").get<std::vector<std::vector<std::string>>>();
  s.imputation = imputation_from_json(j.at("imputation"));
  s.fitted_on = j.at("fitted_on").get<std::size_t>();
  s.pad_vocabularies = j.value("pad_vocabularies", false);
  return s;
}

Tensor EncodedSample::matrix() const {
  return Tensor({kMatrixRows, kMatrixCols}, std::vector<double>(values.begin(), values.end()));
}

void check_encoded_width(const PipelineStats& stats, const FlowSchema& schema) {
  if (stats.vocabularies.size() != schema.categorical_count() || stats.numeric_min.size() != schema.numeric_count()) {
    throw SchemaError("preprocessing statistics do not match the flow schema");
  }
  bool ok = schema.encoded_width() == kEncodedWidth;
  std::size_t total = 0;
  std::ostringstream widths;
  for (const auto& spec : schema.features()) {
    std::size_t w = 1;
    if (spec.kind == FeatureKind::kCategorical) {
      const std::size_t levels = stats.vocabularies[spec.slot].size();
      const std::size_t fitted = levels == 0 ? 0 : levels - 1;
      const bool fits = stats.pad_vocabularies ? fitted <= spec.encoded_width : fitted == spec.encoded_width;
      if (!fits) ok = false;
      w = stats.pad_vocabularies ? spec.encoded_width : fitted;
      widths << ' ' << spec.name << '=' << fitted << "(expected " << spec.encoded_width << ')';
    } else {
      widths << ' ' << spec.name << "=1";
    }
    total += w;
  }
  if (!ok || total != kEncodedWidth) {
    throw SchemaError("encoded width " + std::to_string(total) + " != " + std::to_string(kEncodedWidth) +
                      "; per-feature widths:" + widths.str());
  }
}

std::vector<EncodedSample> encode(const std::vector<RawRecord>& records, const PipelineStats& stats,
                                  const FlowSchema& schema) {
  check_encoded_width(stats, schema);
  std::vector<EncodedSample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    EncodedSample sample;
    sample.label = r.label;
    std::size_t pos = 0;
    for (const auto& spec : schema.features()) {
      if (spec.kind == FeatureKind::kNumeric) {
        if (!r.numeric[spec.slot]) throw InputError("encode: missing " + spec.name + " at line " + std::to_string(r.line));
        const double lo = stats.numeric_min[spec.slot], hi = stats.numeric_max[spec.slot];
        const double v = *r.numeric[spec.slot];
        sample.values[pos++] = hi > lo ? (v - lo) / (hi - lo) : 0.0;
      } else {
        if (!r.categorical[spec.slot]) throw InputError("encode: missing " + spec.name + " at line " + std::to_string(r.line));
        const auto& vocab = stats.vocabularies[spec.slot];
        const std::size_t width = stats.pad_vocabularies ? spec.encoded_width : vocab.size() - 1;
        auto it = std::find(vocab.begin(), vocab.end(), *r.categorical[spec.slot]);
        if (it != vocab.end() && it != vocab.begin()) {
          sample.values[pos + static_cast<std::size_t>(it - vocab.begin()) - 1] = 1.0;
        }
        pos += width;
      }
    }
    out.push_back(sample);
  }
  return out;
}

Tensor make_batch(std::span<const EncodedSample> samples, std::span<const std::size_t> indices) {
  if (indices.empty()) throw InputError("make_batch: empty batch");
  std::vector<double> values(indices.size() * kEncodedWidth);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& s = samples[indices[i]].values;
    std::copy(s.begin(), s.end(), values.begin() + static_cast<std::ptrdiff_t>(i * kEncodedWidth));
  }
  return Tensor({indices.size(), kMatrixRows, kMatrixCols}, std::move(values));
}

std::vector<int> batch_labels(std::span<const EncodedSample> samples, std::span<const std::size_t> indices) {
  std::vector<int> labels(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) labels[i] = samples[indices[i]].label;
  return labels;
}

}  // namespace moeids::data
