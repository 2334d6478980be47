#include "moeids/data/schema.hpp"

#include <cctype>
#include <string>
#include <utility>

#include <zlib.h>

namespace moeids::data {

namespace {

std::string normalize_label(std::string_view s) {
  std::string out;
  for (char ch : s) {
    if (std::isalnum(static_cast<unsigned char>(ch))) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  return out;
}

}  // namespace

std::optional<int> class_index(std::string_view label) {
  const std::string key = normalize_label(label);
  static const std::pair<std::string_view, int> aliases[] = {
      {"benign", 0},         {"normal", 0},       {"synscan", 1},         {"tcpconnectscan", 2},
      {"udpscan", 3},        {"icpmflood", 4},    {"icmpflood", 4},       {"udpflood", 5},
      {"synflood", 6},       {"httpflood", 7},    {"slowratedos", 8},     {"slowrate", 8},
  };
  for (const auto& [name, idx] : aliases) {
    if (key == name) return idx;
  }
  return std::nullopt;
}

const FlowSchema& FlowSchema::nidd() {
  static const FlowSchema schema = [] {
    std::vector<FeatureSpec> f;
    auto num = [&f](const char* name) { f.push_back({name, FeatureKind::kNumeric, 1, 0}); };
    auto cat = [&f](const char* name, std::size_t width) { f.push_back({name, FeatureKind::kCategorical, width, 0}); };
    num("Seq"); num("Dur"); num("RunTime"); num("Mean"); num("Sum"); num("Min"); num("Max");
    cat("Proto", 7);
    num("sTos"); num("dTos");
    cat("sDSb", 11); cat("dDSb", 5);
    num("sTtl"); num("dTtl"); num("sHops"); num("dHops");
    cat("Cause", 2);
    num("TotPkts"); num("SrcPkts"); num("DstPkts"); num("TotBytes"); num("SrcBytes"); num("DstBytes");
    num("Offset"); num("sMeanPktSz"); num("dMeanPktSz");
    num("Load"); num("SrcLoad"); num("DstLoad");
    num("Loss"); num("SrcLoss"); num("DstLoss"); num("pLoss");
    num("SrcGap"); num("DstGap");
    num("Rate"); num("SrcRate"); num("DstRate");
    cat("State", 10);
    num("SrcWin"); num("DstWin"); num("sVid"); num("dVid");
    num("SrcTCPBase"); num("DstTCPBase"); num("TcpRtt"); num("SynAck"); num("AckDat");
    return FlowSchema(std::move(f));
  }();
  return schema;
}

FlowSchema::FlowSchema(std::vector<FeatureSpec> features) : features_(std::move(features)) {
  for (auto& spec : features_) {
    if (spec.kind == FeatureKind::kNumeric) {
      spec.slot = numeric_names_.size();
      spec.encoded_width = 1;
      numeric_names_.push_back(spec.name);
    } else {
      spec.slot = categorical_names_.size();
      categorical_names_.push_back(spec.name);
      categorical_widths_.push_back(spec.encoded_width);
    }
  }
}

std::size_t FlowSchema::encoded_width() const {
  std::size_t w = 0;
  for (const auto& spec : features_) w += spec.encoded_width;
  return w;
}

std::size_t FlowSchema::categorical_width(std::size_t slot) const { return categorical_widths_.at(slot); }

std::uint32_t FlowSchema::hash() const {
  std::string text;
  for (const auto& spec : features_) {
    text += spec.name;
    text += spec.kind == FeatureKind::kNumeric ? ":n:" : ":c:";
    text += std::to_string(spec.encoded_width);
    text += ';';
  }
  for (auto name : kClassNames) {
    text += name;
    text += ';';
  }
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(text.data()), static_cast<uInt>(text.size())));
}

}  // namespace moeids::data
