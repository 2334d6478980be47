#include "moeids/train/ablation.hpp"

#include <cctype>
#include <charconv>

#include <spdlog/spdlog.h>

#include "moeids/errors.hpp"

namespace moeids::train {

namespace {

std::vector<std::size_t> numbers_in(std::string_view text) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < text.size();) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
      if (std::string_view("(),: ").find(text[i]) == std::string_view::npos) {
        throw ConfigError("unexpected character '" + std::string(1, text[i]) + "' in '" + std::string(text) + "'");
      }
      ++i;
      continue;
    }
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data() + i, text.data() + text.size(), v);
    if (ec != std::errc()) throw ConfigError("number out of range in '" + std::string(text) + "'");
    out.push_back(v);
    i = static_cast<std::size_t>(ptr - text.data());
  }
  return out;
}

}  // namespace

std::string AblationVariant::name() const {
  switch (kind) {
    case Kind::kZeroLosses: return "zero_losses";
    case Kind::kNoMoe: return "no_moe";
    case Kind::kNoCnn: return "no_cnn";
    case Kind::kExpertGrid: return "expert_grid(" + std::to_string(n_experts) + "," + std::to_string(top_k) + ")";
  }
  return "?";
}

AblationVariant AblationVariant::parse(std::string_view text) {
  if (text == "zero_losses") return {Kind::kZeroLosses};
  if (text == "no_moe") return {Kind::kNoMoe};
  if (text == "no_cnn") return {Kind::kNoCnn};
  constexpr std::string_view kGrid = "expert_grid";
  if (text.substr(0, kGrid.size()) == kGrid) {
    const auto nums = numbers_in(text.substr(kGrid.size()));
    if (nums.size() != 2) throw ConfigError("expert_grid needs (n,k), got '" + std::string(text) + "'");
    return grid(nums[0], nums[1]);
  }
  throw ConfigError("unknown ablation variant '" + std::string(text) +
                    "' (expected zero_losses, no_moe, no_cnn or expert_grid(n,k))");
}

std::vector<std::pair<std::size_t, std::size_t>> default_expert_grid() {
  return {{128, 32}, {64, 32}, {64, 16}, {32, 16}, {32, 4}, {16, 4}};
}

std::vector<std::pair<std::size_t, std::size_t>> parse_expert_grid(std::string_view text) {
  const auto nums = numbers_in(text);
  if (nums.empty() || nums.size() % 2 != 0) {
    throw ConfigError("expert grid must list (n,k) pairs, got '" + std::string(text) + "'");
  }
  std::vector<std::pair<std::size_t, std::size_t>> grid;
  for (std::size_t i = 0; i < nums.size(); i += 2) {
    if (nums[i + 1] < 1 || nums[i + 1] > nums[i]) {
      throw ConfigError("expert grid pair (" + std::to_string(nums[i]) + "," + std::to_string(nums[i + 1]) +
                        ") needs 1 <= k <= n");
    }
    grid.emplace_back(nums[i], nums[i + 1]);
  }
  return grid;
}

TrainConfig apply_ablation(const TrainConfig& base, const AblationVariant& variant) {
  TrainConfig c = base;
  switch (variant.kind) {
    case AblationVariant::Kind::kZeroLosses: c.disable_balancing_losses = true; break;
    case AblationVariant::Kind::kNoMoe: c.disable_moe = true; break;
    case AblationVariant::Kind::kNoCnn: c.disable_cnn = true; break;
    case AblationVariant::Kind::kExpertGrid:
      c.n_experts = variant.n_experts;
      c.top_k = variant.top_k;
      break;
  }
  c.validate();
  return c;
}

nlohmann::json config_diff(const TrainConfig& a, const TrainConfig& b) {
  const auto ja = a.to_json(), jb = b.to_json();
  nlohmann::json diff = nlohmann::json::object();
  for (const auto& [key, value] : ja.items()) {
    if (jb.at(key) != value) diff[key] = {value, jb.at(key)};
  }
  return diff;
}

nlohmann::json AblationResult::to_json() const {
  return {{"variant", variant},
          {"config", config.to_json()},
          {"parameter_count", parameter_count},
          {"history", history.to_json()},
          {"report", report.to_json()}};
}

AblationResult run_ablation(const TrainConfig& base, const AblationVariant& variant,
                            std::span<const data::EncodedSample> train_set,
                            std::span<const data::EncodedSample> test_set) {
  AblationResult r;
  r.variant = variant.name();
  r.config = apply_ablation(base, variant);
  spdlog::info("ablation {}: changed {}", r.variant, config_diff(base, r.config).dump());
  IdsModel model = build_model(r.config);
  r.parameter_count = model.parameter_count();
  r.history = train(model, train_set, r.config);
  r.report = evaluate(model, test_set, r.config.batch_size);
  return r;
}

}  // namespace moeids::train
