#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "moeids/data/encoder.hpp"
#include "moeids/train/config.hpp"
#include "moeids/train/metrics.hpp"
#include "moeids/train/trainer.hpp"

namespace moeids::train {

struct AblationVariant {
  enum class Kind { kZeroLosses, kNoMoe, kNoCnn, kExpertGrid };
  Kind kind = Kind::kZeroLosses;
  std::size_t n_experts = 0;  // expert grid only
  std::size_t top_k = 0;      // expert grid only

  /// "zero_losses", "no_moe", "no_cnn" or "expert_grid(n,k)".
  std::string name() const;
  static AblationVariant parse(std::string_view text);
  static AblationVariant grid(std::size_t n, std::size_t k) { return {Kind::kExpertGrid, n, k}; }
};

/// (n, k) pairs swept by default: the full-size model and the smaller grid.
std::vector<std::pair<std::size_t, std::size_t>> default_expert_grid();

/// Parses "n:k,n:k,..." (also accepts "(n,k),(n,k)").
std::vector<std::pair<std::size_t, std::size_t>> parse_expert_grid(std::string_view text);

/// `base` with only the fields the variant ablates changed.
TrainConfig apply_ablation(const TrainConfig& base, const AblationVariant& variant);

/// Keys whose values differ between two configs, as {key: [a, b]}.
nlohmann::json config_diff(const TrainConfig& a, const TrainConfig& b);

struct AblationResult {
  std::string variant;
  TrainConfig config;
  std::size_t parameter_count = 0;
  TrainingHistory history;
  EvalReport report;

  nlohmann::json to_json() const;
};

/// Builds the variant from `base`, trains it on `train_set` and evaluates on `test_set`.
AblationResult run_ablation(const TrainConfig& base, const AblationVariant& variant,
                            std::span<const data::EncodedSample> train_set,
                            std::span<const data::EncodedSample> test_set);

}  // namespace moeids::train
