#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "moeids/train/model.hpp"

namespace moeids::train {

enum class OptimizerKind { kAdam, kSgd };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view text);

struct TrainConfig {
  std::size_t batch_size = 1024;
  std::size_t max_epochs = 40;
  /// Weight of the balancing terms: L = CE + alpha * (L_importance + L_load).
  double alpha = 0.1;
  std::size_t n_experts = 128;
  std::size_t top_k = 32;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  std::uint64_t seed = 42;
  /// Drop both balancing terms from the objective (they are reported as 0).
  bool disable_balancing_losses = false;
  /// Replace the mixture-of-experts head by a dense 128 -> 9 layer.
  bool disable_moe = false;
  /// Replace the whole network by a dense 78 -> 9 layer; implies disable_moe.
  bool disable_cnn = false;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
  Architecture architecture() const;
  ModelConfig model_config() const;

  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys throw ConfigError.
  static TrainConfig from_json(const nlohmann::json& j);
};

}  // namespace moeids::train
