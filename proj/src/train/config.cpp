#include "moeids/train/config.hpp"

#include "moeids/errors.hpp"

namespace moeids::train {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::kSgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "adam") return OptimizerKind::kAdam;
  if (text == "sgd") return OptimizerKind::kSgd;
  throw ConfigError("unknown optimizer '" + std::string(text) + "' (expected adam or sgd)");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be nonnegative");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (architecture() == Architecture::kFull && (top_k < 1 || top_k > n_experts)) {
    throw ConfigError("top_k must satisfy 1 <= k <= n_experts (k=" + std::to_string(top_k) +
                      ", n=" + std::to_string(n_experts) + ")");
  }
}

Architecture TrainConfig::architecture() const {
  if (disable_cnn) return Architecture::kNoCnn;
  if (disable_moe) return Architecture::kNoMoe;
  return Architecture::kFull;
}

ModelConfig TrainConfig::model_config() const {
  ModelConfig m;
  m.architecture = architecture();
  m.moe.n_experts = n_experts;
  m.moe.top_k = top_k;
  m.moe.input_dim = m.backbone.output_features();
  m.moe.n_classes = m.n_classes;
  return m;
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batch_size", batch_size},
          {"max_epochs", max_epochs},
          {"alpha", alpha},
          {"n_experts", n_experts},
          {"top_k", top_k},
          {"optimizer", to_string(optimizer)},
          {"learning_rate", learning_rate},
          {"seed", seed},
          {"disable_balancing_losses", disable_balancing_losses},
          {"disable_moe", disable_moe},
          {"disable_cnn", disable_cnn}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "max_epochs") c.max_epochs = value.get<std::size_t>();
      else if (key == "alpha") c.alpha = value.get<double>();
      else if (key == "n_experts") c.n_experts = value.get<std::size_t>();
      else if (key == "top_k") c.top_k = value.get<std::size_t>();
      else if (key == "optimizer") c.optimizer = parse_optimizer(value.get<std::string>());
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "disable_balancing_losses") c.disable_balancing_losses = value.get<bool>();
      else if (key == "disable_moe") c.disable_moe = value.get<bool>();
      else if (key == "disable_cnn") c.disable_cnn = value.get<bool>();
      else throw ConfigError("unknown training option '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed training config: ") + e.what());
  }
  return c;
}

}  // namespace moeids::train
