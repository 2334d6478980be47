#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "moeids/moe.hpp"
#include "moeids/nn.hpp"
#include "moeids/rng.hpp"

namespace moeids::train {

enum class Architecture {
  /// CNN backbone followed by the mixture-of-experts head.
  kFull,
  /// CNN backbone followed by one dense 128 -> 9 layer.
  kNoMoe,
  /// One dense 78 -> 9 layer on the flat feature vector.
  kNoCnn,
};

std::string to_string(Architecture a);
Architecture parse_architecture(std::string_view text);

struct ModelConfig {
  Architecture architecture = Architecture::kFull;
  nn::BackboneConfig backbone;
  moe::MoEConfig moe;
  std::size_t n_classes = 9;

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

class IdsModel {
 public:
  struct Output {
    Tensor logits;  // [batch x n_classes]
    /// Undefined for architectures without a mixture-of-experts head.
    Tensor gates;
    /// Undefined unless routing was noisy.
    Tensor load_p;
  };

  IdsModel(const ModelConfig& config, Rng& init_rng);

  /// batch is [batch x 6 x 13]. Train mode updates batch-norm running
  /// statistics and draws routing noise from `noise_rng`.
  Output forward(const Tensor& batch, nn::Mode mode, Rng& noise_rng);

  /// Eval-mode routing of a batch; nullopt without a mixture-of-experts head.
  std::optional<moe::GateDecision> route(const Tensor& batch);

  const ModelConfig& config() const { return config_; }
  std::vector<nn::NamedTensor> parameters() const;
  /// Non-trainable state (batch-norm running statistics).
  std::vector<nn::NamedTensor> buffers() const;
  std::size_t parameter_count() const;

  /// Copies values into the parameters and buffers of the same names. Throws
  /// IntegrityError on a missing, extra or mis-shaped tensor.
  void load_state(const std::vector<nn::NamedTensor>& state);

 private:
  Tensor features(const Tensor& batch, nn::Mode mode);

  ModelConfig config_;
  std::optional<nn::CnnBackbone> backbone_;
  std::optional<moe::MoELayer> moe_;
  std::optional<nn::DenseLayer> head_;
};

}  // namespace moeids::train
