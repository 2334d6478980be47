#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "moeids/data/encoder.hpp"
#include "moeids/train/config.hpp"
#include "moeids/train/model.hpp"

namespace moeids::train {

struct LossTerms {
  Tensor total;  // differentiable scalar
  double cross_entropy = 0.0;
  double importance = 0.0;
  double load = 0.0;
};

/// CE + alpha * (L_importance + L_load). An undefined `gates` or `load_p`
/// contributes 0 for its term. The components are reported even when alpha is 0.
LossTerms total_loss(const Tensor& logits, std::span<const int> labels, const Tensor& gates, const Tensor& load_p,
                     double alpha);

/// Batch means over one epoch.
struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  std::size_t steps = 0;
  double total = 0.0;
  double cross_entropy = 0.0;
  double importance = 0.0;
  double load = 0.0;
  double train_accuracy = 0.0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;

  nlohmann::json to_json() const;
  static TrainingHistory from_json(const nlohmann::json& j);
};

/// Independent random streams derived from one seed.
struct SeedStreams {
  explicit SeedStreams(std::uint64_t seed);
  Rng init;
  Rng shuffle;
  Rng noise;
};

/// Builds the model for `config` from its init stream.
IdsModel build_model(const TrainConfig& config);

/// Epoch boundaries of `count` shuffled samples in batches of `batch_size`.
/// A trailing batch of one sample is merged into the previous batch so
/// batch normalization always sees at least two samples.
std::vector<std::size_t> batch_boundaries(std::size_t count, std::size_t batch_size);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch training on the objective above for config.max_epochs epochs,
/// shuffling every epoch. A non-finite loss throws TrainingError naming the
/// component, epoch and step.
TrainingHistory train(IdsModel& model, std::span<const data::EncodedSample> train_set, const TrainConfig& config,
                      const EpochCallback& on_epoch = {});

/// Eval-mode class predictions.
std::vector<int> predict(IdsModel& model, std::span<const data::EncodedSample> samples, std::size_t batch_size = 1024);

}  // namespace moeids::train
