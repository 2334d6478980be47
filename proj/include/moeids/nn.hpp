#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "moeids/rng.hpp"
#include "moeids/tensor.hpp"

namespace moeids::nn {

enum class Mode { kTrain, kEval };

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// ---------------------------------------------------------------------------
// Functional layer primitives (differentiable).

/// Zero-padded cross-correlation, stride 1.
/// input [batch x in x len], weight [out x in x kernel], bias [out]
/// -> [batch x out x (len + 2*padding - kernel + 1)].
Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t padding);

/// Non-overlapping max over windows of 2; an odd trailing element is dropped.
/// The gradient goes to the first maximal element of each window.
Tensor maxpool1d(const Tensor& input);

/// input [batch x in] * weight^T + bias, weight [out x in].
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);

/// Mean over the batch of -log softmax(logits)[label].
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

struct BatchStatistics {
  std::vector<double> mean;
  std::vector<double> variance;  // biased (divide by count)
};

/// Per-channel normalization with batch statistics over (batch, len).
/// Needs at least two elements per channel.
Tensor batch_norm_train(const Tensor& input, const Tensor& gamma, const Tensor& beta, double eps,
                        BatchStatistics* stats = nullptr);

/// Per-channel normalization with fixed statistics.
Tensor batch_norm_eval(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                       std::span<const double> mean, std::span<const double> variance, double eps);

// ---------------------------------------------------------------------------
// Layers owning parameters.

class Conv1dLayer {
 public:
  static constexpr std::size_t kKernel = 3;
  static constexpr std::size_t kPadding = 1;

  Conv1dLayer(std::size_t in_channels, std::size_t out_channels, Rng& rng);

  Tensor forward(const Tensor& input) const;
  std::size_t in_channels() const { return in_channels_; }
  std::size_t out_channels() const { return out_channels_; }
  void collect(const std::string& prefix, std::vector<NamedTensor>& params) const;

 private:
  std::size_t in_channels_;
  std::size_t out_channels_;
  Tensor weight_;
  Tensor bias_;
};

struct BatchNormOptions {
  double momentum = 0.1;
  double eps = 1e-5;
};

class BatchNorm1dLayer {
 public:
  BatchNorm1dLayer(std::size_t channels, BatchNormOptions options = {});

  /// Train mode also folds the batch statistics into the running estimates:
  /// running = (1 - momentum) * running + momentum * batch, using the
  /// unbiased batch variance for running_var.
  Tensor forward(const Tensor& input, Mode mode);

  std::size_t channels() const { return channels_; }
  const BatchNormOptions& options() const { return options_; }
  void collect(const std::string& prefix, std::vector<NamedTensor>& params) const;
  void collect_buffers(const std::string& prefix, std::vector<NamedTensor>& buffers) const;

 private:
  std::size_t channels_;
  BatchNormOptions options_;
  Tensor gamma_;
  Tensor beta_;
  Tensor running_mean_;
  Tensor running_var_;
};

class DenseLayer {
 public:
  DenseLayer(std::size_t in_features, std::size_t out_features, Rng& rng);

  Tensor forward(const Tensor& input) const { return dense(input, weight_, bias_); }
  std::size_t in_features() const { return in_features_; }
  std::size_t out_features() const { return out_features_; }
  std::size_t parameter_count() const { return weight_.numel() + bias_.numel(); }
  void collect(const std::string& prefix, std::vector<NamedTensor>& params) const;

  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  std::size_t in_features_;
  std::size_t out_features_;
  Tensor weight_;
  Tensor bias_;
};

/// conv -> batch norm -> ReLU -> (optional) max-pool.
class CnnCell {
 public:
  CnnCell(std::size_t in_channels, std::size_t filters, bool pool, Rng& rng, BatchNormOptions bn = {});

  Tensor forward(const Tensor& input, Mode mode);
  bool pools() const { return pool_; }
  std::size_t filters() const { return conv_.out_channels(); }
  void collect(const std::string& prefix, std::vector<NamedTensor>& params) const;
  void collect_buffers(const std::string& prefix, std::vector<NamedTensor>& buffers) const;

 private:
  Conv1dLayer conv_;
  BatchNorm1dLayer norm_;
  bool pool_;
};

struct BackboneConfig {
  std::size_t in_channels = 6;
  std::size_t length = 13;
  std::vector<std::size_t> filters{16, 32, 64, 128};
  BatchNormOptions batch_norm{};

  /// Sequence length after every pooled cell (all cells but the last pool).
  std::size_t output_length() const;
  /// Flattened feature count per sample.
  std::size_t output_features() const;
};

/// Stack of CNN cells; every cell except the last pools. Output is flattened
/// to [batch x filters.back() * output_length].
class CnnBackbone {
 public:
  CnnBackbone(const BackboneConfig& config, Rng& rng);

  Tensor forward(const Tensor& input, Mode mode);
  const BackboneConfig& config() const { return config_; }
  std::size_t output_features() const { return config_.output_features(); }
  void collect(const std::string& prefix, std::vector<NamedTensor>& params) const;
  void collect_buffers(const std::string& prefix, std::vector<NamedTensor>& buffers) const;

 private:
  BackboneConfig config_;
  std::vector<CnnCell> cells_;
};

}  // namespace moeids::nn
