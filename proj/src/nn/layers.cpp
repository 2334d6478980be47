#include <cmath>
#include <vector>

#include "moeids/errors.hpp"
#include "moeids/nn.hpp"
#include "moeids/ops.hpp"

namespace moeids::nn {

namespace {

// U(-1/sqrt(fan_in), 1/sqrt(fan_in))
Tensor fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(values), true);
}

}  // namespace

Conv1dLayer::Conv1dLayer(std::size_t in_channels, std::size_t out_channels, Rng& rng)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      weight_(fan_in_uniform({out_channels, in_channels, kKernel}, in_channels * kKernel, rng)),
      bias_(fan_in_uniform({out_channels}, in_channels * kKernel, rng)) {}

Tensor Conv1dLayer::forward(const Tensor& input) const { return conv1d(input, weight_, bias_, kPadding); }

void Conv1dLayer::collect(const std::string& prefix, std::vector<NamedTensor>& params) const {
  params.push_back({prefix + "weight", weight_});
  params.push_back({prefix + "bias", bias_});
}

BatchNorm1dLayer::BatchNorm1dLayer(std::size_t channels, BatchNormOptions options)
    : channels_(channels),
      options_(options),
      gamma_(Tensor::full({channels}, 1.0, true)),
      beta_(Tensor::zeros({channels}, true)),
      running_mean_(Tensor::zeros({channels})),
      running_var_(Tensor::full({channels}, 1.0)) {
  if (!(options.momentum > 0.0 && options.momentum < 1.0)) throw ConfigError("batch norm momentum must lie in (0,1)");
  if (!(options.eps > 0.0)) throw ConfigError("batch norm eps must be positive");
}

Tensor BatchNorm1dLayer::forward(const Tensor& input, Mode mode) {
  if (mode == Mode::kEval) {
    return batch_norm_eval(input, gamma_, beta_, running_mean_.data(), running_var_.data(), options_.eps);
  }
  BatchStatistics stats;
  Tensor out = batch_norm_train(input, gamma_, beta_, options_.eps, &stats);
  const double count = static_cast<double>(input.dim(0) * input.dim(2));
  const double unbias = count / (count - 1.0);
  auto rm = running_mean_.mutable_data();
  auto rv = running_var_.mutable_data();
  for (std::size_t c = 0; c < channels_; ++c) {
    rm[c] = (1.0 - options_.momentum) * rm[c] + options_.momentum * stats.mean[c];
    rv[c] = (1.0 - options_.momentum) * rv[c] + options_.momentum * stats.variance[c] * unbias;
  }
  return out;
}

void BatchNorm1dLayer::collect(const std::string& prefix, std::vector<NamedTensor>& params) const {
  params.push_back({prefix + "gamma", gamma_});
  params.push_back({prefix + "beta", beta_});
}

void BatchNorm1dLayer::collect_buffers(const std::string& prefix, std::vector<NamedTensor>& buffers) const {
  buffers.push_back({prefix + "running_mean", running_mean_});
  buffers.push_back({prefix + "running_var", running_var_});
}

DenseLayer::DenseLayer(std::size_t in_features, std::size_t out_features, Rng& rng)
    : in_features_(in_features),
      out_features_(out_features),
      weight_(fan_in_uniform({out_features, in_features}, in_features, rng)),
      bias_(fan_in_uniform({out_features}, in_features, rng)) {}

void DenseLayer::collect(const std::string& prefix, std::vector<NamedTensor>& params) const {
  params.push_back({prefix + "weight", weight_});
  params.push_back({prefix + "bias", bias_});
}

CnnCell::CnnCell(std::size_t in_channels, std::size_t filters, bool pool, Rng& rng, BatchNormOptions bn)
    : conv_(in_channels, filters, rng), norm_(filters, bn), pool_(pool) {}

Tensor CnnCell::forward(const Tensor& input, Mode mode) {
  Tensor h = relu(norm_.forward(conv_.forward(input), mode));
  return pool_ ? maxpool1d(h) : h;
}

void CnnCell::collect(const std::string& prefix, std::vector<NamedTensor>& params) const {
  conv_.collect(prefix + "conv.", params);
  norm_.collect(prefix + "bn.", params);
}

void CnnCell::collect_buffers(const std::string& prefix, std::vector<NamedTensor>& buffers) const {
  norm_.collect_buffers(prefix + "bn.", buffers);
}

std::size_t BackboneConfig::output_length() const {
  std::size_t len = length;
  for (std::size_t i = 0; i + 1 < filters.size(); ++i) len /= 2;
  return len;
}

std::size_t BackboneConfig::output_features() const { return filters.empty() ? 0 : filters.back() * output_length(); }

CnnBackbone::CnnBackbone(const BackboneConfig& config, Rng& rng) : config_(config) {
  if (config.filters.empty()) throw ConfigError("backbone needs at least one CNN cell");
  std::size_t len = config.length;
  for (std::size_t i = 0; i + 1 < config.filters.size(); ++i) {
    if (len < 2) throw ConfigError("backbone: sequence too short for " + std::to_string(config.filters.size()) + " cells");
    len /= 2;
  }
  std::size_t in = config.in_channels;
  for (std::size_t i = 0; i < config.filters.size(); ++i) {
    const bool pool = i + 1 < config.filters.size();
    cells_.emplace_back(in, config.filters[i], pool, rng, config.batch_norm);
    in = config.filters[i];
  }
}

Tensor CnnBackbone::forward(const Tensor& input, Mode mode) {
  if (input.rank() != 3 || input.dim(1) != config_.in_channels || input.dim(2) != config_.length) {
    throw DimensionError("backbone: expected input (batch," + std::to_string(config_.in_channels) + "," +
                         std::to_string(config_.length) + "), got " + shape_to_string(input.shape()));
  }
  Tensor h = input;
  for (auto& cell : cells_) h = cell.forward(h, mode);
  return reshape(h, {input.dim(0), output_features()});
}

void CnnBackbone::collect(const std::string& prefix, std::vector<NamedTensor>& params) const {
  for (std::size_t i = 0; i < cells_.size(); ++i) cells_[i].collect(prefix + "cell" + std::to_string(i) + ".", params);
}

void CnnBackbone::collect_buffers(const std::string& prefix, std::vector<NamedTensor>& buffers) const {
  for (std::size_t i = 0; i < cells_.size(); ++i)
    cells_[i].collect_buffers(prefix + "cell" + std::to_string(i) + ".", buffers);
}

}  // namespace moeids::nn
