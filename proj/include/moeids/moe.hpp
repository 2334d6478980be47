#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "moeids/nn.hpp"
#include "moeids/rng.hpp"
#include "moeids/tensor.hpp"

namespace moeids::moe {

struct MoEConfig {
  std::size_t n_experts = 128;
  std::size_t top_k = 32;
  std::size_t input_dim = 128;
  std::size_t expert_hidden = 16;
  std::size_t n_classes = 9;
  double w_importance = 1.0;
  double w_load = 1.0;
  bool noise_enabled = true;

  /// Throws ConfigError unless 1 <= top_k <= n_experts and sizes are positive.
  void validate() const;
};

/// dense(input_dim -> hidden) -> ReLU -> dense(hidden -> n_classes)
class Expert {
 public:
  Expert(std::size_t input_dim, std::size_t hidden, std::size_t n_classes, Rng& rng);

  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<nn::NamedTensor>& params) const;

 private:
  nn::DenseLayer hidden_;
  nn::DenseLayer output_;
};

/// Gating weights; both map input_dim -> n_experts. Zero-initialized.
struct Router {
  Tensor w_gate;   // [input_dim x n_experts]
  Tensor w_noise;  // [input_dim x n_experts]

  static Router zeros(std::size_t input_dim, std::size_t n_experts);
};

/// Routing outcome for one batch.
struct GateDecision {
  Tensor clean_logits;  // x * W_g
  Tensor noise_std;     // softplus(x * W_noise); computed even when noise is off
  Tensor noisy_logits;  // clean + eps * noise_std, or clean when noise is off
  Tensor gates;         // softmax of the top-k masked noisy logits
  /// Per row, the top_k expert ids ordered by descending noisy logit.
  std::vector<std::vector<std::size_t>> selected;
  std::size_t top_k = 0;
  bool noisy = false;
};

/// Indices of the k largest entries, descending; equal values keep index order.
std::vector<std::size_t> top_k_indices(std::span<const double> values, std::size_t k);

/// Keeps the k largest entries of each row of values[batch x n] and sets the
/// rest to -inf. Gradient flows only through kept entries.
Tensor top_k_mask(const Tensor& values, std::size_t k);

/// Noisy top-k routing. `rng` is only read when noise_enabled.
GateDecision noisy_gate(const Router& router, const Tensor& x, std::size_t k, bool noise_enabled, Rng* rng);

/// Gate-weighted sum of expert outputs. Each expert runs only on the rows that
/// selected it.
Tensor moe_forward(std::span<const Expert> experts, const GateDecision& decision, const Tensor& x);

/// w * CV(column sums of gates)^2
Tensor importance_loss(const Tensor& gates, double w_importance);

/// P(x,i) = Phi((clean_i - kth_excluding(H, k, i)) / noise_std_i) for every
/// sample and expert, where kth_excluding is the k-th largest noisy logit
/// among the other experts. When no such competitor exists (k == n and i is
/// selected) P is 1. Differentiable in clean logits, noisy logits and noise_std.
Tensor load_probability(const GateDecision& decision);

/// w * CV(column sums of P)^2
Tensor load_loss(const Tensor& load_p, double w_load);

class MoELayer {
 public:
  struct Output {
    Tensor logits;           // [batch x n_classes]
    GateDecision decision;
    Tensor importance_loss;  // scalar
    Tensor load_loss;        // scalar; 0 when routing was noise-free
    Tensor load_p;           // undefined when routing was noise-free
  };

  MoELayer(const MoEConfig& config, Rng& rng);

  /// Noise is applied only in train mode (and only if config enables it).
  Output forward(const Tensor& x, nn::Mode mode, Rng& noise_rng) const;
  /// Routing decision alone, for diagnostics.
  GateDecision route(const Tensor& x, nn::Mode mode, Rng& noise_rng) const;

  const MoEConfig& config() const { return config_; }
  const Router& router() const { return router_; }
  std::span<const Expert> experts() const { return experts_; }
  void collect(const std::string& prefix, std::vector<nn::NamedTensor>& params) const;

 private:
  MoEConfig config_;
  Router router_;
  std::vector<Expert> experts_;
};

}  // namespace moeids::moe
