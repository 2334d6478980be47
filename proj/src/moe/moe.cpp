#include "moeids/moe.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "core/ops_internal.hpp"
#include "moeids/errors.hpp"
#include "moeids/ops.hpp"

namespace moeids::moe {

using detail::grad_of;
using detail::Node;

void MoEConfig::validate() const {
  if (n_experts == 0 || input_dim == 0 || expert_hidden == 0 || n_classes == 0) {
    throw ConfigError("moe: sizes must be positive");
  }
  if (top_k < 1 || top_k > n_experts) {
    throw ConfigError("moe: top_k must satisfy 1 <= k <= n (k=" + std::to_string(top_k) +
                      ", n=" + std::to_string(n_experts) + ")");
  }
  if (w_importance < 0.0 || w_load < 0.0) throw ConfigError("moe: loss weights must be nonnegative");
}

Expert::Expert(std::size_t input_dim, std::size_t hidden, std::size_t n_classes, Rng& rng)
    : hidden_(input_dim, hidden, rng), output_(hidden, n_classes, rng) {}

Tensor Expert::forward(const Tensor& x) const { return output_.forward(relu(hidden_.forward(x))); }

void Expert::collect(const std::string& prefix, std::vector<nn::NamedTensor>& params) const {
  hidden_.collect(prefix + "hidden.", params);
  output_.collect(prefix + "output.", params);
}

Router Router::zeros(std::size_t input_dim, std::size_t n_experts) {
  return Router{Tensor::zeros({input_dim, n_experts}, true), Tensor::zeros({input_dim, n_experts}, true)};
}

std::vector<std::size_t> top_k_indices(std::span<const double> values, std::size_t k) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min(k, values.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return values[a] > values[b] || (values[a] == values[b] && a < b); });
  idx.resize(k);
  return idx;
}

Tensor top_k_mask(const Tensor& values, std::size_t k) {
  if (values.rank() != 2) throw DimensionError("top_k_mask: expected (batch,n), got " + shape_to_string(values.shape()));
  const std::size_t m = values.dim(0), n = values.dim(1);
  if (k < 1 || k > n) throw DimensionError("top_k_mask: k=" + std::to_string(k) + " with n=" + std::to_string(n));
  const auto v = values.data();
  std::vector<double> out(m * n, kMaskedLogit);
  std::vector<char> kept(m * n, 0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j : top_k_indices(v.subspan(i * n, n), k)) {
      out[i * n + j] = v[i * n + j];
      kept[i * n + j] = 1;
    }
  }
  return Tensor::from_op(values.shape(), std::move(out), "top_k_mask", {values}, [kept = std::move(kept)](Node& self) {
    if (double* g = grad_of(*self.parents[0])) {
      for (std::size_t i = 0; i < kept.size(); ++i)
        if (kept[i]) g[i] += self.grad[i];
    }
  });
}

GateDecision noisy_gate(const Router& router, const Tensor& x, std::size_t k, bool noise_enabled, Rng* rng) {
  const std::size_t n = router.w_gate.dim(1);
  if (k < 1 || k > n) throw DimensionError("noisy_gate: k=" + std::to_string(k) + " with n=" + std::to_string(n));
  GateDecision d;
  d.top_k = k;
  d.noisy = noise_enabled;
  d.clean_logits = matmul(x, router.w_gate);
  d.noise_std = softplus(matmul(x, router.w_noise));
  if (noise_enabled) {
    if (!rng) throw Error("noisy_gate: noise enabled without a random stream");
    const Tensor eps = standard_normal_sample(*rng, d.clean_logits.shape());
    d.noisy_logits = add(d.clean_logits, mul(eps, d.noise_std));
  } else {
    d.noisy_logits = d.clean_logits;
  }
  d.gates = softmax(top_k_mask(d.noisy_logits, k), 1);
  const auto h = d.noisy_logits.data();
  const std::size_t m = x.dim(0);
  d.selected.reserve(m);
  for (std::size_t i = 0; i < m; ++i) d.selected.push_back(top_k_indices(h.subspan(i * n, n), k));
  return d;
}

Tensor moe_forward(std::span<const Expert> experts, const GateDecision& decision, const Tensor& x) {
  const std::size_t m = x.dim(0);
  const std::size_t n = decision.gates.dim(1);
  if (experts.size() != n) {
    throw DimensionError("moe_forward: " + std::to_string(experts.size()) + " experts but gates have " +
                         std::to_string(n) + " columns");
  }
  if (decision.selected.size() != m) throw DimensionError("moe_forward: decision was made for a different batch");

  // rows_of[e] is ascending because rows are visited in order.
  std::vector<std::vector<std::size_t>> rows_of(n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t e : decision.selected[i]) rows_of[e].push_back(i);

  Tensor out;
  for (std::size_t e = 0; e < n; ++e) {
    const auto& rows = rows_of[e];
    if (rows.empty()) continue;
    Tensor y = experts[e].forward(gather_rows(x, rows));
    Tensor weighted = scale_rows(y, take_column(decision.gates, rows, e));
    if (!out.defined()) out = Tensor::zeros({m, y.dim(1)});
    out = index_add_rows(out, rows, weighted);
  }
  if (!out.defined()) throw DegenerateInputError("moe_forward: no expert was selected");
  return out;
}

Tensor importance_loss(const Tensor& gates, double w_importance) {
  return scale(coefficient_of_variation_sq(column_sum(gates)), w_importance);
}

Tensor load_loss(const Tensor& load_p, double w_load) {
  return scale(coefficient_of_variation_sq(column_sum(load_p)), w_load);
}

Tensor load_probability(const GateDecision& decision) {
  const Tensor& clean = decision.clean_logits;
  const Tensor& noisy = decision.noisy_logits;
  const Tensor& stddev = decision.noise_std;
  const std::size_t m = clean.dim(0), n = clean.dim(1), k = decision.top_k;
  if (k < 1 || k > n) throw DimensionError("load_probability: invalid top_k in decision");

  const auto c = clean.data();
  const auto h = noisy.data();
  const auto s = stddev.data();
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<double> out(m * n), z(m * n);
  std::vector<std::size_t> threshold_src(m * n, kNone);
  std::vector<std::size_t> order(n);
  for (std::size_t r = 0; r < m; ++r) {
    const auto row = h.subspan(r * n, n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
    std::vector<char> in_top(n, 0);
    for (std::size_t p = 0; p < k; ++p) in_top[order[p]] = 1;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = r * n + i;
      // Removing a selected expert promotes the (k+1)-th value to k-th place.
      const std::size_t pos = in_top[i] ? k : k - 1;
      if (pos >= n) {
        out[idx] = 1.0;
        continue;
      }
      threshold_src[idx] = r * n + order[pos];
      z[idx] = (c[idx] - h[threshold_src[idx]]) / s[idx];
      out[idx] = 0.5 * std::erfc(-z[idx] / std::numbers::sqrt2);
    }
  }

  return Tensor::from_op(
      {m, n}, std::move(out), "load_probability", {clean, noisy, stddev},
      [z = std::move(z), threshold_src = std::move(threshold_src)](Node& self) {
        Node& ns = *self.parents[2];
        double* gc = grad_of(*self.parents[0]);
        double* gh = grad_of(*self.parents[1]);
        double* gs = grad_of(ns);
        for (std::size_t idx = 0; idx < z.size(); ++idx) {
          if (threshold_src[idx] == kNone) continue;
          const double pdf = std::exp(-0.5 * z[idx] * z[idx]) / std::sqrt(2.0 * std::numbers::pi);
          const double d = self.grad[idx] * pdf / ns.value[idx];
          if (gc) gc[idx] += d;
          if (gh) gh[threshold_src[idx]] -= d;
          if (gs) gs[idx] -= d * z[idx];
        }
      });
}

MoELayer::MoELayer(const MoEConfig& config, Rng& rng)
    : config_(config), router_(Router::zeros(config.input_dim, config.n_experts)) {
  config_.validate();
  experts_.reserve(config.n_experts);
  for (std::size_t e = 0; e < config.n_experts; ++e) {
    experts_.emplace_back(config.input_dim, config.expert_hidden, config.n_classes, rng);
  }
}

GateDecision MoELayer::route(const Tensor& x, nn::Mode mode, Rng& noise_rng) const {
  const bool noise = mode == nn::Mode::kTrain && config_.noise_enabled;
  return noisy_gate(router_, x, config_.top_k, noise, &noise_rng);
}

MoELayer::Output MoELayer::forward(const Tensor& x, nn::Mode mode, Rng& noise_rng) const {
  if (x.rank() != 2 || x.dim(1) != config_.input_dim) {
    throw DimensionError("moe: expected input (batch," + std::to_string(config_.input_dim) + "), got " +
                         shape_to_string(x.shape()));
  }
  Output out;
  out.decision = route(x, mode, noise_rng);
  out.logits = moe_forward(experts_, out.decision, x);
  out.importance_loss = importance_loss(out.decision.gates, config_.w_importance);
  if (out.decision.noisy) {
    out.load_p = load_probability(out.decision);
    out.load_loss = load_loss(out.load_p, config_.w_load);
  } else {
    out.load_loss = Tensor::scalar(0.0);
  }
  return out;
}

void MoELayer::collect(const std::string& prefix, std::vector<nn::NamedTensor>& params) const {
  params.push_back({prefix + "router.w_gate", router_.w_gate});
  params.push_back({prefix + "router.w_noise", router_.w_noise});
  for (std::size_t e = 0; e < experts_.size(); ++e) experts_[e].collect(prefix + "expert" + std::to_string(e) + ".", params);
}

}  // namespace moeids::moe
