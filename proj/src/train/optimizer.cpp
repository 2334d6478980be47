#include "moeids/train/optimizer.hpp"

#include <cmath>

namespace moeids::train {

void Optimizer::zero_grad() {
  for (auto& p : params_) p.tensor.clear_grad();
}

void Sgd::step() {
  for (auto& p : params_) {
    if (!p.tensor.has_grad()) continue;
    auto w = p.tensor.mutable_data();
    const auto g = p.tensor.grad();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr_ * g[i];
  }
}

Adam::Adam(std::vector<nn::NamedTensor> params, double lr, double beta1, double beta2, double eps)
    : Optimizer(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  state_.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    state_[i].m.assign(params_[i].tensor.numel(), 0.0);
    state_[i].v.assign(params_[i].tensor.numel(), 0.0);
  }
}

void Adam::step() {
  for (std::size_t p = 0; p < params_.size(); ++p) {
    Tensor& t = params_[p].tensor;
    if (!t.has_grad()) continue;
    State& s = state_[p];
    ++s.t;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(s.t));
    auto w = t.mutable_data();
    const auto g = t.grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * g[i];
      s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr_ * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + eps_);
    }
  }
}

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, std::vector<nn::NamedTensor> params, double lr) {
  if (kind == OptimizerKind::kSgd) return std::make_unique<Sgd>(std::move(params), lr);
  return std::make_unique<Adam>(std::move(params), lr);
}

}  // namespace moeids::train
