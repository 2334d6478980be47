#pragma once

#include <memory>
#include <vector>

#include "moeids/nn.hpp"
#include "moeids/train/config.hpp"

namespace moeids::train {

/// Updates parameters in place from their accumulated gradients. Parameters
/// without a gradient are left alone.
class Optimizer {
 public:
  explicit Optimizer(std::vector<nn::NamedTensor> params) : params_(std::move(params)) {}
  virtual ~Optimizer() = default;
  virtual void step() = 0;
  void zero_grad();

 protected:
  std::vector<nn::NamedTensor> params_;
};

class Sgd final : public Optimizer {
 public:
  Sgd(std::vector<nn::NamedTensor> params, double lr) : Optimizer(std::move(params)), lr_(lr) {}
  void step() override;

 private:
  double lr_;
};

/// Adam with bias correction; each parameter keeps its own step count.
class Adam final : public Optimizer {
 public:
  Adam(std::vector<nn::NamedTensor> params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step() override;

 private:
  struct State {
    std::vector<double> m;
    std::vector<double> v;
    std::size_t t = 0;
  };
  double lr_, beta1_, beta2_, eps_;
  std::vector<State> state_;
};

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, std::vector<nn::NamedTensor> params, double lr);

}  // namespace moeids::train
