#include "gradient_cases.hpp"

#include <algorithm>

#include "moeids/moe.hpp"
#include "moeids/nn.hpp"
#include "moeids/ops.hpp"

namespace moeids::testing {

namespace {

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

Tensor fixed_weights(Rng& rng, const Shape& shape) {
  Tensor w = random_tensor(rng, shape);
  w.set_requires_grad(false);
  return w;
}

}  // namespace

std::string_view family_name(GradFamily family) {
  switch (family) {
    case GradFamily::kConv1d: return "conv1d";
    case GradFamily::kBatchNormTrain: return "batchnorm_train";
    case GradFamily::kMaxPool: return "maxpool";
    case GradFamily::kDense: return "dense";
    case GradFamily::kRelu: return "relu";
    case GradFamily::kSoftmaxCrossEntropy: return "softmax_cross_entropy";
    case GradFamily::kNoisyGatingNoiseOff: return "noisy_gating_noise_off";
    case GradFamily::kImportanceLoss: return "importance_loss";
    case GradFamily::kLoadLoss: return "load_loss";
  }
  return "?";
}

GradCheckResult check_random_instance(GradFamily family, Rng& rng) {
  switch (family) {
    case GradFamily::kConv1d: {
      const std::size_t b = pick(rng, 1, 3), cin = pick(rng, 1, 3), cout = pick(rng, 1, 3), len = pick(rng, 1, 5);
      const std::size_t pad = pick(rng, 0, 1);
      const std::size_t kernel = pick(rng, 1, std::min<std::size_t>(3, len + 2 * pad));
      const std::size_t out_len = len + 2 * pad - kernel + 1;
      Tensor w = fixed_weights(rng, {b, cout, out_len});
      return gradcheck(
          [&](const std::vector<Tensor>& in) { return weighted_sum(nn::conv1d(in[0], in[1], in[2], pad), w); },
          {random_tensor(rng, {b, cin, len}), random_tensor(rng, {cout, cin, kernel}), random_tensor(rng, {cout})});
    }
    case GradFamily::kBatchNormTrain: {
      const std::size_t b = pick(rng, 2, 4), c = pick(rng, 1, 3), len = pick(rng, 1, 4);
      Tensor w = fixed_weights(rng, {b, c, len});
      return gradcheck(
          [&](const std::vector<Tensor>& in) { return weighted_sum(nn::batch_norm_train(in[0], in[1], in[2], 1e-5), w); },
          {random_tensor(rng, {b, c, len}), random_tensor(rng, {c}, 0.5, 1.5), random_tensor(rng, {c})});
    }
    case GradFamily::kMaxPool: {
      const std::size_t b = pick(rng, 1, 3), c = pick(rng, 1, 3), len = pick(rng, 2, 7);
      Tensor w = fixed_weights(rng, {b, c, len / 2});
      return gradcheck([&](const std::vector<Tensor>& in) { return weighted_sum(nn::maxpool1d(in[0]), w); },
                       {random_tensor(rng, {b, c, len})});
    }
    case GradFamily::kDense: {
      const std::size_t b = pick(rng, 1, 4), fin = pick(rng, 1, 5), fout = pick(rng, 1, 5);
      Tensor w = fixed_weights(rng, {b, fout});
      return gradcheck(
          [&](const std::vector<Tensor>& in) { return weighted_sum(nn::dense(in[0], in[1], in[2]), w); },
          {random_tensor(rng, {b, fin}), random_tensor(rng, {fout, fin}), random_tensor(rng, {fout})});
    }
    case GradFamily::kRelu: {
      const Shape shape{pick(rng, 1, 4), pick(rng, 1, 5)};
      Tensor w = fixed_weights(rng, shape);
      // Keep inputs clear of the kink so the finite difference stays on one side.
      return gradcheck([&](const std::vector<Tensor>& in) { return weighted_sum(relu(in[0]), w); },
                       {random_tensor(rng, shape, -1.0, 1.0, 1e-3)});
    }
    case GradFamily::kSoftmaxCrossEntropy: {
      const std::size_t b = pick(rng, 1, 5), c = pick(rng, 2, 9);
      std::vector<int> labels(b);
      for (auto& l : labels) l = static_cast<int>(rng.below(c));
      return gradcheck([&](const std::vector<Tensor>& in) { return nn::cross_entropy(in[0], labels); },
                       {random_tensor(rng, {b, c}, -3.0, 3.0)});
    }
    case GradFamily::kNoisyGatingNoiseOff:
    case GradFamily::kImportanceLoss: {
      const std::size_t b = pick(rng, 1, 4), d = pick(rng, 1, 4), n = pick(rng, 2, 6);
      const std::size_t k = pick(rng, 2, n);
      Tensor w = fixed_weights(rng, {b, n});
      const bool importance = family == GradFamily::kImportanceLoss;
      return gradcheck(
          [&](const std::vector<Tensor>& in) {
            const moe::Router router{in[1], Tensor::zeros({d, n})};
            auto decision = moe::noisy_gate(router, in[0], k, false, nullptr);
            return importance ? moe::importance_loss(decision.gates, 1.0) : weighted_sum(decision.gates, w);
          },
          {random_tensor(rng, {b, d}), random_tensor(rng, {d, n})});
    }
    case GradFamily::kLoadLoss: {
      const std::size_t b = pick(rng, 1, 4), d = pick(rng, 1, 4), n = pick(rng, 3, 6);
      const std::size_t k = pick(rng, 1, n - 1);
      const std::uint64_t noise_seed = rng.next_u64();
      return gradcheck(
          [&](const std::vector<Tensor>& in) {
            const moe::Router router{in[1], in[2]};
            Rng noise(noise_seed);
            auto decision = moe::noisy_gate(router, in[0], k, true, &noise);
            return moe::load_loss(moe::load_probability(decision), 1.0);
          },
          {random_tensor(rng, {b, d}), random_tensor(rng, {d, n}), random_tensor(rng, {d, n})});
    }
  }
  return {};
}

}  // namespace moeids::testing
