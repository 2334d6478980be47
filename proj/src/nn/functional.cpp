#include <algorithm>
#include <cmath>
#include <vector>

#include "core/ops_internal.hpp"
#include "moeids/errors.hpp"
#include "moeids/nn.hpp"

namespace moeids::nn {

using detail::grad_of;
using detail::Node;

Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t padding) {
  if (input.rank() != 3 || weight.rank() != 3) {
    throw DimensionError("conv1d: expected input (batch,channels,len) and weight (out,in,kernel), got " +
                         shape_to_string(input.shape()) + " and " + shape_to_string(weight.shape()));
  }
  const std::size_t B = input.dim(0), C = input.dim(1), L = input.dim(2);
  const std::size_t O = weight.dim(0), K = weight.dim(2);
  if (weight.dim(1) != C) {
    throw DimensionError("conv1d: input has " + std::to_string(C) + " channels but layer expects " +
                         std::to_string(weight.dim(1)) + " (input " + shape_to_string(input.shape()) + ")");
  }
  if (bias.numel() != O) throw DimensionError("conv1d: bias size does not match output channels");
  if (L + 2 * padding < K) throw DimensionError("conv1d: input shorter than kernel");
  const std::size_t Lout = L + 2 * padding - K + 1;

  const auto x = input.data();
  const auto w = weight.data();
  const auto b = bias.data();
  std::vector<double> out(B * O * Lout);
  for (std::size_t n = 0; n < B; ++n) {
    for (std::size_t o = 0; o < O; ++o) {
      double* y = &out[(n * O + o) * Lout];
      std::fill_n(y, Lout, b[o]);
      for (std::size_t c = 0; c < C; ++c) {
        const double* xr = &x[(n * C + c) * L];
        const double* wr = &w[(o * C + c) * K];
        for (std::size_t k = 0; k < K; ++k) {
          // output t reads input t + k - padding
          const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(padding);
          const std::size_t t0 = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
          const std::size_t t1 = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(L) - shift, 0, static_cast<std::ptrdiff_t>(Lout));
          const double wk = wr[k];
          for (std::size_t t = t0; t < t1; ++t) y[t] += wk * xr[t + shift];
        }
      }
    }
  }

  return Tensor::from_op({B, O, Lout}, std::move(out), "conv1d", {input, weight, bias},
                         [B, C, L, O, K, Lout, padding](Node& self) {
                           Node& nx = *self.parents[0];
                           Node& nw = *self.parents[1];
                           double* gx = grad_of(nx);
                           double* gw = grad_of(nw);
                           double* gb = grad_of(*self.parents[2]);
                           const double* G = self.grad.data();
                           for (std::size_t n = 0; n < B; ++n) {
                             for (std::size_t o = 0; o < O; ++o) {
                               const double* gy = &G[(n * O + o) * Lout];
                               if (gb) {
                                 for (std::size_t t = 0; t < Lout; ++t) gb[o] += gy[t];
                               }
                               for (std::size_t c = 0; c < C; ++c) {
                                 const std::size_t xoff = (n * C + c) * L;
                                 const std::size_t woff = (o * C + c) * K;
                                 for (std::size_t k = 0; k < K; ++k) {
                                   const std::ptrdiff_t shift =
                                       static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(padding);
                                   const std::size_t t0 = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
                                   const std::size_t t1 =
                                       std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(L) - shift, 0, static_cast<std::ptrdiff_t>(Lout));
                                   if (gw) {
                                     double acc = 0.0;
                                     for (std::size_t t = t0; t < t1; ++t) acc += gy[t] * nx.value[xoff + t + shift];
                                     gw[woff + k] += acc;
                                   }
                                   if (gx) {
                                     const double wk = nw.value[woff + k];
                                     for (std::size_t t = t0; t < t1; ++t) gx[xoff + t + shift] += gy[t] * wk;
                                   }
                                 }
                               }
                             }
                           }
                         });
}

Tensor maxpool1d(const Tensor& input) {
  if (input.rank() != 3) throw DimensionError("maxpool1d: expected (batch,channels,len), got " + shape_to_string(input.shape()));
  const std::size_t B = input.dim(0), C = input.dim(1), L = input.dim(2);
  if (L < 2) throw DimensionError("maxpool1d: length " + std::to_string(L) + " is shorter than the window of 2");
  const std::size_t Lout = L / 2;
  const auto x = input.data();
  std::vector<double> out(B * C * Lout);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t row = 0; row < B * C; ++row) {
    for (std::size_t t = 0; t < Lout; ++t) {
      const std::size_t a = row * L + 2 * t;
      const std::size_t pick = x[a + 1] > x[a] ? a + 1 : a;
      out[row * Lout + t] = x[pick];
      argmax[row * Lout + t] = pick;
    }
  }
  return Tensor::from_op({B, C, Lout}, std::move(out), "maxpool1d", {input},
                         [argmax = std::move(argmax)](Node& self) {
                           if (double* g = grad_of(*self.parents[0])) {
                             for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += self.grad[i];
                           }
                         });
}

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() != 2 || weight.rank() != 2 || input.dim(1) != weight.dim(1) || bias.numel() != weight.dim(0)) {
    throw DimensionError("dense: input " + shape_to_string(input.shape()) + ", weight " +
                         shape_to_string(weight.shape()) + ", bias " + shape_to_string(bias.shape()) +
                         " do not agree");
  }
  const std::size_t m = input.dim(0), in = input.dim(1), out_f = weight.dim(0);
  const auto x = input.data();
  const auto w = weight.data();
  const auto b = bias.data();
  std::vector<double> out(m * out_f);
  for (std::size_t i = 0; i < m; ++i) {
    const double* xr = &x[i * in];
    for (std::size_t o = 0; o < out_f; ++o) {
      const double* wr = &w[o * in];
      double acc = b[o];
      for (std::size_t p = 0; p < in; ++p) acc += xr[p] * wr[p];
      out[i * out_f + o] = acc;
    }
  }
  return Tensor::from_op({m, out_f}, std::move(out), "dense", {input, weight, bias}, [m, in, out_f](Node& self) {
    Node& nx = *self.parents[0];
    Node& nw = *self.parents[1];
    double* gx = grad_of(nx);
    double* gw = grad_of(nw);
    double* gb = grad_of(*self.parents[2]);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t o = 0; o < out_f; ++o) {
        const double g = self.grad[i * out_f + o];
        if (g == 0.0) continue;
        if (gb) gb[o] += g;
        if (gw) {
          double* gwr = &gw[o * in];
          const double* xr = &nx.value[i * in];
          for (std::size_t p = 0; p < in; ++p) gwr[p] += g * xr[p];
        }
        if (gx) {
          double* gxr = &gx[i * in];
          const double* wr = &nw.value[o * in];
          for (std::size_t p = 0; p < in; ++p) gxr[p] += g * wr[p];
        }
      }
    }
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw DimensionError("cross_entropy: logits " + shape_to_string(logits.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
  }
  const std::size_t m = logits.dim(0), c = logits.dim(1);
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= c) {
      throw LabelError("cross_entropy: label " + std::to_string(label) + " outside [0," + std::to_string(c) + ")");
    }
  }
  const auto z = logits.data();
  std::vector<double> probs(m * c);
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double* zr = &z[i * c];
    const double mx = *std::max_element(zr, zr + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(zr[j] - mx);
    const double log_z = mx + std::log(s);
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(zr[j] - log_z);
    loss += log_z - zr[labels[i]];
  }
  loss /= static_cast<double>(m);
  std::vector<int> y(labels.begin(), labels.end());
  return Tensor::from_op({1}, {loss}, "cross_entropy", {logits},
                         [probs = std::move(probs), y = std::move(y), m, c](Node& self) {
                           if (double* g = grad_of(*self.parents[0])) {
                             const double s = self.grad[0] / static_cast<double>(m);
                             for (std::size_t i = 0; i < m; ++i) {
                               for (std::size_t j = 0; j < c; ++j) {
                                 const double target = static_cast<std::size_t>(y[i]) == j ? 1.0 : 0.0;
                                 g[i * c + j] += s * (probs[i * c + j] - target);
                               }
                             }
                           }
                         });
}

namespace {

void check_bn_shapes(const Tensor& input, const Tensor& gamma, const Tensor& beta) {
  if (input.rank() != 3) throw DimensionError("batch norm: expected (batch,channels,len), got " + shape_to_string(input.shape()));
  const std::size_t C = input.dim(1);
  if (gamma.numel() != C || beta.numel() != C) {
    throw DimensionError("batch norm: " + std::to_string(C) + " channels but gamma/beta sized " +
                         std::to_string(gamma.numel()) + "/" + std::to_string(beta.numel()));
  }
}

}  // namespace

Tensor batch_norm_train(const Tensor& input, const Tensor& gamma, const Tensor& beta, double eps,
                        BatchStatistics* stats) {
  check_bn_shapes(input, gamma, beta);
  const std::size_t B = input.dim(0), C = input.dim(1), L = input.dim(2);
  const std::size_t count = B * L;
  if (count < 2) {
    throw DegenerateInputError("batch norm: training needs at least 2 values per channel, got batch " +
                               std::to_string(B) + " x length " + std::to_string(L));
  }
  const auto x = input.data();
  const auto ga = gamma.data();
  const auto be = beta.data();
  std::vector<double> mu(C, 0.0), var(C, 0.0), inv_std(C);
  for (std::size_t n = 0; n < B; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t t = 0; t < L; ++t) mu[c] += x[(n * C + c) * L + t];
  for (auto& v : mu) v /= static_cast<double>(count);
  for (std::size_t n = 0; n < B; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t t = 0; t < L; ++t) {
        const double d = x[(n * C + c) * L + t] - mu[c];
        var[c] += d * d;
      }
  for (std::size_t c = 0; c < C; ++c) {
    var[c] /= static_cast<double>(count);
    inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
  }
  std::vector<double> xhat(x.size()), out(x.size());
  for (std::size_t n = 0; n < B; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t t = 0; t < L; ++t) {
        const std::size_t i = (n * C + c) * L + t;
        xhat[i] = (x[i] - mu[c]) * inv_std[c];
        out[i] = xhat[i] * ga[c] + be[c];
      }
  if (stats) {
    stats->mean = mu;
    stats->variance = var;
  }
  return Tensor::from_op(
      input.shape(), std::move(out), "batch_norm_train", {input, gamma, beta},
      [xhat = std::move(xhat), inv_std = std::move(inv_std), B, C, L, count](Node& self) {
        Node& ng = *self.parents[1];
        double* gx = grad_of(*self.parents[0]);
        double* gg = grad_of(ng);
        double* gb = grad_of(*self.parents[2]);
        const double* G = self.grad.data();
        for (std::size_t c = 0; c < C; ++c) {
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (std::size_t n = 0; n < B; ++n)
            for (std::size_t t = 0; t < L; ++t) {
              const std::size_t i = (n * C + c) * L + t;
              sum_dy += G[i];
              sum_dy_xhat += G[i] * xhat[i];
            }
          if (gg) gg[c] += sum_dy_xhat;
          if (gb) gb[c] += sum_dy;
          if (gx) {
            const double N = static_cast<double>(count);
            const double k = ng.value[c] * inv_std[c] / N;
            for (std::size_t n = 0; n < B; ++n)
              for (std::size_t t = 0; t < L; ++t) {
                const std::size_t i = (n * C + c) * L + t;
                gx[i] += k * (N * G[i] - sum_dy - xhat[i] * sum_dy_xhat);
              }
          }
        }
      });
}

Tensor batch_norm_eval(const Tensor& input, const Tensor& gamma, const Tensor& beta, std::span<const double> mean,
                       std::span<const double> variance, double eps) {
  check_bn_shapes(input, gamma, beta);
  const std::size_t B = input.dim(0), C = input.dim(1), L = input.dim(2);
  if (mean.size() != C || variance.size() != C) throw DimensionError("batch norm: running statistics size mismatch");
  std::vector<double> inv_std(C);
  for (std::size_t c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(variance[c] + eps);
  const auto x = input.data();
  const auto ga = gamma.data();
  const auto be = beta.data();
  std::vector<double> xhat(x.size()), out(x.size());
  for (std::size_t n = 0; n < B; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t t = 0; t < L; ++t) {
        const std::size_t i = (n * C + c) * L + t;
        xhat[i] = (x[i] - mean[c]) * inv_std[c];
        out[i] = xhat[i] * ga[c] + be[c];
      }
  return Tensor::from_op(input.shape(), std::move(out), "batch_norm_eval", {input, gamma, beta},
                         [xhat = std::move(xhat), inv_std = std::move(inv_std), B, C, L](Node& self) {
                           Node& ng = *self.parents[1];
                           double* gx = grad_of(*self.parents[0]);
                           double* gg = grad_of(ng);
                           double* gb = grad_of(*self.parents[2]);
                           for (std::size_t n = 0; n < B; ++n)
                             for (std::size_t c = 0; c < C; ++c)
                               for (std::size_t t = 0; t < L; ++t) {
                                 const std::size_t i = (n * C + c) * L + t;
                                 const double g = self.grad[i];
                                 if (gg) gg[c] += g * xhat[i];
                                 if (gb) gb[c] += g;
                                 if (gx) gx[i] += g * ng.value[c] * inv_std[c];
                               }
                         });
}

}  // namespace moeids::nn
