#include "moeids/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "moeids/errors.hpp"
#include "core/ops_internal.hpp"

namespace moeids {

using detail::grad_of;
using detail::Node;

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()) + " differ");
  }
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         shape_to_string(a.shape()));
  }
}

template <typename Forward, typename Derivative>
Tensor unary(const Tensor& a, const char* op, Forward f, Derivative df) {
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
  return Tensor::from_op(a.shape(), std::move(out), op, {a}, [df](Node& self) {
    Node& in = *self.parents[0];
    if (double* g = grad_of(in)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * df(in.value[i], self.value[i]);
    }
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_to_string(a.shape()) + " by " +
                         shape_to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = &out[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &B[p * n];
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  return Tensor::from_op({m, n}, std::move(out), "matmul", {a, b}, [m, k, n](Node& self) {
    Node& na = *self.parents[0];
    Node& nb = *self.parents[1];
    const double* G = self.grad.data();
    if (double* ga = grad_of(na)) {
      // dA = G * B^T
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = &nb.value[p * n];
          const double* grow = &G[i * n];
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (double* gb = grad_of(nb)) {
      // dB = A^T * G
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = na.value[i * k + p];
          if (aip == 0.0) continue;
          double* gbrow = &gb[p * n];
          const double* grow = &G[i * n];
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
        }
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return Tensor::from_op(a.shape(), std::move(out), "add", {a, b}, [](Node& self) {
    for (auto& p : self.parents) {
      if (double* g = grad_of(*p)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return Tensor::from_op(a.shape(), std::move(out), "sub", {a, b}, [](Node& self) {
    if (double* g = grad_of(*self.parents[0])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (double* g = grad_of(*self.parents[1])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return Tensor::from_op(a.shape(), std::move(out), "mul", {a, b}, [](Node& self) {
    Node& na = *self.parents[0];
    Node& nb = *self.parents[1];
    if (double* g = grad_of(na)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * nb.value[i];
    }
    if (double* g = grad_of(nb)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * na.value[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  return Tensor::from_op(a.shape(), std::move(out), "scale", {a}, [factor](Node& self) {
    if (double* g = grad_of(*self.parents[0])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * factor;
    }
  });
}

Tensor add_row_vector(const Tensor& a, const Tensor& bias) {
  require_rank(a, 2, "add_row_vector");
  if (bias.numel() != a.dim(1)) {
    throw DimensionError("add_row_vector: bias " + shape_to_string(bias.shape()) + " does not match rows of " +
                         shape_to_string(a.shape()));
  }
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto b = bias.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += b[j];
  return Tensor::from_op(a.shape(), std::move(out), "add_row_vector", {a, bias}, [m, n](Node& self) {
    if (double* g = grad_of(*self.parents[0])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (double* g = grad_of(*self.parents[1])) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
    }
  });
}

Tensor scale_rows(const Tensor& a, const Tensor& weights) {
  require_rank(a, 2, "scale_rows");
  if (weights.numel() != a.dim(0)) {
    throw DimensionError("scale_rows: weights " + shape_to_string(weights.shape()) + " vs rows of " +
                         shape_to_string(a.shape()));
  }
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  const auto x = a.data();
  const auto w = weights.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] * w[i];
  return Tensor::from_op(a.shape(), std::move(out), "scale_rows", {a, weights}, [m, n](Node& self) {
    Node& na = *self.parents[0];
    Node& nw = *self.parents[1];
    if (double* g = grad_of(na)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i * n + j] * nw.value[i];
    }
    if (double* g = grad_of(nw)) {
      for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += self.grad[i * n + j] * na.value[i * n + j];
        g[i] += acc;
      }
    }
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return Tensor::from_op({1}, {total}, "sum", {a}, [](Node& self) {
    if (double* g = grad_of(*self.parents[0])) {
      const double s = self.grad[0];
      for (std::size_t i = 0; i < self.parents[0]->value.size(); ++i) g[i] += s;
    }
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor column_sum(const Tensor& a) {
  require_rank(a, 2, "column_sum");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(n, 0.0);
  const auto x = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += x[i * n + j];
  return Tensor::from_op({n}, std::move(out), "column_sum", {a}, [m, n](Node& self) {
    if (double* g = grad_of(*self.parents[0])) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j];
    }
  });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& a) {
  return unary(
      a, "softplus", [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) {
        // logistic sigmoid, stable on both tails
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      });
}

Tensor normal_cdf(const Tensor& a) {
  return unary(
      a, "normal_cdf", [](double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); },
      [](double z, double) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); });
}

Tensor softmax(const Tensor& logits, std::size_t axis) {
  const auto& shape = logits.shape();
  if (axis >= shape.size()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " + shape_to_string(shape));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t n = shape[axis];
  const auto x = logits.data();
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = kMaskedLogit;
      for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, x[base + j * inner]);
      if (mx == kMaskedLogit) throw DegenerateInputError("softmax: every entry along the axis is -inf");
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double v = x[base + j * inner];
        const double e = v == kMaskedLogit ? 0.0 : std::exp(v - mx);
        out[base + j * inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < n; ++j) out[base + j * inner] /= z;
    }
  }
  return Tensor::from_op(shape, std::move(out), "softmax", {logits}, [outer, inner, n](Node& self) {
    double* g = grad_of(*self.parents[0]);
    if (!g) return;
    const auto& y = self.value;
    const auto& dy = self.grad;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += dy[base + j * inner] * y[base + j * inner];
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t idx = base + j * inner;
          g[idx] += y[idx] * (dy[idx] - dot);
        }
      }
    }
  });
}

Tensor coefficient_of_variation_sq(const Tensor& v) {
  const auto x = v.data();
  const double n = static_cast<double>(x.size());
  double m = 0.0;
  for (double e : x) m += e;
  m /= n;
  double var = 0.0;
  for (double e : x) var += (e - m) * (e - m);
  var /= n;
  const double denom = m + kCvEpsilon;
  const double cv2 = var / (denom * denom);
  return Tensor::from_op({1}, {cv2}, "cv_squared", {v}, [m, var, denom, n](Node& self) {
    Node& in = *self.parents[0];
    if (double* g = grad_of(in)) {
      const double s = self.grad[0];
      const double d2 = denom * denom;
      for (std::size_t j = 0; j < in.value.size(); ++j) {
        const double dvar = 2.0 * (in.value[j] - m) / n;
        g[j] += s * (dvar / d2 - 2.0 * var / (d2 * denom) / n);
      }
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(a.shape()) + " as " + shape_to_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return Tensor::from_op(std::move(shape), std::move(out), "reshape", {a}, [](Node& self) {
    if (double* g = grad_of(*self.parents[0])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows) {
  require_rank(a, 2, "gather_rows");
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (rows.empty()) throw DimensionError("gather_rows: empty row selection");
  std::vector<double> out(rows.size() * n);
  const auto x = a.data();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= m) throw DimensionError("gather_rows: row index out of range");
    std::copy_n(&x[rows[r] * n], n, &out[r * n]);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return Tensor::from_op({rows.size(), n}, std::move(out), "gather_rows", {a},
                         [idx = std::move(idx), n](Node& self) {
                           if (double* g = grad_of(*self.parents[0])) {
                             for (std::size_t r = 0; r < idx.size(); ++r)
                               for (std::size_t j = 0; j < n; ++j) g[idx[r] * n + j] += self.grad[r * n + j];
                           }
                         });
}

Tensor index_add_rows(const Tensor& base, std::span<const std::size_t> rows, const Tensor& src) {
  require_rank(base, 2, "index_add_rows");
  require_rank(src, 2, "index_add_rows");
  const std::size_t m = base.dim(0), n = base.dim(1);
  if (src.dim(0) != rows.size() || src.dim(1) != n) {
    throw DimensionError("index_add_rows: source " + shape_to_string(src.shape()) + " does not fit " +
                         std::to_string(rows.size()) + " rows of " + shape_to_string(base.shape()));
  }
  std::vector<double> out(base.data().begin(), base.data().end());
  const auto s = src.data();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= m) throw DimensionError("index_add_rows: row index out of range");
    for (std::size_t j = 0; j < n; ++j) out[rows[r] * n + j] += s[r * n + j];
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return Tensor::from_op(base.shape(), std::move(out), "index_add_rows", {base, src},
                         [idx = std::move(idx), n](Node& self) {
                           if (double* g = grad_of(*self.parents[0])) {
                             for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
                           }
                           if (double* g = grad_of(*self.parents[1])) {
                             for (std::size_t r = 0; r < idx.size(); ++r)
                               for (std::size_t j = 0; j < n; ++j) g[r * n + j] += self.grad[idx[r] * n + j];
                           }
                         });
}

Tensor take_column(const Tensor& a, std::span<const std::size_t> rows, std::size_t column) {
  require_rank(a, 2, "take_column");
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (column >= n) throw DimensionError("take_column: column out of range");
  if (rows.empty()) throw DimensionError("take_column: empty row selection");
  std::vector<double> out(rows.size());
  const auto x = a.data();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= m) throw DimensionError("take_column: row index out of range");
    out[r] = x[rows[r] * n + column];
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return Tensor::from_op({rows.size()}, std::move(out), "take_column", {a},
                         [idx = std::move(idx), n, column](Node& self) {
                           if (double* g = grad_of(*self.parents[0])) {
                             for (std::size_t r = 0; r < idx.size(); ++r) g[idx[r] * n + column] += self.grad[r];
                           }
                         });
}

}  // namespace moeids
