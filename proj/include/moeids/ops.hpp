#pragma once

#include <cstddef>
#include <limits>
#include <span>

#include "moeids/tensor.hpp"

namespace moeids {

/// Masked-out logits are IEEE -infinity; softmax maps them to exactly 0.
inline constexpr double kMaskedLogit = -std::numeric_limits<double>::infinity();

/// Added to the mean in the coefficient of variation so it stays finite.
inline constexpr double kCvEpsilon = 1e-10;

// Linear algebra and elementwise arithmetic. Binary elementwise operations
// require identical shapes; no implicit broadcasting.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// a[m x n] + bias[n] added to every row.
Tensor add_row_vector(const Tensor& a, const Tensor& bias);
/// Row i of a[m x n] multiplied by weights[i].
Tensor scale_rows(const Tensor& a, const Tensor& weights);

// Reductions.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Column sums of a[m x n] -> [n].
Tensor column_sum(const Tensor& a);

// Elementwise nonlinearities.
Tensor relu(const Tensor& a);
/// ln(1 + e^x), evaluated as max(x,0) + log1p(e^-|x|).
Tensor softplus(const Tensor& a);
/// Standard normal CDF via erfc.
Tensor normal_cdf(const Tensor& a);

/// Softmax along `axis`. -inf entries become exactly 0; an all -inf slice
/// throws DegenerateInputError.
Tensor softmax(const Tensor& logits, std::size_t axis);
inline Tensor softmax(const Tensor& logits) { return softmax(logits, logits.rank() - 1); }

/// (population std / (mean + kCvEpsilon))^2 of a vector; returns a scalar.
Tensor coefficient_of_variation_sq(const Tensor& v);

// Shape and indexing.
Tensor reshape(const Tensor& a, Shape shape);
/// Rows `rows` of a[m x n] -> [rows.size() x n].
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows);
/// Copy of base[m x n] with src[r x n] added into rows `rows`.
Tensor index_add_rows(const Tensor& base, std::span<const std::size_t> rows, const Tensor& src);
/// a[rows[j], column] for each j -> [rows.size()].
Tensor take_column(const Tensor& a, std::span<const std::size_t> rows, std::size_t column);

}  // namespace moeids
