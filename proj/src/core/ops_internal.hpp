#pragma once

#include "moeids/tensor.hpp"

namespace moeids::detail {

/// Gradient buffer of an operation input, or nullptr when it needs none.
inline double* grad_of(Node& input) { return input.requires_grad ? input.grad_buffer().data() : nullptr; }

}  // namespace moeids::detail
