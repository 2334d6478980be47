#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace moeids {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

// One vertex of the reverse-mode tape. Results of differentiable operations
// keep their inputs alive through `parents` until the result is released.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty means "no gradient yet"
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_recording_enabled();

/// Dense row-major array of doubles with optional gradient tracking.
///
/// Tensor is a handle: copies share storage and graph position. Use clone()
/// for an independent copy. Results of operations on tensors that require
/// gradients record how to propagate gradients back to their inputs, and
/// backward() on a scalar result fills grad() of every reachable tensor that
/// requires gradients.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Writable view of the values. Mutating a tensor that already feeds a
  /// recorded graph invalidates that graph's gradients.
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  /// Drops the gradient buffer (has_grad() becomes false).
  void clear_grad();

  /// Reverse pass from this scalar, seeding d(this)/d(this) = 1.
  void backward() const;

  /// Same values, cut from the graph.
  Tensor detach() const;
  /// Independent copy of the values, cut from the graph.
  Tensor clone() const;

  /// Identity comparison of the underlying storage.
  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  // Used by operation implementations.
  static Tensor from_op(Shape shape, std::vector<double> value, const char* op,
                        std::vector<Tensor> inputs,
                        std::function<void(detail::Node&)> backward);
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  detail::Node& checked() const;

  std::shared_ptr<detail::Node> node_;
};

}  // namespace moeids
