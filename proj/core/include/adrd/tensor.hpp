#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace adrd {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

bool autograd_enabled();
void set_autograd_enabled(bool on);

// One value in the recorded computation graph. `parents` plus the reverse
// topological walk in Tensor::backward() form the tape: every recorded op is
// replayed exactly once, and fan-out sums contributions because each consumer
// accumulates into the shared parent node.
template <typename T>
struct Node {
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;  // empty until first needed
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;
  std::string name;

  std::int64_t numel() const { return static_cast<std::int64_t>(values.size()); }

  std::span<T> ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), T(0));
    return std::span<T>(grad);
  }
};

}  // namespace detail

template <typename T>
class Tensor;

namespace detail {

// Builds an op result, recording parents and the pull-style backward closure
// only while autograd is enabled and some input needs a gradient.
template <typename T>
Tensor<T> make_op(Shape shape, std::vector<T> values,
                  std::vector<std::shared_ptr<Node<T>>> parents,
                  std::function<void(Node<T>&)> backprop);

}  // namespace detail

// Disables graph recording for the current scope (inference, finite
// differences). Ops still compute values, they just do not register parents.
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::autograd_enabled()) { detail::set_autograd_enabled(false); }
  ~NoGradGuard() { detail::set_autograd_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Dense row-major N-d tensor participating in reverse-mode differentiation.
// Canonical image layout is N x C x H x W. Copies are shallow (shared node);
// values are treated as immutable once an op has produced them.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<detail::Node<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<T> values, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::int64_t numel() const { return node_->numel(); }
  std::int64_t dim(std::size_t axis) const { return node_->shape.at(axis); }

  std::span<const T> data() const { return std::span<const T>(node_->values); }
  // Leaf-side mutation: parameter init, optimizer updates, finite-difference
  // probing. Never mutate a tensor that other ops already consumed mid-graph.
  std::span<T> mutable_data() { return std::span<T>(node_->values); }

  T item() const;

  // 4-d accessors (N,C,H,W).
  T at4(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) const;
  void set4(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x, T v);

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  bool has_grad() const { return node_ && node_->grad.size() == node_->values.size(); }
  std::span<T> grad() { return node_->ensure_grad(); }
  std::span<const T> grad() const { return std::span<const T>(node_->grad); }
  void zero_grad();

  // Reverse-mode sweep from a scalar. Parameter gradients accumulate across
  // calls; intermediate nodes are reset at the start of each sweep.
  void backward() const;

  const std::shared_ptr<detail::Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node<T>> node_;
};

// Learnable tensor with a stable identity for checkpoints and optimizers.
template <typename T>
class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, Tensor<T> value) : name_(std::move(name)), value_(std::move(value)) {
    value_.set_requires_grad(true);
    value_.node()->name = name_;
  }

  const std::string& name() const { return name_; }
  bool defined() const { return value_.defined(); }
  Tensor<T>& tensor() { return value_; }
  const Tensor<T>& tensor() const { return value_; }
  const Shape& shape() const { return value_.shape(); }
  std::int64_t numel() const { return value_.numel(); }
  std::span<T> values() { return value_.mutable_data(); }
  std::span<const T> values() const { return value_.data(); }
  bool has_grad() const { return value_.has_grad(); }
  std::span<T> grad() { return value_.grad(); }
  void zero_grad() { value_.zero_grad(); }

 private:
  std::string name_;
  Tensor<T> value_;
};

// Elementwise and structural ops. All validate shapes and throw
// std::invalid_argument on mismatch.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> hadamard(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> abs_diff(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
// Multiply by a learnable one-element tensor.
template <typename T> Tensor<T> mul_scalar(const Tensor<T>& a, const Tensor<T>& factor);
template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> tanh(const Tensor<T>& x);
// Learnable leaky slope, one scalar per instance. Gradient at exactly 0 takes
// the positive branch.
template <typename T> Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& slope);
template <typename T> Tensor<T> concat_channels(std::span<const Tensor<T>> parts);
template <typename T> Tensor<T> slice_channels(const Tensor<T>& x, std::int64_t first, std::int64_t count);
template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target);

}  // namespace adrd
