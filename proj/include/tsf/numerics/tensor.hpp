#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsf::numerics {

using Shape = std::vector<std::size_t>;

/// Raised when operand shapes are incompatible with an operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an operation is used outside its contract (e.g. backward on a
/// non-scalar).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct Node;
}

/// Dense row-major float64 array with optional reverse-mode gradient tracking.
///
/// A Tensor is a shared handle: copies alias the same storage and graph node.
/// Results of differentiable operations keep a record of their inputs so that
/// `backward` can traverse the graph in reverse topological order.
class Tensor {
 public:
  /// Receives the output values and the accumulated output gradient; must add
  /// the corresponding contributions into the parents it captured.
  using BackwardFn =
      std::function<void(std::span<const double> out_values, std::span<const double> out_grad)>;

  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  /// Builds the result of a differentiable operation. When gradient recording
  /// is disabled, or no parent requires a gradient, the result is a constant.
  static Tensor from_op(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                        BackwardFn backward);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  /// Mutable access for initialisation and optimiser updates only.
  std::span<double> values_mut();
  double item() const;
  double operator[](std::size_t flat_index) const { return values()[flat_index]; }

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  /// Gradient buffer, allocated as zeros on first access.
  std::span<double> grad_mut() const;
  void accumulate_grad(std::span<const double> delta) const;
  void zero_grad();

  /// Same values, no graph history.
  Tensor detach() const;
  /// Deep copy of values (no graph history, no gradient requirement).
  Tensor clone() const;
  Tensor reshape(Shape shape) const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::Node> node_;

  friend void backward(const Tensor& loss);
};

/// Reverse-mode differentiation from a scalar loss. Gradients of leaf tensors
/// accumulate across calls; intermediate gradients are reset on every call.
void backward(const Tensor& loss);

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

}  // namespace tsf::numerics
