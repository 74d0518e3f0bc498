#pragma once

// Dense 2-D tensors with reverse-mode differentiation.
//
// A Tensor is a cheap handle to a node of a dynamically recorded computation.
// Every op returns a fresh node; when any input requires a gradient (and
// recording is enabled) the node keeps its parents and a backward closure.
// Vectors are represented as 1×n rows, scalars as 1×1.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wmg {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Tensor;

namespace detail {
struct Node;
Tensor wrap(std::shared_ptr<Node> node);
const std::shared_ptr<Node>& node_of(const Tensor& t);
}  // namespace detail

class Tensor {
 public:
  Tensor();
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Tensor row(std::vector<double> values);
  static Tensor row(std::span<const double> values);
  static Tensor scalar(double value);
  /// Leaf that accumulates gradients.
  static Tensor parameter(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const;
  std::vector<std::size_t> shape() const { return {rows(), cols()}; }
  std::string shape_string() const;

  std::span<const double> values() const;
  /// Writable view of the values. Only meaningful on leaves (parameters, inputs).
  std::span<double> mutable_values();
  double operator()(std::size_t r, std::size_t c) const;
  double item() const;

  bool requires_grad() const;
  bool is_leaf() const;
  /// Empty span when the tensor does not track gradients.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Copy of the values with no recorded history.
  Tensor detach() const;
  std::uint64_t id() const;
  bool defined() const { return static_cast<bool>(node_); }

  /// Reverse pass from a 1×1 tensor. Leaf gradients accumulate across calls;
  /// intermediate gradients are recomputed each time.
  void backward() const;

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node);
  std::shared_ptr<detail::Node> node_;

  friend Tensor detail::wrap(std::shared_ptr<detail::Node> node);
  friend const std::shared_ptr<detail::Node>& detail::node_of(const Tensor& t);
};

/// Disables graph recording on this thread for its lifetime.
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

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

/// Same shapes, or `b` a 1×cols row broadcast over the rows of `a`.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);

Tensor softmax_rows(const Tensor& x);
Tensor log_softmax_rows(const Tensor& x);

inline constexpr double kLayerNormEpsilon = 1e-5;
/// Per-row normalization to zero mean, unit variance, then gain and bias
/// (both 1×cols).
Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias);

Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_rows(std::initializer_list<Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_row(const Tensor& x, std::size_t r);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);

/// Sum of all entries as a 1×1 tensor.
Tensor sum(const Tensor& x);
/// Single entry as a 1×1 tensor.
Tensor pick(const Tensor& x, std::size_t r, std::size_t c);

void backward(const Tensor& loss);

}  // namespace wmg
