#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sclm/error.hpp"

namespace sclm {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-position boolean flags (loss masks). `uint8_t` so it can be viewed as a span.
using Mask = std::vector<std::uint8_t>;

Index shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool grad_enabled();

 private:
  bool previous_;
};

namespace detail {

template <typename Scalar>
struct Node {
  Shape shape;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads `grad` of this node and accumulates into the inputs that need it.
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return inputs.empty(); }
  Matrix<Scalar>& grad_buffer();
  template <typename Derived>
  void accumulate(const Eigen::MatrixBase<Derived>& g) {
    grad_buffer() += g;
  }
};

}  // namespace detail

/// Dense row-major tensor of rank 1 or 2 with an optional gradient.
///
/// Storage is a 2-D Eigen matrix: rank-1 shapes `{n}` are a single row and
/// the scalar shape is `{1}`. Copies share the underlying node (handle
/// semantics, like a graph variable); use `clone()` for an independent copy.
template <typename Scalar>
class BasicTensor {
 public:
  using MatrixType = Matrix<Scalar>;
  using NodeType = detail::Node<Scalar>;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, bool requires_grad = false);
  BasicTensor(Shape shape, MatrixType value, bool requires_grad = false);

  static BasicTensor scalar(Scalar v);
  static BasicTensor matrix(MatrixType value, bool requires_grad = false);
  static BasicTensor vector(std::span<const Scalar> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Index size() const { return node_->value.size(); }

  const MatrixType& value() const { return node_->value; }
  MatrixType& value() { return node_->value; }
  Scalar item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return node_->grad.size() != 0; }
  const MatrixType& grad() const;
  MatrixType& grad() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad.resize(0, 0); }

  /// Reverse-mode sweep from this scalar; leaves accumulate dThis/dLeaf.
  void backward() const;

  /// Independent leaf with a copy of the value and the same requires_grad.
  BasicTensor clone() const;
  /// Leaf sharing nothing with the graph; requires_grad is false.
  BasicTensor detach() const;

  template <typename Other>
  BasicTensor<Other> cast() const {
    return BasicTensor<Other>(shape(), value().template cast<Other>(), requires_grad());
  }

  const std::shared_ptr<NodeType>& node() const { return node_; }
  static BasicTensor from_node(std::shared_ptr<NodeType> node);

 private:
  std::shared_ptr<NodeType> node_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

// ---------------------------------------------------------------------------
// Primitives. Each records a graph node when any input requires grad and
// recording is enabled.

template <typename S>
BasicTensor<S> matmul(const BasicTensor<S>& a, const BasicTensor<S>& b);
template <typename S>
BasicTensor<S> add(const BasicTensor<S>& a, const BasicTensor<S>& b);
template <typename S>
BasicTensor<S> mul(const BasicTensor<S>& a, const BasicTensor<S>& b);
template <typename S>
BasicTensor<S> scale(const BasicTensor<S>& a, S factor);
template <typename S>
BasicTensor<S> sum(const BasicTensor<S>& a);
template <typename S>
BasicTensor<S> dot(const BasicTensor<S>& a, const BasicTensor<S>& b);

/// Softmax over the last axis (each row).
template <typename S>
BasicTensor<S> softmax(const BasicTensor<S>& a);

/// Row-wise RMS normalization `x / sqrt(mean(x^2) + eps) * gain`.
template <typename S>
BasicTensor<S> rms_norm(const BasicTensor<S>& x, const BasicTensor<S>& gain, double eps);

template <typename S>
BasicTensor<S> silu(const BasicTensor<S>& x);

/// Gathers rows of `table` (vocab x d) for each id.
template <typename S>
BasicTensor<S> embedding(const BasicTensor<S>& table, std::span<const int> ids);

/// Mean cross-entropy of `logits` rows against `targets` over rows whose mask
/// is set. Rows with a false mask contribute nothing.
template <typename S>
BasicTensor<S> masked_cross_entropy(const BasicTensor<S>& logits, std::span<const int> targets,
                                    std::span<const std::uint8_t> mask);

/// Rotary position encoding applied per head to consecutive column pairs.
template <typename S>
BasicTensor<S> rotary(const BasicTensor<S>& x, int n_heads, std::span<const int> positions,
                      double theta);

/// Multi-head causal self-attention over packed rows.
///
/// `q`, `k`, `v` are (total_rows x d_model); rows are split into independent
/// sequences of the given lengths. Each head attends only to earlier or equal
/// positions of its own sequence.
template <typename S>
BasicTensor<S> causal_attention(const BasicTensor<S>& q, const BasicTensor<S>& k,
                                const BasicTensor<S>& v, int n_heads,
                                std::span<const Index> segment_lengths);

template <typename S>
BasicTensor<S> operator+(const BasicTensor<S>& a, const BasicTensor<S>& b) {
  return add(a, b);
}
template <typename S>
BasicTensor<S> operator*(const BasicTensor<S>& a, const BasicTensor<S>& b) {
  return mul(a, b);
}
template <typename S>
BasicTensor<S> operator*(const BasicTensor<S>& a, S factor) {
  return scale(a, factor);
}

}  // namespace sclm
