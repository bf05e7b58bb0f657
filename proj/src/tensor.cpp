#include "sclm/tensor.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace sclm {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool NoGradGuard::grad_enabled() { return g_grad_enabled; }

namespace detail {

template <typename Scalar>
Matrix<Scalar>& Node<Scalar>::grad_buffer() {
  if (grad.size() == 0) grad = Matrix<Scalar>::Zero(value.rows(), value.cols());
  return grad;
}

}  // namespace detail

namespace {

std::pair<Index, Index> matrix_dims(const Shape& shape) {
  if (shape.empty() || shape.size() > 2) {
    throw DimensionError("tensor", "rank must be 1 or 2, got shape " + shape_string(shape));
  }
  for (Index d : shape) {
    if (d <= 0) throw DimensionError("tensor", "non-positive extent in shape " + shape_string(shape));
  }
  return shape.size() == 1 ? std::pair<Index, Index>{1, shape[0]}
                           : std::pair<Index, Index>{shape[0], shape[1]};
}

template <typename S>
using NodePtr = std::shared_ptr<detail::Node<S>>;

// Builds the output node; wires inputs and backward only when recording.
template <typename S>
BasicTensor<S> make_result(Shape shape, Matrix<S> value,
                           std::initializer_list<const BasicTensor<S>*> inputs,
                           std::function<void(detail::Node<S>&)> backward_fn) {
  auto node = std::make_shared<detail::Node<S>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool track = false;
  if (NoGradGuard::grad_enabled()) {
    for (const auto* t : inputs) track = track || t->requires_grad();
  }
  if (track) {
    node->requires_grad = true;
    for (const auto* t : inputs) node->inputs.push_back(t->node());
    node->backward_fn = std::move(backward_fn);
  }
  return BasicTensor<S>::from_node(std::move(node));
}

template <typename S>
bool wants_grad(const NodePtr<S>& n) {
  return n->requires_grad;
}

template <typename S>
void require_defined(const BasicTensor<S>& t, const char* primitive) {
  if (!t.defined()) throw ContractError(std::string(primitive) + ": undefined tensor operand");
}

}  // namespace

// ---------------------------------------------------------------------------
// BasicTensor

template <typename Scalar>
BasicTensor<Scalar>::BasicTensor(Shape shape, bool requires_grad) {
  auto [r, c] = matrix_dims(shape);
  node_ = std::make_shared<NodeType>();
  node_->shape = std::move(shape);
  node_->value = MatrixType::Zero(r, c);
  node_->requires_grad = requires_grad;
}

template <typename Scalar>
BasicTensor<Scalar>::BasicTensor(Shape shape, MatrixType value, bool requires_grad) {
  auto [r, c] = matrix_dims(shape);
  if (value.rows() != r || value.cols() != c) {
    throw DimensionError("tensor", "value is " + std::to_string(value.rows()) + "x" +
                                       std::to_string(value.cols()) + " but shape is " +
                                       shape_string(shape));
  }
  node_ = std::make_shared<NodeType>();
  node_->shape = std::move(shape);
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

template <typename Scalar>
BasicTensor<Scalar> BasicTensor<Scalar>::scalar(Scalar v) {
  MatrixType m(1, 1);
  m(0, 0) = v;
  return BasicTensor({1}, std::move(m));
}

template <typename Scalar>
BasicTensor<Scalar> BasicTensor<Scalar>::matrix(MatrixType value, bool requires_grad) {
  Shape shape{value.rows(), value.cols()};
  return BasicTensor(std::move(shape), std::move(value), requires_grad);
}

template <typename Scalar>
BasicTensor<Scalar> BasicTensor<Scalar>::vector(std::span<const Scalar> values, bool requires_grad) {
  const auto n = static_cast<Index>(values.size());
  MatrixType m(1, n);
  for (Index i = 0; i < n; ++i) m(0, i) = values[static_cast<std::size_t>(i)];
  return BasicTensor({n}, std::move(m), requires_grad);
}

template <typename Scalar>
BasicTensor<Scalar> BasicTensor<Scalar>::from_node(std::shared_ptr<NodeType> node) {
  BasicTensor t;
  t.node_ = std::move(node);
  return t;
}

template <typename Scalar>
Scalar BasicTensor<Scalar>::item() const {
  if (size() != 1) throw ContractError("item: tensor of shape " + shape_string(shape()) + " is not a scalar");
  return node_->value(0, 0);
}

template <typename Scalar>
const typename BasicTensor<Scalar>::MatrixType& BasicTensor<Scalar>::grad() const {
  if (node_->grad.size() == 0) throw ContractError("grad: tensor has no gradient");
  return node_->grad;
}

template <typename Scalar>
BasicTensor<Scalar> BasicTensor<Scalar>::clone() const {
  return BasicTensor(shape(), value(), requires_grad());
}

template <typename Scalar>
BasicTensor<Scalar> BasicTensor<Scalar>::detach() const {
  return BasicTensor(shape(), value(), false);
}

template <typename Scalar>
void BasicTensor<Scalar>::backward() const {
  if (!defined()) throw ContractError("backward: undefined tensor");
  if (size() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " + shape_string(shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (inputs before users).
  std::vector<NodeType*> order;
  std::unordered_set<NodeType*> visited;
  std::vector<std::pair<NodeType*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      NodeType* child = n->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad_buffer().array() += Scalar(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeType* n = *it;
    if (n->is_leaf() || !n->backward_fn || n->grad.size() == 0) continue;
    n->backward_fn(*n);
    n->grad.resize(0, 0);  // intermediate gradients are not retained
  }
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template struct detail::Node<float>;
template struct detail::Node<double>;

// ---------------------------------------------------------------------------
// Primitives

namespace {

// GEMM picks micro-kernels (and GEMV for a single row) from the row count, so
// the same input row could round differently depending on how many rows sit
// below it. Running every product on fixed-size row chunks, with the tail
// zero-padded, makes each output row a function of its own input row only.
// Causal models rely on this: logits of a prefix equal the leading rows of
// the logits of any extension.
constexpr Index kRowChunk = 64;

template <typename S>
Matrix<S> row_stable_product(const Matrix<S>& a, const Matrix<S>& b) {
  Matrix<S> out(a.rows(), b.cols());
  const Index full = a.rows() - a.rows() % kRowChunk;
  for (Index r = 0; r < full; r += kRowChunk) {
    out.middleRows(r, kRowChunk).noalias() = a.middleRows(r, kRowChunk) * b;
  }
  if (const Index tail = a.rows() - full; tail > 0) {
    Matrix<S> padded = Matrix<S>::Zero(kRowChunk, a.cols());
    padded.topRows(tail) = a.bottomRows(tail);
    Matrix<S> res(kRowChunk, b.cols());
    res.noalias() = padded * b;
    out.bottomRows(tail) = res.topRows(tail);
  }
  return out;
}

}  // namespace

template <typename S>
BasicTensor<S> matmul(const BasicTensor<S>& a, const BasicTensor<S>& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.shape().size() != 2 || b.shape().size() != 2) {
    throw DimensionError("matmul", "operands must be rank 2, got " + shape_string(a.shape()) +
                                       " and " + shape_string(b.shape()));
  }
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul", "lhs axis 1 (" + std::to_string(a.cols()) +
                                       ") != rhs axis 0 (" + std::to_string(b.rows()) + ")");
  }
  Matrix<S> out = row_stable_product(a.value(), b.value());
  auto an = a.node();
  auto bn = b.node();
  return make_result<S>({a.rows(), b.cols()}, std::move(out), {&a, &b},
                        [an, bn](detail::Node<S>& self) {
                          if (wants_grad(an)) an->accumulate(self.grad * bn->value.transpose());
                          if (wants_grad(bn)) bn->accumulate(an->value.transpose() * self.grad);
                        });
}

namespace {
template <typename S>
void require_same_shape(const BasicTensor<S>& a, const BasicTensor<S>& b, const char* primitive) {
  require_defined(a, primitive);
  require_defined(b, primitive);
  if (a.shape() != b.shape()) {
    throw DimensionError(primitive, "shape " + shape_string(a.shape()) + " vs " +
                                        shape_string(b.shape()));
  }
}
}  // namespace

template <typename S>
BasicTensor<S> add(const BasicTensor<S>& a, const BasicTensor<S>& b) {
  require_same_shape(a, b, "add");
  Matrix<S> out = a.value() + b.value();
  auto an = a.node();
  auto bn = b.node();
  return make_result<S>(a.shape(), std::move(out), {&a, &b}, [an, bn](detail::Node<S>& self) {
    if (wants_grad(an)) an->accumulate(self.grad);
    if (wants_grad(bn)) bn->accumulate(self.grad);
  });
}

template <typename S>
BasicTensor<S> mul(const BasicTensor<S>& a, const BasicTensor<S>& b) {
  require_same_shape(a, b, "mul");
  Matrix<S> out = a.value().cwiseProduct(b.value());
  auto an = a.node();
  auto bn = b.node();
  return make_result<S>(a.shape(), std::move(out), {&a, &b}, [an, bn](detail::Node<S>& self) {
    if (wants_grad(an)) an->accumulate(self.grad.cwiseProduct(bn->value));
    if (wants_grad(bn)) bn->accumulate(self.grad.cwiseProduct(an->value));
  });
}

template <typename S>
BasicTensor<S> scale(const BasicTensor<S>& a, S factor) {
  require_defined(a, "scale");
  Matrix<S> out = a.value() * factor;
  auto an = a.node();
  return make_result<S>(a.shape(), std::move(out), {&a}, [an, factor](detail::Node<S>& self) {
    an->accumulate(self.grad * factor);
  });
}

template <typename S>
BasicTensor<S> sum(const BasicTensor<S>& a) {
  require_defined(a, "sum");
  double total = 0.0;
  const auto& v = a.value();
  for (Index i = 0; i < v.size(); ++i) total += static_cast<double>(v.data()[i]);
  Matrix<S> out(1, 1);
  out(0, 0) = static_cast<S>(total);
  auto an = a.node();
  return make_result<S>({1}, std::move(out), {&a}, [an](detail::Node<S>& self) {
    an->grad_buffer().array() += self.grad(0, 0);
  });
}

template <typename S>
BasicTensor<S> dot(const BasicTensor<S>& a, const BasicTensor<S>& b) {
  return sum(mul(a, b));
}

template <typename S>
BasicTensor<S> softmax(const BasicTensor<S>& a) {
  require_defined(a, "softmax");
  const auto& x = a.value();
  Matrix<S> y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const S m = x.row(r).maxCoeff();
    double denom = 0.0;
    for (Index c = 0; c < x.cols(); ++c) {
      const double e = std::exp(static_cast<double>(x(r, c) - m));
      y(r, c) = static_cast<S>(e);
      denom += e;
    }
    for (Index c = 0; c < x.cols(); ++c) y(r, c) = static_cast<S>(y(r, c) / denom);
  }
  auto an = a.node();
  Matrix<S> saved = y;
  return make_result<S>(a.shape(), std::move(y), {&a},
                        [an, saved = std::move(saved)](detail::Node<S>& self) {
                          Matrix<S> g(saved.rows(), saved.cols());
                          for (Index r = 0; r < saved.rows(); ++r) {
                            const S inner = saved.row(r).dot(self.grad.row(r));
                            g.row(r) = saved.row(r).cwiseProduct(
                                (self.grad.row(r).array() - inner).matrix());
                          }
                          an->accumulate(g);
                        });
}

template <typename S>
BasicTensor<S> rms_norm(const BasicTensor<S>& x, const BasicTensor<S>& gain, double eps) {
  require_defined(x, "rms_norm");
  require_defined(gain, "rms_norm");
  if (gain.shape().size() != 1 || gain.cols() != x.cols()) {
    throw DimensionError("rms_norm", "gain shape " + shape_string(gain.shape()) +
                                         " does not match input axis 1 of " +
                                         shape_string(x.shape()));
  }
  const auto& xv = x.value();
  const Index n = xv.cols();
  Eigen::Matrix<S, Eigen::Dynamic, 1> inv_rms(xv.rows());
  Matrix<S> y(xv.rows(), n);
  for (Index r = 0; r < xv.rows(); ++r) {
    double ss = 0.0;
    for (Index c = 0; c < n; ++c) ss += static_cast<double>(xv(r, c)) * xv(r, c);
    inv_rms(r) = static_cast<S>(1.0 / std::sqrt(ss / static_cast<double>(n) + eps));
    y.row(r) = xv.row(r).cwiseProduct(gain.value().row(0)) * inv_rms(r);
  }
  auto xn = x.node();
  auto gn = gain.node();
  return make_result<S>(x.shape(), std::move(y), {&x, &gain},
                        [xn, gn, inv_rms, n](detail::Node<S>& self) {
                          const auto& xv = xn->value;
                          const auto g = gn->value.row(0);
                          if (wants_grad(xn)) {
                            Matrix<S> dx(xv.rows(), n);
                            for (Index r = 0; r < xv.rows(); ++r) {
                              const auto dyg = self.grad.row(r).cwiseProduct(g);
                              const S proj = dyg.dot(xv.row(r));
                              const S ir = inv_rms(r);
                              dx.row(r) = dyg * ir - xv.row(r) * (proj * ir * ir * ir / S(n));
                            }
                            xn->accumulate(dx);
                          }
                          if (wants_grad(gn)) {
                            Matrix<S> dg = Matrix<S>::Zero(1, n);
                            for (Index r = 0; r < xv.rows(); ++r) {
                              dg.row(0) += self.grad.row(r).cwiseProduct(xv.row(r)) * inv_rms(r);
                            }
                            gn->accumulate(dg);
                          }
                        });
}

template <typename S>
BasicTensor<S> silu(const BasicTensor<S>& x) {
  require_defined(x, "silu");
  const auto& xv = x.value();
  Matrix<S> sig = (S(1) + (-xv.array()).exp()).inverse().matrix();
  Matrix<S> y = xv.cwiseProduct(sig);
  auto xn = x.node();
  return make_result<S>(x.shape(), std::move(y), {&x},
                        [xn, sig = std::move(sig)](detail::Node<S>& self) {
                          // d/dx x*s(x) = s + x*s*(1-s)
                          auto s = sig.array();
                          auto d = s + xn->value.array() * s * (S(1) - s);
                          xn->accumulate((self.grad.array() * d).matrix());
                        });
}

template <typename S>
BasicTensor<S> embedding(const BasicTensor<S>& table, std::span<const int> ids) {
  require_defined(table, "embedding");
  if (table.shape().size() != 2) {
    throw DimensionError("embedding", "table must be rank 2, got " + shape_string(table.shape()));
  }
  if (ids.empty()) throw DimensionError("embedding", "empty id sequence");
  const Index vocab = table.rows();
  Matrix<S> out(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] < 0 || ids[t] >= vocab) {
      throw InputError("embedding: id " + std::to_string(ids[t]) + " at position " +
                       std::to_string(t) + " outside vocabulary of " + std::to_string(vocab));
    }
    out.row(static_cast<Index>(t)) = table.value().row(ids[t]);
  }
  auto tn = table.node();
  std::vector<int> saved(ids.begin(), ids.end());
  return make_result<S>({static_cast<Index>(ids.size()), table.cols()}, std::move(out), {&table},
                        [tn, saved = std::move(saved)](detail::Node<S>& self) {
                          auto& g = tn->grad_buffer();
                          for (std::size_t t = 0; t < saved.size(); ++t) {
                            g.row(saved[t]) += self.grad.row(static_cast<Index>(t));
                          }
                        });
}

template <typename S>
BasicTensor<S> masked_cross_entropy(const BasicTensor<S>& logits, std::span<const int> targets,
                                    std::span<const std::uint8_t> mask) {
  require_defined(logits, "masked_cross_entropy");
  const auto& z = logits.value();
  const Index rows = z.rows();
  if (logits.shape().size() != 2) {
    throw DimensionError("masked_cross_entropy",
                         "logits must be rank 2, got " + shape_string(logits.shape()));
  }
  if (static_cast<Index>(targets.size()) != rows || static_cast<Index>(mask.size()) != rows) {
    throw DimensionError("masked_cross_entropy",
                         "axis 0 of logits (" + std::to_string(rows) + ") vs targets (" +
                             std::to_string(targets.size()) + ") and mask (" +
                             std::to_string(mask.size()) + ")");
  }
  Index count = 0;
  for (auto m : mask) count += m ? 1 : 0;
  if (count == 0) throw DataError("masked_cross_entropy: degenerate batch, every position is masked out");

  Matrix<S> probs = Matrix<S>::Zero(rows, z.cols());
  double total = 0.0;
  for (Index r = 0; r < rows; ++r) {
    if (!mask[static_cast<std::size_t>(r)]) continue;
    const int tgt = targets[static_cast<std::size_t>(r)];
    if (tgt < 0 || tgt >= z.cols()) {
      throw InputError("masked_cross_entropy: target " + std::to_string(tgt) + " at row " +
                       std::to_string(r) + " outside vocabulary of " + std::to_string(z.cols()));
    }
    const double m = static_cast<double>(z.row(r).maxCoeff());
    double denom = 0.0;
    for (Index c = 0; c < z.cols(); ++c) denom += std::exp(static_cast<double>(z(r, c)) - m);
    const double log_denom = std::log(denom) + m;
    total += log_denom - static_cast<double>(z(r, tgt));
    for (Index c = 0; c < z.cols(); ++c) {
      probs(r, c) = static_cast<S>(std::exp(static_cast<double>(z(r, c)) - log_denom));
    }
  }
  Matrix<S> out(1, 1);
  out(0, 0) = static_cast<S>(total / static_cast<double>(count));
  auto ln = logits.node();
  std::vector<int> tg(targets.begin(), targets.end());
  Mask mk(mask.begin(), mask.end());
  return make_result<S>(
      {1}, std::move(out), {&logits},
      [ln, probs = std::move(probs), tg = std::move(tg), mk = std::move(mk), count](
          detail::Node<S>& self) {
        const S coef = self.grad(0, 0) / static_cast<S>(count);
        Matrix<S> g = probs * coef;
        for (std::size_t r = 0; r < tg.size(); ++r) {
          if (mk[r]) g(static_cast<Index>(r), tg[r]) -= coef;
        }
        ln->accumulate(g);
      });
}

namespace {

template <typename S>
void check_heads(const char* primitive, Index d_model, int n_heads) {
  if (n_heads <= 0 || d_model % n_heads != 0) {
    throw DimensionError(primitive, "axis 1 (" + std::to_string(d_model) +
                                        ") not divisible by head count " + std::to_string(n_heads));
  }
}

// Rotates column pairs of each head in place; `sign` = -1 applies the inverse.
template <typename S>
void apply_rotation(Matrix<S>& m, int n_heads, std::span<const int> positions, double theta,
                    double sign) {
  const Index head_dim = m.cols() / n_heads;
  const Index half = head_dim / 2;
  for (Index r = 0; r < m.rows(); ++r) {
    const double pos = positions[static_cast<std::size_t>(r)];
    for (Index i = 0; i < half; ++i) {
      const double freq = std::pow(theta, -2.0 * static_cast<double>(i) / static_cast<double>(head_dim));
      const double angle = pos * freq;
      const S c = static_cast<S>(std::cos(angle));
      const S s = static_cast<S>(sign * std::sin(angle));
      for (int h = 0; h < n_heads; ++h) {
        const Index c0 = h * head_dim + 2 * i;
        const S x0 = m(r, c0);
        const S x1 = m(r, c0 + 1);
        m(r, c0) = x0 * c - x1 * s;
        m(r, c0 + 1) = x0 * s + x1 * c;
      }
    }
  }
}

}  // namespace

template <typename S>
BasicTensor<S> rotary(const BasicTensor<S>& x, int n_heads, std::span<const int> positions,
                      double theta) {
  require_defined(x, "rotary");
  check_heads<S>("rotary", x.cols(), n_heads);
  if ((x.cols() / n_heads) % 2 != 0) {
    throw DimensionError("rotary", "head dimension " + std::to_string(x.cols() / n_heads) + " is odd");
  }
  if (static_cast<Index>(positions.size()) != x.rows()) {
    throw DimensionError("rotary", "axis 0 (" + std::to_string(x.rows()) + ") vs " +
                                       std::to_string(positions.size()) + " positions");
  }
  Matrix<S> y = x.value();
  apply_rotation(y, n_heads, positions, theta, 1.0);
  auto xn = x.node();
  std::vector<int> pos(positions.begin(), positions.end());
  return make_result<S>(x.shape(), std::move(y), {&x},
                        [xn, n_heads, pos = std::move(pos), theta](detail::Node<S>& self) {
                          Matrix<S> g = self.grad;
                          apply_rotation(g, n_heads, std::span<const int>(pos), theta, -1.0);
                          xn->accumulate(g);
                        });
}

template <typename S>
BasicTensor<S> causal_attention(const BasicTensor<S>& q, const BasicTensor<S>& k,
                                const BasicTensor<S>& v, int n_heads,
                                std::span<const Index> segment_lengths) {
  require_same_shape(q, k, "causal_attention");
  require_same_shape(q, v, "causal_attention");
  check_heads<S>("causal_attention", q.cols(), n_heads);
  Index total = 0;
  for (Index len : segment_lengths) {
    if (len <= 0) throw DimensionError("causal_attention", "empty segment");
    total += len;
  }
  if (total != q.rows()) {
    throw DimensionError("causal_attention", "segments cover " + std::to_string(total) +
                                                 " rows but axis 0 is " + std::to_string(q.rows()));
  }
  const Index head_dim = q.cols() / n_heads;
  const S scale_factor = static_cast<S>(1.0 / std::sqrt(static_cast<double>(head_dim)));
  const auto& qv = q.value();
  const auto& kv = k.value();
  const auto& vv = v.value();

  // Attention weights per (segment, head), lower triangular.
  auto probs = std::make_shared<std::vector<Matrix<S>>>();
  probs->reserve(segment_lengths.size() * static_cast<std::size_t>(n_heads));
  Matrix<S> out(q.rows(), q.cols());
  Index offset = 0;
  for (Index len : segment_lengths) {
    for (int h = 0; h < n_heads; ++h) {
      const Index col = h * head_dim;
      // Work on zero-padded kRowChunk x kRowChunk tiles so every entry goes
      // through the same GEMM path whatever the segment length, keeping a
      // query's output independent of later rows.
      const Index tiles = (len + kRowChunk - 1) / kRowChunk;
      const Index padded = tiles * kRowChunk;
      Matrix<S> qp = Matrix<S>::Zero(padded, head_dim);
      Matrix<S> kp = Matrix<S>::Zero(padded, head_dim);
      Matrix<S> vp = Matrix<S>::Zero(padded, head_dim);
      qp.topRows(len) = qv.block(offset, col, len, head_dim);
      kp.topRows(len) = kv.block(offset, col, len, head_dim);
      vp.topRows(len) = vv.block(offset, col, len, head_dim);
      Matrix<S> scores = Matrix<S>::Zero(padded, padded);
      for (Index r = 0; r < tiles; ++r) {
        for (Index c = 0; c <= r; ++c) {
          scores.block(r * kRowChunk, c * kRowChunk, kRowChunk, kRowChunk).noalias() =
              qp.middleRows(r * kRowChunk, kRowChunk) * kp.middleRows(c * kRowChunk, kRowChunk).transpose();
        }
      }
      for (Index i = 0; i < len; ++i) {
        S m = -std::numeric_limits<S>::infinity();
        for (Index j = 0; j <= i; ++j) {
          scores(i, j) *= scale_factor;
          m = std::max(m, scores(i, j));
        }
        double denom = 0.0;
        for (Index j = 0; j <= i; ++j) {
          const double e = std::exp(static_cast<double>(scores(i, j) - m));
          scores(i, j) = static_cast<S>(e);
          denom += e;
        }
        for (Index j = 0; j <= i; ++j) scores(i, j) = static_cast<S>(scores(i, j) / denom);
        for (Index j = i + 1; j < padded; ++j) scores(i, j) = S(0);
      }
      scores.bottomRows(padded - len).setZero();
      Matrix<S> acc(kRowChunk, head_dim);
      for (Index r = 0; r < tiles; ++r) {
        acc.setZero();
        for (Index c = 0; c <= r; ++c) {
          acc.noalias() += scores.block(r * kRowChunk, c * kRowChunk, kRowChunk, kRowChunk) *
                           vp.middleRows(c * kRowChunk, kRowChunk);
        }
        const Index rows = std::min(kRowChunk, len - r * kRowChunk);
        out.block(offset + r * kRowChunk, col, rows, head_dim) = acc.topRows(rows);
      }
      scores.conservativeResize(len, len);
      probs->push_back(std::move(scores));
    }
    offset += len;
  }

  auto qn = q.node();
  auto kn = k.node();
  auto vn = v.node();
  std::vector<Index> segs(segment_lengths.begin(), segment_lengths.end());
  return make_result<S>(
      q.shape(), std::move(out), {&q, &k, &v},
      [qn, kn, vn, probs, segs = std::move(segs), n_heads, head_dim,
       scale_factor](detail::Node<S>& self) {
        const bool gq = wants_grad(qn), gk = wants_grad(kn), gv = wants_grad(vn);
        Matrix<S> dq, dk, dv;
        if (gq) dq = Matrix<S>::Zero(qn->value.rows(), qn->value.cols());
        if (gk) dk = Matrix<S>::Zero(kn->value.rows(), kn->value.cols());
        if (gv) dv = Matrix<S>::Zero(vn->value.rows(), vn->value.cols());
        Index offset = 0;
        std::size_t idx = 0;
        for (Index len : segs) {
          for (int h = 0; h < n_heads; ++h, ++idx) {
            const Index col = h * head_dim;
            const Matrix<S>& p = (*probs)[idx];
            const auto d_out = self.grad.block(offset, col, len, head_dim);
            if (gv) dv.block(offset, col, len, head_dim).noalias() += p.transpose() * d_out;
            if (!gq && !gk) continue;
            Matrix<S> dp = d_out * vn->value.block(offset, col, len, head_dim).transpose();
            for (Index i = 0; i < len; ++i) {
              S inner = 0;
              for (Index j = 0; j <= i; ++j) inner += p(i, j) * dp(i, j);
              for (Index j = 0; j <= i; ++j) dp(i, j) = p(i, j) * (dp(i, j) - inner) * scale_factor;
              for (Index j = i + 1; j < len; ++j) dp(i, j) = S(0);
            }
            if (gq) {
              dq.block(offset, col, len, head_dim).noalias() +=
                  dp * kn->value.block(offset, col, len, head_dim);
            }
            if (gk) {
              dk.block(offset, col, len, head_dim).noalias() +=
                  dp.transpose() * qn->value.block(offset, col, len, head_dim);
            }
          }
          offset += len;
        }
        if (gq) qn->accumulate(dq);
        if (gk) kn->accumulate(dk);
        if (gv) vn->accumulate(dv);
      });
}

#define SCLM_INSTANTIATE_PRIMITIVES(S)                                                        \
  template BasicTensor<S> matmul(const BasicTensor<S>&, const BasicTensor<S>&);               \
  template BasicTensor<S> add(const BasicTensor<S>&, const BasicTensor<S>&);                  \
  template BasicTensor<S> mul(const BasicTensor<S>&, const BasicTensor<S>&);                  \
  template BasicTensor<S> scale(const BasicTensor<S>&, S);                                    \
  template BasicTensor<S> sum(const BasicTensor<S>&);                                         \
  template BasicTensor<S> dot(const BasicTensor<S>&, const BasicTensor<S>&);                  \
  template BasicTensor<S> softmax(const BasicTensor<S>&);                                     \
  template BasicTensor<S> rms_norm(const BasicTensor<S>&, const BasicTensor<S>&, double);     \
  template BasicTensor<S> silu(const BasicTensor<S>&);                                        \
  template BasicTensor<S> embedding(const BasicTensor<S>&, std::span<const int>);             \
  template BasicTensor<S> masked_cross_entropy(const BasicTensor<S>&, std::span<const int>,   \
                                               std::span<const std::uint8_t>);                \
  template BasicTensor<S> rotary(const BasicTensor<S>&, int, std::span<const int>, double);   \
  template BasicTensor<S> causal_attention(const BasicTensor<S>&, const BasicTensor<S>&,      \
                                           const BasicTensor<S>&, int, std::span<const Index>);

SCLM_INSTANTIATE_PRIMITIVES(float)
SCLM_INSTANTIATE_PRIMITIVES(double)

#undef SCLM_INSTANTIATE_PRIMITIVES

}  // namespace sclm
