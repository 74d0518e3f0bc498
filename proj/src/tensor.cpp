#include "wmg/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace wmg {

namespace detail {

// Aligned so Eigen's vectorized reductions peel the same way on every
// allocation; with malloc's 16-byte alignment sums could differ in the last bit.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

struct Node {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Buffer value;
  Buffer grad;
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  std::uint64_t id = 0;

  std::size_t size() const { return rows * cols; }
};

Tensor wrap(std::shared_ptr<Node> node) { return Tensor(std::move(node)); }
const std::shared_ptr<Node>& node_of(const Tensor& t) {
  if (!t.node_) throw std::logic_error("use of an undefined Tensor");
  return t.node_;
}

}  // namespace detail

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

std::atomic<std::uint64_t> g_next_id{1};
thread_local bool g_recording = true;

NodePtr make_node(std::size_t rows, std::size_t cols) {
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->value.assign(rows * cols, 0.0);
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return n;
}

// Hooks `out` into the recorded graph when any parent tracks gradients.
void attach(Node& out, std::vector<NodePtr> parents, std::function<void(Node&)> fn) {
  if (!g_recording) return;
  const bool any = std::any_of(parents.begin(), parents.end(),
                               [](const NodePtr& p) { return p->requires_grad; });
  if (!any) return;
  out.requires_grad = true;
  out.leaf = false;
  out.parents = std::move(parents);
  out.backward_fn = std::move(fn);
  out.grad.assign(out.size(), 0.0);
}

const NodePtr& N(const Tensor& t) { return detail::node_of(t); }

ConstMatMap cmap(const Node& n) { return ConstMatMap(n.value.data(), n.rows, n.cols); }
MatMap gmap(Node& n) { return MatMap(n.grad.data(), n.rows, n.cols); }
ConstMatMap cgmap(const Node& n) { return ConstMatMap(n.grad.data(), n.rows, n.cols); }

std::string shape_of(const Node& n) {
  std::ostringstream s;
  s << '[' << n.rows << 'x' << n.cols << ']';
  return s.str();
}

[[noreturn]] void dim_error(const char* op, const Node& a, const Node& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_of(a) + " and " +
                       shape_of(b));
}

template <typename F>
Tensor unary_map(const Tensor& x, F f, std::function<void(Node&)> back) {
  const NodePtr& in = N(x);
  auto out = make_node(in->rows, in->cols);
  for (std::size_t i = 0; i < in->size(); ++i) out->value[i] = f(in->value[i]);
  attach(*out, {in}, std::move(back));
  return detail::wrap(out);
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor handle

Tensor::Tensor() = default;

Tensor::Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill) : node_(make_node(rows, cols)) {
  std::fill(node_->value.begin(), node_->value.end(), fill);
}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : node_(make_node(rows, cols)) {
  if (values.size() != rows * cols) {
    throw DimensionError("Tensor: " + std::to_string(values.size()) +
                         " values do not fill shape [" + std::to_string(rows) + "x" +
                         std::to_string(cols) + "]");
  }
  node_->value.assign(values.begin(), values.end());
}

Tensor Tensor::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(1, n, std::move(values));
}

Tensor Tensor::row(std::span<const double> values) {
  return row(std::vector<double>(values.begin(), values.end()));
}

Tensor Tensor::scalar(double value) { return Tensor(1, 1, value); }

Tensor Tensor::parameter(std::size_t rows, std::size_t cols, std::vector<double> values) {
  Tensor t(rows, cols, std::move(values));
  t.node_->requires_grad = true;
  t.node_->grad.assign(t.node_->size(), 0.0);
  return t;
}

std::size_t Tensor::rows() const { return N(*this)->rows; }
std::size_t Tensor::cols() const { return N(*this)->cols; }
std::size_t Tensor::size() const { return N(*this)->size(); }
std::string Tensor::shape_string() const { return shape_of(*N(*this)); }

std::span<const double> Tensor::values() const { return N(*this)->value; }
std::span<double> Tensor::mutable_values() { return N(*this)->value; }

double Tensor::operator()(std::size_t r, std::size_t c) const {
  const Node& n = *N(*this);
  if (r >= n.rows || c >= n.cols) {
    throw std::out_of_range("Tensor index (" + std::to_string(r) + "," + std::to_string(c) +
                            ") outside " + shape_of(n));
  }
  return n.value[r * n.cols + c];
}

double Tensor::item() const {
  const Node& n = *N(*this);
  if (n.size() != 1) throw DimensionError("item: tensor " + shape_of(n) + " is not a scalar");
  return n.value[0];
}

bool Tensor::requires_grad() const { return N(*this)->requires_grad; }
bool Tensor::is_leaf() const { return N(*this)->leaf; }

std::span<const double> Tensor::grad() const { return N(*this)->grad; }
std::span<double> Tensor::mutable_grad() { return N(*this)->grad; }

void Tensor::zero_grad() {
  auto& g = N(*this)->grad;
  std::fill(g.begin(), g.end(), 0.0);
}

Tensor Tensor::detach() const {
  const Node& n = *N(*this);
  Tensor t(n.rows, n.cols);
  N(t)->value = n.value;
  return t;
}

std::uint64_t Tensor::id() const { return N(*this)->id; }

void Tensor::backward() const { wmg::backward(*this); }

NoGradGuard::NoGradGuard() : previous_(g_recording) { g_recording = false; }
NoGradGuard::~NoGradGuard() { g_recording = previous_; }

bool grad_recording_enabled() { return g_recording; }

// ---------------------------------------------------------------------------
// Ops

Tensor matmul(const Tensor& a, const Tensor& b) {
  const NodePtr& A = N(a);
  const NodePtr& B = N(b);
  if (A->cols != B->rows) dim_error("matmul", *A, *B);
  auto out = make_node(A->rows, B->cols);
  MatMap(out->value.data(), out->rows, out->cols).noalias() = cmap(*A) * cmap(*B);
  attach(*out, {A, B}, [](Node& self) {
    Node& a = *self.parents[0];
    Node& b = *self.parents[1];
    if (a.requires_grad) gmap(a).noalias() += cgmap(self) * cmap(b).transpose();
    if (b.requires_grad) gmap(b).noalias() += cmap(a).transpose() * cgmap(self);
  });
  return detail::wrap(out);
}

Tensor transpose(const Tensor& x) {
  const NodePtr& X = N(x);
  auto out = make_node(X->cols, X->rows);
  MatMap(out->value.data(), out->rows, out->cols) = cmap(*X).transpose();
  attach(*out, {X}, [](Node& self) {
    Node& x = *self.parents[0];
    gmap(x) += cgmap(self).transpose();
  });
  return detail::wrap(out);
}

Tensor add(const Tensor& a, const Tensor& b) {
  const NodePtr& A = N(a);
  const NodePtr& B = N(b);
  const bool same = A->rows == B->rows && A->cols == B->cols;
  const bool row_bias = B->rows == 1 && B->cols == A->cols;
  if (!same && !row_bias) dim_error("add", *A, *B);
  auto out = make_node(A->rows, A->cols);
  const std::size_t cols = A->cols;
  for (std::size_t i = 0; i < out->size(); ++i) {
    out->value[i] = A->value[i] + B->value[same ? i : i % cols];
  }
  attach(*out, {A, B}, [same, cols](Node& self) {
    Node& a = *self.parents[0];
    Node& b = *self.parents[1];
    if (a.requires_grad) {
      for (std::size_t i = 0; i < self.size(); ++i) a.grad[i] += self.grad[i];
    }
    if (b.requires_grad) {
      for (std::size_t i = 0; i < self.size(); ++i) b.grad[same ? i : i % cols] += self.grad[i];
    }
  });
  return detail::wrap(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const NodePtr& A = N(a);
  const NodePtr& B = N(b);
  if (A->rows != B->rows || A->cols != B->cols) dim_error("sub", *A, *B);
  auto out = make_node(A->rows, A->cols);
  for (std::size_t i = 0; i < out->size(); ++i) out->value[i] = A->value[i] - B->value[i];
  attach(*out, {A, B}, [](Node& self) {
    Node& a = *self.parents[0];
    Node& b = *self.parents[1];
    for (std::size_t i = 0; i < self.size(); ++i) {
      if (a.requires_grad) a.grad[i] += self.grad[i];
      if (b.requires_grad) b.grad[i] -= self.grad[i];
    }
  });
  return detail::wrap(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const NodePtr& A = N(a);
  const NodePtr& B = N(b);
  if (A->rows != B->rows || A->cols != B->cols) dim_error("mul", *A, *B);
  auto out = make_node(A->rows, A->cols);
  for (std::size_t i = 0; i < out->size(); ++i) out->value[i] = A->value[i] * B->value[i];
  attach(*out, {A, B}, [](Node& self) {
    Node& a = *self.parents[0];
    Node& b = *self.parents[1];
    for (std::size_t i = 0; i < self.size(); ++i) {
      if (a.requires_grad) a.grad[i] += self.grad[i] * b.value[i];
      if (b.requires_grad) b.grad[i] += self.grad[i] * a.value[i];
    }
  });
  return detail::wrap(out);
}

Tensor scale(const Tensor& x, double factor) {
  return unary_map(x, [factor](double v) { return v * factor; }, [factor](Node& self) {
    Node& x = *self.parents[0];
    for (std::size_t i = 0; i < self.size(); ++i) x.grad[i] += factor * self.grad[i];
  });
}

Tensor relu(const Tensor& x) {
  // Subgradient at exactly zero is taken as zero.
  return unary_map(x, [](double v) { return v > 0.0 ? v : 0.0; }, [](Node& self) {
    Node& x = *self.parents[0];
    for (std::size_t i = 0; i < self.size(); ++i) {
      if (x.value[i] > 0.0) x.grad[i] += self.grad[i];
    }
  });
}

Tensor tanh(const Tensor& x) {
  return unary_map(x, [](double v) { return std::tanh(v); }, [](Node& self) {
    Node& x = *self.parents[0];
    for (std::size_t i = 0; i < self.size(); ++i) {
      const double y = self.value[i];
      x.grad[i] += self.grad[i] * (1.0 - y * y);
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  auto f = [](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  };
  return unary_map(x, f, [](Node& self) {
    Node& x = *self.parents[0];
    for (std::size_t i = 0; i < self.size(); ++i) {
      const double y = self.value[i];
      x.grad[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

namespace {

void require_finite(const Node& x, const char* op) {
  for (double v : x.value) {
    if (!std::isfinite(v)) throw std::domain_error(std::string(op) + ": non-finite input");
  }
}

}  // namespace

Tensor softmax_rows(const Tensor& x) {
  const NodePtr& X = N(x);
  require_finite(*X, "softmax_rows");
  auto out = make_node(X->rows, X->cols);
  const std::size_t n = X->cols;
  for (std::size_t r = 0; r < X->rows; ++r) {
    const double* in = X->value.data() + r * n;
    double* o = out->value.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) total += (o[c] = std::exp(in[c] - mx));
    for (std::size_t c = 0; c < n; ++c) o[c] /= total;
  }
  attach(*out, {X}, [n](Node& self) {
    Node& x = *self.parents[0];
    for (std::size_t r = 0; r < self.rows; ++r) {
      const double* y = self.value.data() + r * n;
      const double* g = self.grad.data() + r * n;
      double dot = 0.0;
      for (std::size_t c = 0; c < n; ++c) dot += g[c] * y[c];
      for (std::size_t c = 0; c < n; ++c) x.grad[r * n + c] += y[c] * (g[c] - dot);
    }
  });
  return detail::wrap(out);
}

Tensor log_softmax_rows(const Tensor& x) {
  const NodePtr& X = N(x);
  require_finite(*X, "log_softmax_rows");
  auto out = make_node(X->rows, X->cols);
  const std::size_t n = X->cols;
  for (std::size_t r = 0; r < X->rows; ++r) {
    const double* in = X->value.data() + r * n;
    double* o = out->value.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) total += std::exp(in[c] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t c = 0; c < n; ++c) o[c] = in[c] - lse;
  }
  attach(*out, {X}, [n](Node& self) {
    Node& x = *self.parents[0];
    for (std::size_t r = 0; r < self.rows; ++r) {
      const double* y = self.value.data() + r * n;
      const double* g = self.grad.data() + r * n;
      double gsum = 0.0;
      for (std::size_t c = 0; c < n; ++c) gsum += g[c];
      for (std::size_t c = 0; c < n; ++c) x.grad[r * n + c] += g[c] - std::exp(y[c]) * gsum;
    }
  });
  return detail::wrap(out);
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  const NodePtr& X = N(x);
  const NodePtr& G = N(gain);
  const NodePtr& B = N(bias);
  const std::size_t n = X->cols;
  if (n < 2) throw DimensionError("layer_norm_rows: need at least 2 columns, got " + shape_of(*X));
  if (G->rows != 1 || G->cols != n) dim_error("layer_norm_rows(gain)", *X, *G);
  if (B->rows != 1 || B->cols != n) dim_error("layer_norm_rows(bias)", *X, *B);

  auto out = make_node(X->rows, n);
  auto normalized = std::make_shared<std::vector<double>>(X->size());
  auto inv_sigma = std::make_shared<std::vector<double>>(X->rows);
  for (std::size_t r = 0; r < X->rows; ++r) {
    const double* in = X->value.data() + r * n;
    double mean = 0.0;
    for (std::size_t c = 0; c < n; ++c) mean += in[c];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (in[c] - mean) * (in[c] - mean);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    (*inv_sigma)[r] = inv;
    for (std::size_t c = 0; c < n; ++c) {
      const double xh = (in[c] - mean) * inv;
      (*normalized)[r * n + c] = xh;
      out->value[r * n + c] = xh * G->value[c] + B->value[c];
    }
  }
  attach(*out, {X, G, B}, [n, normalized, inv_sigma](Node& self) {
    Node& x = *self.parents[0];
    Node& gain = *self.parents[1];
    Node& bias = *self.parents[2];
    std::vector<double> dxh(n);
    for (std::size_t r = 0; r < self.rows; ++r) {
      const double* g = self.grad.data() + r * n;
      const double* xh = normalized->data() + r * n;
      if (gain.requires_grad) {
        for (std::size_t c = 0; c < n; ++c) gain.grad[c] += g[c] * xh[c];
      }
      if (bias.requires_grad) {
        for (std::size_t c = 0; c < n; ++c) bias.grad[c] += g[c];
      }
      if (!x.requires_grad) continue;
      double mean_d = 0.0;
      double mean_dx = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        dxh[c] = g[c] * gain.value[c];
        mean_d += dxh[c];
        mean_dx += dxh[c] * xh[c];
      }
      mean_d /= static_cast<double>(n);
      mean_dx /= static_cast<double>(n);
      const double inv = (*inv_sigma)[r];
      for (std::size_t c = 0; c < n; ++c) {
        x.grad[r * n + c] += inv * (dxh[c] - mean_d - xh[c] * mean_dx);
      }
    }
  });
  return detail::wrap(out);
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t cols = N(parts[0])->cols;
  std::size_t rows = 0;
  std::vector<NodePtr> nodes;
  nodes.reserve(parts.size());
  for (const Tensor& p : parts) {
    const NodePtr& n = N(p);
    if (n->cols != cols) dim_error("concat_rows", *N(parts[0]), *n);
    rows += n->rows;
    nodes.push_back(n);
  }
  auto out = make_node(rows, cols);
  std::size_t offset = 0;
  for (const NodePtr& n : nodes) {
    std::copy(n->value.begin(), n->value.end(), out->value.begin() + offset);
    offset += n->size();
  }
  attach(*out, std::move(nodes), [](Node& self) {
    std::size_t offset = 0;
    for (const NodePtr& p : self.parents) {
      if (p->requires_grad) {
        for (std::size_t i = 0; i < p->size(); ++i) p->grad[i] += self.grad[offset + i];
      }
      offset += p->size();
    }
  });
  return detail::wrap(out);
}

Tensor concat_rows(std::initializer_list<Tensor> parts) {
  return concat_rows(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t rows = N(parts[0])->rows;
  std::size_t cols = 0;
  std::vector<NodePtr> nodes;
  nodes.reserve(parts.size());
  for (const Tensor& p : parts) {
    const NodePtr& n = N(p);
    if (n->rows != rows) dim_error("concat_cols", *N(parts[0]), *n);
    cols += n->cols;
    nodes.push_back(n);
  }
  auto out = make_node(rows, cols);
  std::size_t offset = 0;
  for (const NodePtr& n : nodes) {
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(n->value.begin() + r * n->cols, n->cols, out->value.begin() + r * cols + offset);
    }
    offset += n->cols;
  }
  attach(*out, std::move(nodes), [cols](Node& self) {
    std::size_t offset = 0;
    for (const NodePtr& p : self.parents) {
      if (p->requires_grad) {
        for (std::size_t r = 0; r < p->rows; ++r) {
          for (std::size_t c = 0; c < p->cols; ++c) {
            p->grad[r * p->cols + c] += self.grad[r * cols + offset + c];
          }
        }
      }
      offset += p->cols;
    }
  });
  return detail::wrap(out);
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  const NodePtr& X = N(x);
  if (begin > end || end > X->rows) {
    throw std::out_of_range("slice_rows: [" + std::to_string(begin) + "," + std::to_string(end) +
                            ") outside " + shape_of(*X));
  }
  auto out = make_node(end - begin, X->cols);
  std::copy(X->value.begin() + begin * X->cols, X->value.begin() + end * X->cols,
            out->value.begin());
  const std::size_t offset = begin * X->cols;
  attach(*out, {X}, [offset](Node& self) {
    Node& x = *self.parents[0];
    for (std::size_t i = 0; i < self.size(); ++i) x.grad[offset + i] += self.grad[i];
  });
  return detail::wrap(out);
}

Tensor slice_row(const Tensor& x, std::size_t r) { return slice_rows(x, r, r + 1); }

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  const NodePtr& X = N(x);
  if (begin > end || end > X->cols) {
    throw std::out_of_range("slice_cols: [" + std::to_string(begin) + "," + std::to_string(end) +
                            ") outside " + shape_of(*X));
  }
  const std::size_t width = end - begin;
  const std::size_t cols = X->cols;
  auto out = make_node(X->rows, width);
  for (std::size_t r = 0; r < X->rows; ++r) {
    std::copy_n(X->value.begin() + r * cols + begin, width, out->value.begin() + r * width);
  }
  attach(*out, {X}, [begin, width, cols](Node& self) {
    Node& x = *self.parents[0];
    for (std::size_t r = 0; r < self.rows; ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        x.grad[r * cols + begin + c] += self.grad[r * width + c];
      }
    }
  });
  return detail::wrap(out);
}

Tensor sum(const Tensor& x) {
  const NodePtr& X = N(x);
  auto out = make_node(1, 1);
  double total = 0.0;
  for (double v : X->value) total += v;
  out->value[0] = total;
  attach(*out, {X}, [](Node& self) {
    Node& x = *self.parents[0];
    for (double& g : x.grad) g += self.grad[0];
  });
  return detail::wrap(out);
}

Tensor pick(const Tensor& x, std::size_t r, std::size_t c) {
  const NodePtr& X = N(x);
  if (r >= X->rows || c >= X->cols) {
    throw std::out_of_range("pick: (" + std::to_string(r) + "," + std::to_string(c) +
                            ") outside " + shape_of(*X));
  }
  const std::size_t index = r * X->cols + c;
  auto out = make_node(1, 1);
  out->value[0] = X->value[index];
  attach(*out, {X}, [index](Node& self) { self.parents[0]->grad[index] += self.grad[0]; });
  return detail::wrap(out);
}

// ---------------------------------------------------------------------------
// Reverse pass

void backward(const Tensor& loss) {
  const NodePtr& root = N(loss);
  if (root->size() != 1) {
    throw DimensionError("backward: loss must be a scalar, got " + shape_of(*root));
  }
  if (!root->requires_grad) {
    throw std::logic_error("backward: loss does not depend on any tracked tensor");
  }

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->leaf) std::fill(n->grad.begin(), n->grad.end(), 0.0);
  }
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->leaf) n->backward_fn(*n);
  }
}

}  // namespace wmg
