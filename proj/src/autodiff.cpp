#include "jmvae/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace jmvae {

// ---------------------------------------------------------------------------
// Tape

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::parameter(const Parameter<T>& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var<T>(this, it->second);
  Node n;
  n.op = "parameter";
  n.param = &p;
  n.requires_grad = recording_;
  nodes_.push_back(std::move(n));
  const NodeId id = nodes_.size() - 1;
  param_nodes_.emplace(&p, id);
  param_order_.push_back(&p);
  return Var<T>(this, id);
}

template <typename T>
Var<T> Tape<T>::record(const char* op, Tensor<T> value, std::initializer_list<Var<T>> parents,
                       Backward backward) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  bool needs_grad = false;
  for (const Var<T>& p : parents) {
    if (&p.tape() != this) throw std::logic_error(std::string(op) + ": operands live on different tapes");
    needs_grad = needs_grad || nodes_[p.id()].requires_grad;
  }
  if (recording_ && needs_grad) {
    n.requires_grad = true;
    for (const Var<T>& p : parents) n.parents.push_back(p.id());
    n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Tensor<T>& Tape<T>::grad_buffer(NodeId id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor<T>(value(id).shape());
  return n.grad;
}

template <typename T>
void Tape<T>::accumulate(NodeId id, const Tensor<T>& delta) {
  if (!nodes_[id].requires_grad) return;
  grad_buffer(id).array() += delta.array();
}

template <typename T>
Gradients<T> Tape<T>::backward(Var<T> loss) {
  if (loss.value().size() != 1) {
    throw ShapeError("backward", "loss must be a scalar, got shape " + to_string(loss.shape()));
  }
  for (Node& n : nodes_) n.grad = Tensor<T>();
  if (nodes_[loss.id()].requires_grad) {
    grad_buffer(loss.id()).fill(T(1));
    for (NodeId id = loss.id() + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (n.grad.empty() || !n.backward) continue;
      n.backward(*this, id);
    }
  }
  Gradients<T> out;
  for (const auto& [p, id] : param_nodes_) {
    out.nodes_.emplace(p, id);
    Node& n = nodes_[id];
    out.by_node_.emplace(id, n.grad.empty() ? Tensor<T>(p->value.shape()) : std::move(n.grad));
  }
  return out;
}

template <typename T>
void Tape<T>::clear() {
  nodes_.clear();
  param_nodes_.clear();
  param_order_.clear();
}

template <typename T>
std::vector<const Parameter<T>*> Tape<T>::parameters() const {
  return param_order_;
}

template <typename T>
std::optional<NodeId> Tape<T>::first_non_finite() const {
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (!value(id).all_finite()) return id;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Broadcasting helpers

namespace {

struct Broadcast {
  Shape shape;
  std::size_t rows = 1;
  std::size_t cols = 1;
};

template <typename T>
Broadcast broadcast(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() == b.shape()) return {a.shape(), a.rows(), a.cols()};
  auto extent = [&](std::size_t x, std::size_t y) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    throw ShapeError(op, a.shape(), b.shape());
  };
  if (a.rank() > 2 || b.rank() > 2) {
    if (a.size() == 1) return {b.shape(), b.rows(), b.cols()};
    if (b.size() == 1) return {a.shape(), a.rows(), a.cols()};
    throw ShapeError(op, a.shape(), b.shape());
  }
  Broadcast out;
  out.rows = extent(a.rows(), b.rows());
  out.cols = extent(a.cols(), b.cols());
  if (a.rank() == 2 || b.rank() == 2) {
    out.shape = {out.rows, out.cols};
  } else {
    out.shape = a.size() >= b.size() ? a.shape() : b.shape();
  }
  return out;
}

// Flat index of the element of `t` that lands on output (r, c).
template <typename T>
struct Indexer {
  explicit Indexer(const Tensor<T>& t) : stride(t.cols()), row_step(t.rows() == 1 ? 0 : 1), col_step(t.cols() == 1 ? 0 : 1) {}
  std::size_t operator()(std::size_t r, std::size_t c) const { return r * row_step * stride + c * col_step; }
  std::size_t stride;
  std::size_t row_step;
  std::size_t col_step;
};

template <typename T, typename F>
Tensor<T> zip(const char* op, const Tensor<T>& a, const Tensor<T>& b, F f) {
  const Broadcast bc = broadcast(op, a, b);
  Tensor<T> out(bc.shape);
  if (a.shape() == b.shape()) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
  }
  const Indexer<T> ia(a), ib(b);
  for (std::size_t r = 0; r < bc.rows; ++r) {
    for (std::size_t c = 0; c < bc.cols; ++c) out[r * bc.cols + c] = f(a[ia(r, c)], b[ib(r, c)]);
  }
  return out;
}

// Accumulates sum over broadcast axes of f(out_index, a_index, b_index) into
// the gradient of `target` (which is operand `a` when `first` is true).
template <typename T, typename F>
void reduce_into(Tape<T>& tape, NodeId target, bool first, NodeId a, NodeId b, F f) {
  if (!tape.requires_grad(target)) return;
  const Tensor<T>& va = tape.value(a);
  const Tensor<T>& vb = tape.value(b);
  Tensor<T>& g = tape.grad_buffer(target);
  if (va.shape() == vb.shape()) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += f(i, i, i);
    return;
  }
  const Broadcast bc = broadcast("backward", va, vb);
  const Indexer<T> ia(va), ib(vb);
  for (std::size_t r = 0; r < bc.rows; ++r) {
    for (std::size_t c = 0; c < bc.cols; ++c) {
      const std::size_t o = r * bc.cols + c, i = ia(r, c), j = ib(r, c);
      g[first ? i : j] += f(o, i, j);
    }
  }
}

template <typename T, typename F>
Tensor<T> map(const Tensor<T>& a, F f) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

// Applies the elementwise chain rule: grad(a) += grad(out) * f(a_i, out_i).
template <typename T, typename F>
typename Tape<T>::Backward unary_backward(F f) {
  return [f](Tape<T>& tape, NodeId self) {
    const NodeId a = tape.parent(self, 0);
    if (!tape.requires_grad(a)) return;
    const Tensor<T>& g = *tape.grad(self);
    const Tensor<T>& x = tape.value(a);
    const Tensor<T>& y = tape.value(self);
    Tensor<T>& ga = tape.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * f(x[i], y[i]);
  };
}

template <typename T>
T stable_softplus(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
void require_matrix(const char* op, const Tensor<T>& a) {
  if (a.rank() > 2) throw ShapeError(op, "expected rank <= 2, got shape " + to_string(a.shape()));
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& a) {
  Tensor<T> out(a.shape());
  const std::size_t rows = a.rows(), cols = a.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = a.data() + r * cols;
    T* o = out.data() + r * cols;
    const T m = *std::max_element(in, in + cols);
    T total = 0;
    for (std::size_t c = 0; c < cols; ++c) total += (o[c] = std::exp(in[c] - m));
    for (std::size_t c = 0; c < cols; ++c) o[c] /= total;
  }
  return out;
}

}  // namespace

template <typename T>
T logsumexp(std::span<const T> values) {
  if (values.empty()) return -std::numeric_limits<T>::infinity();
  const T m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) return m;
  T total = 0;
  for (T v : values) total += std::exp(v - m);
  return m + std::log(total);
}

// ---------------------------------------------------------------------------
// Ops

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const Tensor<T>& va = a.value();
  const Tensor<T>& vb = b.value();
  require_matrix("matmul", va);
  require_matrix("matmul", vb);
  if (va.cols() != vb.rows()) throw ShapeError("matmul", va.shape(), vb.shape());
  Tensor<T> out(Shape{va.rows(), vb.cols()});
  out.matrix().noalias() = va.matrix() * vb.matrix();
  return a.tape().record("matmul", std::move(out), {a, b}, [](Tape<T>& tape, NodeId self) {
    const NodeId ia = tape.parent(self, 0), ib = tape.parent(self, 1);
    const auto g = tape.grad(self)->matrix();
    if (tape.requires_grad(ia)) tape.grad_buffer(ia).matrix().noalias() += g * tape.value(ib).matrix().transpose();
    if (tape.requires_grad(ib)) tape.grad_buffer(ib).matrix().noalias() += tape.value(ia).matrix().transpose() * g;
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  Tensor<T> out = zip("add", a.value(), b.value(), [](T x, T y) { return x + y; });
  return a.tape().record("add", std::move(out), {a, b}, [](Tape<T>& tape, NodeId self) {
    const NodeId ia = tape.parent(self, 0), ib = tape.parent(self, 1);
    const Tensor<T>& g = *tape.grad(self);
    auto pass = [&](std::size_t o, std::size_t, std::size_t) { return g[o]; };
    reduce_into(tape, ia, true, ia, ib, pass);
    reduce_into(tape, ib, false, ia, ib, pass);
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  Tensor<T> out = zip("sub", a.value(), b.value(), [](T x, T y) { return x - y; });
  return a.tape().record("sub", std::move(out), {a, b}, [](Tape<T>& tape, NodeId self) {
    const NodeId ia = tape.parent(self, 0), ib = tape.parent(self, 1);
    const Tensor<T>& g = *tape.grad(self);
    reduce_into(tape, ia, true, ia, ib, [&](std::size_t o, std::size_t, std::size_t) { return g[o]; });
    reduce_into(tape, ib, false, ia, ib, [&](std::size_t o, std::size_t, std::size_t) { return -g[o]; });
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  Tensor<T> out = zip("mul", a.value(), b.value(), [](T x, T y) { return x * y; });
  return a.tape().record("mul", std::move(out), {a, b}, [](Tape<T>& tape, NodeId self) {
    const NodeId ia = tape.parent(self, 0), ib = tape.parent(self, 1);
    const Tensor<T>& g = *tape.grad(self);
    const Tensor<T>& va = tape.value(ia);
    const Tensor<T>& vb = tape.value(ib);
    reduce_into(tape, ia, true, ia, ib, [&](std::size_t o, std::size_t, std::size_t j) { return g[o] * vb[j]; });
    reduce_into(tape, ib, false, ia, ib, [&](std::size_t o, std::size_t i, std::size_t) { return g[o] * va[i]; });
  });
}

template <typename T>
Var<T> div(Var<T> a, Var<T> b) {
  Tensor<T> out = zip("div", a.value(), b.value(), [](T x, T y) { return x / y; });
  return a.tape().record("div", std::move(out), {a, b}, [](Tape<T>& tape, NodeId self) {
    const NodeId ia = tape.parent(self, 0), ib = tape.parent(self, 1);
    const Tensor<T>& g = *tape.grad(self);
    const Tensor<T>& va = tape.value(ia);
    const Tensor<T>& vb = tape.value(ib);
    reduce_into(tape, ia, true, ia, ib, [&](std::size_t o, std::size_t, std::size_t j) { return g[o] / vb[j]; });
    reduce_into(tape, ib, false, ia, ib,
                [&](std::size_t o, std::size_t i, std::size_t j) { return -g[o] * va[i] / (vb[j] * vb[j]); });
  });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  Tensor<T> out = map(a.value(), [factor](T x) { return x * factor; });
  return a.tape().record("scale", std::move(out), {a}, unary_backward<T>([factor](T, T) { return factor; }));
}

template <typename T>
Var<T> add_scalar(Var<T> a, T offset) {
  Tensor<T> out = map(a.value(), [offset](T x) { return x + offset; });
  return a.tape().record("add_scalar", std::move(out), {a}, unary_backward<T>([](T, T) { return T(1); }));
}

template <typename T>
Var<T> neg(Var<T> a) {
  Tensor<T> out = map(a.value(), [](T x) { return -x; });
  return a.tape().record("neg", std::move(out), {a}, unary_backward<T>([](T, T) { return T(-1); }));
}

template <typename T>
Var<T> square(Var<T> a) {
  Tensor<T> out = map(a.value(), [](T x) { return x * x; });
  return a.tape().record("square", std::move(out), {a}, unary_backward<T>([](T x, T) { return T(2) * x; }));
}

template <typename T>
Var<T> exp(Var<T> a) {
  Tensor<T> out = map(a.value(), [](T x) { return std::exp(x); });
  return a.tape().record("exp", std::move(out), {a}, unary_backward<T>([](T, T y) { return y; }));
}

template <typename T>
Var<T> log(Var<T> a) {
  const Tensor<T>& va = a.value();
  for (std::size_t i = 0; i < va.size(); ++i) {
    if (!(va[i] > T(0))) {
      throw DomainError("log: non-positive input " + std::to_string(va[i]) + " at index " + std::to_string(i));
    }
  }
  Tensor<T> out = map(va, [](T x) { return std::log(x); });
  return a.tape().record("log", std::move(out), {a}, unary_backward<T>([](T x, T) { return T(1) / x; }));
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
  Tensor<T> out = map(a.value(), [](T x) { return stable_sigmoid(x); });
  return a.tape().record("sigmoid", std::move(out), {a},
                         unary_backward<T>([](T, T y) { return y * (T(1) - y); }));
}

template <typename T>
Var<T> log_sigmoid(Var<T> a) {
  Tensor<T> out = map(a.value(), [](T x) { return -stable_softplus(-x); });
  return a.tape().record("log_sigmoid", std::move(out), {a},
                         unary_backward<T>([](T x, T) { return stable_sigmoid(-x); }));
}

template <typename T>
Var<T> softplus(Var<T> a) {
  Tensor<T> out = map(a.value(), [](T x) { return stable_softplus(x); });
  return a.tape().record("softplus", std::move(out), {a},
                         unary_backward<T>([](T x, T) { return stable_sigmoid(x); }));
}

template <typename T>
Var<T> leaky_relu(Var<T> a, T negative_slope) {
  Tensor<T> out = map(a.value(), [negative_slope](T x) { return x > T(0) ? x : negative_slope * x; });
  return a.tape().record("leaky_relu", std::move(out), {a}, unary_backward<T>([negative_slope](T x, T) {
                           return x > T(0) ? T(1) : negative_slope;
                         }));
}

template <typename T>
Var<T> softmax(Var<T> a) {
  require_matrix("softmax", a.value());
  Tensor<T> out = softmax_rows(a.value());
  return a.tape().record("softmax", std::move(out), {a}, [](Tape<T>& tape, NodeId self) {
    const NodeId ia = tape.parent(self, 0);
    if (!tape.requires_grad(ia)) return;
    const Tensor<T>& g = *tape.grad(self);
    const Tensor<T>& s = tape.value(self);
    Tensor<T>& ga = tape.grad_buffer(ia);
    const std::size_t rows = s.rows(), cols = s.cols();
    for (std::size_t r = 0; r < rows; ++r) {
      T dot = 0;
      for (std::size_t c = 0; c < cols; ++c) dot += g[r * cols + c] * s[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += s[r * cols + c] * (g[r * cols + c] - dot);
    }
  });
}

template <typename T>
Var<T> log_softmax(Var<T> a) {
  const Tensor<T>& va = a.value();
  require_matrix("log_softmax", va);
  Tensor<T> out(va.shape());
  const std::size_t rows = va.rows(), cols = va.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    const T lse = logsumexp(std::span<const T>(va.data() + r * cols, cols));
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = va[r * cols + c] - lse;
  }
  return a.tape().record("log_softmax", std::move(out), {a}, [](Tape<T>& tape, NodeId self) {
    const NodeId ia = tape.parent(self, 0);
    if (!tape.requires_grad(ia)) return;
    const Tensor<T>& g = *tape.grad(self);
    const Tensor<T>& y = tape.value(self);
    Tensor<T>& ga = tape.grad_buffer(ia);
    const std::size_t rows = y.rows(), cols = y.cols();
    for (std::size_t r = 0; r < rows; ++r) {
      T total = 0;
      for (std::size_t c = 0; c < cols; ++c) total += g[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += g[r * cols + c] - std::exp(y[r * cols + c]) * total;
    }
  });
}

template <typename T>
Var<T> logsumexp_rows(Var<T> a) {
  const Tensor<T>& va = a.value();
  require_matrix("logsumexp_rows", va);
  const std::size_t rows = va.rows(), cols = va.cols();
  Tensor<T> out(Shape{rows, 1});
  for (std::size_t r = 0; r < rows; ++r) out[r] = logsumexp(std::span<const T>(va.data() + r * cols, cols));
  return a.tape().record("logsumexp_rows", std::move(out), {a}, [](Tape<T>& tape, NodeId self) {
    const NodeId ia = tape.parent(self, 0);
    if (!tape.requires_grad(ia)) return;
    const Tensor<T>& g = *tape.grad(self);
    const Tensor<T>& y = tape.value(self);
    const Tensor<T>& x = tape.value(ia);
    Tensor<T>& ga = tape.grad_buffer(ia);
    const std::size_t cols = x.cols();
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += g[r] * std::exp(x[r * cols + c] - y[r]);
    }
  });
}

template <typename T>
Var<T> sum_rows(Var<T> a) {
  const Tensor<T>& va = a.value();
  require_matrix("sum_rows", va);
  Tensor<T> out(Shape{va.rows(), 1});
  out.matrix() = va.matrix().rowwise().sum();
  return a.tape().record("sum_rows", std::move(out), {a}, [](Tape<T>& tape, NodeId self) {
    const NodeId ia = tape.parent(self, 0);
    if (!tape.requires_grad(ia)) return;
    const auto g = tape.grad(self)->matrix();
    auto ga = tape.grad_buffer(ia).matrix();
    ga.colwise() += g.col(0);
  });
}

template <typename T>
Var<T> sum(Var<T> a) {
  Tensor<T> out = Tensor<T>::scalar(a.value().array().sum());
  return a.tape().record("sum", std::move(out), {a}, [](Tape<T>& tape, NodeId self) {
    const NodeId ia = tape.parent(self, 0);
    if (!tape.requires_grad(ia)) return;
    tape.grad_buffer(ia).array() += tape.grad(self)->item();
  });
}

template <typename T>
Var<T> mean(Var<T> a) {
  const T n = static_cast<T>(a.value().size());
  Tensor<T> out = Tensor<T>::scalar(a.value().array().sum() / n);
  return a.tape().record("mean", std::move(out), {a}, [n](Tape<T>& tape, NodeId self) {
    const NodeId ia = tape.parent(self, 0);
    if (!tape.requires_grad(ia)) return;
    tape.grad_buffer(ia).array() += tape.grad(self)->item() / n;
  });
}

template <typename T>
Var<T> concat_cols(Var<T> a, Var<T> b) {
  const Tensor<T>& va = a.value();
  const Tensor<T>& vb = b.value();
  require_matrix("concat_cols", va);
  require_matrix("concat_cols", vb);
  if (va.rows() != vb.rows()) throw ShapeError("concat_cols", va.shape(), vb.shape());
  const std::size_t ca = va.cols(), cb = vb.cols();
  Tensor<T> out(Shape{va.rows(), ca + cb});
  out.matrix().leftCols(ca) = va.matrix();
  out.matrix().rightCols(cb) = vb.matrix();
  return a.tape().record("concat_cols", std::move(out), {a, b}, [ca, cb](Tape<T>& tape, NodeId self) {
    const NodeId ia = tape.parent(self, 0), ib = tape.parent(self, 1);
    const auto g = tape.grad(self)->matrix();
    if (tape.requires_grad(ia)) tape.grad_buffer(ia).matrix() += g.leftCols(ca);
    if (tape.requires_grad(ib)) tape.grad_buffer(ib).matrix() += g.rightCols(cb);
  });
}

// ---------------------------------------------------------------------------
// Finite differences

namespace {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic) + std::abs(numeric));
}

}  // namespace

double grad_check(const ScalarFunction& f, const Tensor<double>& point, double eps) {
  Parameter<double> x{"x", point};
  Tensor<double> analytic;
  {
    Tape<double> tape;
    analytic = tape.backward(f(tape, tape.parameter(x))).of(x);
  }
  auto evaluate = [&](const Tensor<double>& at) {
    Tape<double> tape;
    tape.set_recording(false);
    return f(tape, tape.constant(at)).value().item();
  };
  double worst = 0.0;
  Tensor<double> probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + eps;
    const double up = evaluate(probe);
    probe[i] = point[i] - eps;
    const double down = evaluate(probe);
    probe[i] = point[i];
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2 * eps)));
  }
  return worst;
}

double grad_check_parameters(const std::function<Var<double>(Tape<double>&)>& loss,
                             std::span<Parameter<double>* const> params, double eps) {
  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    const Gradients<double> grads = tape.backward(loss(tape));
    for (const Parameter<double>* p : params) analytic.push_back(grads.of(*p));
  }
  auto evaluate = [&] {
    Tape<double> tape;
    tape.set_recording(false);
    return loss(tape).value().item();
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<double>& v = params[k]->value;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double saved = v[i];
      v[i] = saved + eps;
      const double up = evaluate();
      v[i] = saved - eps;
      const double down = evaluate();
      v[i] = saved;
      worst = std::max(worst, relative_error(analytic[k][i], (up - down) / (2 * eps)));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Explicit instantiations

#define JMVAE_INSTANTIATE_OPS(T)                          \
  template class Tape<T>;                                 \
  template T logsumexp<T>(std::span<const T>);            \
  template Var<T> matmul<T>(Var<T>, Var<T>);              \
  template Var<T> add<T>(Var<T>, Var<T>);                 \
  template Var<T> sub<T>(Var<T>, Var<T>);                 \
  template Var<T> mul<T>(Var<T>, Var<T>);                 \
  template Var<T> div<T>(Var<T>, Var<T>);                 \
  template Var<T> scale<T>(Var<T>, T);                    \
  template Var<T> add_scalar<T>(Var<T>, T);               \
  template Var<T> neg<T>(Var<T>);                         \
  template Var<T> square<T>(Var<T>);                      \
  template Var<T> exp<T>(Var<T>);                         \
  template Var<T> log<T>(Var<T>);                         \
  template Var<T> sigmoid<T>(Var<T>);                     \
  template Var<T> log_sigmoid<T>(Var<T>);                 \
  template Var<T> softplus<T>(Var<T>);                    \
  template Var<T> leaky_relu<T>(Var<T>, T);               \
  template Var<T> softmax<T>(Var<T>);                     \
  template Var<T> log_softmax<T>(Var<T>);                 \
  template Var<T> logsumexp_rows<T>(Var<T>);              \
  template Var<T> sum_rows<T>(Var<T>);                    \
  template Var<T> sum<T>(Var<T>);                         \
  template Var<T> mean<T>(Var<T>);                        \
  template Var<T> concat_cols<T>(Var<T>, Var<T>);

JMVAE_INSTANTIATE_OPS(float)
JMVAE_INSTANTIATE_OPS(double)

#undef JMVAE_INSTANTIATE_OPS

}  // namespace jmvae
