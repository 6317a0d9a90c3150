#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "jmvae/tensor.hpp"

namespace jmvae {

using NodeId = std::size_t;

/// A named trainable tensor. Owned by a network; the tape only borrows it.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
};

template <typename T>
class Tape;

/// Handle to a tensor recorded on a tape.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, NodeId id) : tape_(tape), id_(id) {}

  const Tensor<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  NodeId id() const noexcept { return id_; }
  Tape<T>& tape() const noexcept { return *tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }
  bool requires_grad() const { return tape_->requires_grad(id_); }

 private:
  Tape<T>* tape_ = nullptr;
  NodeId id_ = 0;
};

/// Result of a backward pass: one gradient per parameter leaf on the tape.
template <typename T>
class Gradients {
 public:
  /// Gradient for a tape node. Zero-shaped like the node if it was unreachable.
  const Tensor<T>& operator[](NodeId id) const { return by_node_.at(id); }

  /// Gradient for a parameter; zeros if the parameter never entered the tape.
  Tensor<T> of(const Parameter<T>& p) const {
    auto it = nodes_.find(&p);
    if (it == nodes_.end()) return Tensor<T>(p.value.shape());
    return by_node_.at(it->second);
  }

  bool contains(const Parameter<T>& p) const { return nodes_.contains(&p); }
  const std::unordered_map<NodeId, Tensor<T>>& by_node() const noexcept { return by_node_; }

 private:
  friend class Tape<T>;
  std::unordered_map<NodeId, Tensor<T>> by_node_;
  std::unordered_map<const Parameter<T>*, NodeId> nodes_;
};

/// Reverse-mode tape. Nodes are appended in execution order, so replaying
/// them backwards is a valid topological order.
///
/// A tape belongs to one thread for the duration of a forward/backward pass.
/// Parameters are read through const pointers and may be shared by several
/// tapes as long as nobody mutates them concurrently.
template <typename T>
class Tape {
 public:
  /// Propagates the node's accumulated gradient into its parents.
  using Backward = std::function<void(Tape&, NodeId)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value);
  /// Registers a parameter as a gradient-carrying leaf. Registering the same
  /// parameter twice returns the same node.
  Var<T> parameter(const Parameter<T>& p);

  Var<T> record(const char* op, Tensor<T> value, std::initializer_list<Var<T>> parents, Backward backward);

  const Tensor<T>& value(NodeId id) const {
    const Node& n = nodes_[id];
    return n.param ? n.param->value : n.value;
  }
  /// Gradient accumulated so far, or nullptr if none reached the node.
  const Tensor<T>* grad(NodeId id) const {
    return nodes_[id].grad.empty() ? nullptr : &nodes_[id].grad;
  }
  NodeId parent(NodeId id, std::size_t i) const { return nodes_[id].parents[i]; }
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  const char* op(NodeId id) const { return nodes_[id].op; }

  /// Adds `delta` into the gradient of `id` (no-op for constants).
  void accumulate(NodeId id, const Tensor<T>& delta);
  /// Mutable gradient buffer for `id`, zero-initialised on first use.
  Tensor<T>& grad_buffer(NodeId id);

  /// Replays the tape from a scalar loss. Throws ShapeError if `loss` holds
  /// more than one value.
  Gradients<T> backward(Var<T> loss);

  /// When disabled, ops compute values only and nothing is kept for backward.
  void set_recording(bool on) noexcept { recording_ = on; }
  bool recording() const noexcept { return recording_; }

  std::size_t size() const noexcept { return nodes_.size(); }
  void clear();

  /// Parameters registered on this tape, in registration order.
  std::vector<const Parameter<T>*> parameters() const;
  bool uses(const Parameter<T>& p) const { return param_nodes_.contains(&p); }

  /// First node (in execution order) holding a NaN or Inf.
  std::optional<NodeId> first_non_finite() const;

 private:
  struct Node {
    const char* op = "";
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<NodeId> parents;
    Backward backward;
    bool requires_grad = false;
    const Parameter<T>* param = nullptr;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<T>*, NodeId> param_nodes_;
  std::vector<const Parameter<T>*> param_order_;
  bool recording_ = true;
};

// ---------------------------------------------------------------------------
// Ops. Binary elementwise ops broadcast rank<=2 operands: along each axis the
// extents must match or one of them must be 1.

template <typename T> Var<T> matmul(Var<T> a, Var<T> b);
template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> div(Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Var<T> a, T factor);
template <typename T> Var<T> add_scalar(Var<T> a, T offset);
template <typename T> Var<T> neg(Var<T> a);
template <typename T> Var<T> square(Var<T> a);
template <typename T> Var<T> exp(Var<T> a);
/// Throws DomainError on any non-positive input.
template <typename T> Var<T> log(Var<T> a);
template <typename T> Var<T> sigmoid(Var<T> a);
template <typename T> Var<T> log_sigmoid(Var<T> a);
template <typename T> Var<T> softplus(Var<T> a);
template <typename T> Var<T> leaky_relu(Var<T> a, T negative_slope = T(0.01));
/// Row-wise softmax over the last axis.
template <typename T> Var<T> softmax(Var<T> a);
template <typename T> Var<T> log_softmax(Var<T> a);
/// Row-wise log-sum-exp; returns rows x 1.
template <typename T> Var<T> logsumexp_rows(Var<T> a);
/// Sum over each row; returns rows x 1.
template <typename T> Var<T> sum_rows(Var<T> a);
/// Sum of all elements; returns a rank-0 tensor.
template <typename T> Var<T> sum(Var<T> a);
template <typename T> Var<T> mean(Var<T> a);
template <typename T> Var<T> concat_cols(Var<T> a, Var<T> b);

template <typename T> Var<T> operator+(Var<T> a, Var<T> b) { return add(a, b); }
template <typename T> Var<T> operator-(Var<T> a, Var<T> b) { return sub(a, b); }
template <typename T> Var<T> operator*(Var<T> a, Var<T> b) { return mul(a, b); }
template <typename T> Var<T> operator/(Var<T> a, Var<T> b) { return div(a, b); }
template <typename T> Var<T> operator-(Var<T> a) { return neg(a); }
template <typename T> Var<T> operator*(Var<T> a, T factor) { return scale(a, factor); }
template <typename T> Var<T> operator*(T factor, Var<T> a) { return scale(a, factor); }

// Plain (tape-free) numerics shared by ops and by evaluation code.
template <typename T> T logsumexp(std::span<const T> values);

// ---------------------------------------------------------------------------
// Finite-difference checking (64-bit only).

using ScalarFunction = std::function<Var<double>(Tape<double>&, Var<double>)>;

/// Max over coordinates of |analytic - numeric| / max(1, |analytic| + |numeric|)
/// using central differences with step `eps`.
double grad_check(const ScalarFunction& f, const Tensor<double>& point, double eps = 1e-5);

/// Same measure over every coordinate of every parameter in `params`. The
/// parameters are perturbed in place and restored before returning.
double grad_check_parameters(const std::function<Var<double>(Tape<double>&)>& loss,
                             std::span<Parameter<double>* const> params, double eps = 1e-5);

}  // namespace jmvae
