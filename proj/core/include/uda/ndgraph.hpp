#pragma once

// Reverse-mode automatic differentiation over dense f64 matrices.
//
// A Tape records every operation applied to its Vars in execution order, so
// node ids are already a topological order. backward() walks the nodes in
// reverse and accumulates gradients into per-node slots. A tape is
// single-owner mutable state; plain Tensors are immutable values.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "uda/tensor.hpp"

namespace uda {

class Tape;

// Lightweight handle to a node on a tape.
class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return shape().rows; }
  std::size_t cols() const { return shape().cols; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  // grad is dL/d(node); parent_grads[i] accumulates dL/d(parent i) and is
  // null for parents that do not require a gradient.
  using Backward =
      std::function<void(const Tape&, const Tensor& grad, std::span<Tensor* const> parent_grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable input.
  Var leaf(Tensor value);
  // Input that never receives a gradient.
  Var constant(Tensor value);
  // Records a custom operation. Used by the primitives below and by losses
  // that need a hand-written backward (nuclear norm, gradient reversal).
  Var record(Tensor value, std::vector<std::size_t> parents, Backward backward);

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  // Gradient of the last backward() loss with respect to v. Zero for nodes
  // that the loss does not depend on.
  const Tensor& grad(Var v) const;

  // Recomputes all gradients from scratch; the loss must be 1x1.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> parents;
    Backward backward;
    bool requires_grad = false;
  };

  void check_owner(Var v) const;

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }

// Primitives. Binary elementwise ops require equal shapes; scale is the only
// broadcasting op (by a scalar constant).
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var relu(Var a);
Var exp(Var a);
// ln(max(x, 1e-12)); gradient is zero below the floor.
Var log_clamped(Var a);
Var sigmoid(Var a);
Var clamp(Var a, double lo, double hi);
Var softmax_rows(Var logits);
Var log_softmax_rows(Var logits);
Var sum(Var a);
Var mean(Var a);
Var frobenius_sq(Var a);
// Value passes through, gradient is dropped.
Var stop_gradient(Var a);
// Pairwise squared Euclidean distances between rows: out(i,j) = |x_i - y_j|^2.
Var sq_dist(Var x, Var y);
Var gather_rows(Var a, std::span<const std::size_t> idx);
Var concat_rows(Var a, Var b);

inline constexpr double kLogFloor = 1e-12;

}  // namespace uda
