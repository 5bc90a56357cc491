#include "uda/ndgraph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "uda/error.hpp"

namespace uda {

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<std::size_t> parents, Backward backward) {
  bool needs = false;
  for (std::size_t p : parents) {
    if (p >= nodes_.size()) throw ContractError("tape: parent id does not precede child");
    needs = needs || nodes_[p].requires_grad;
  }
  Node node{std::move(value), std::move(parents), nullptr, needs};
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owner(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) {
    throw ContractError("var does not belong to this tape");
  }
}

const Tensor& Tape::grad(Var v) const {
  check_owner(v);
  if (grads_.size() <= v.id()) throw ContractError("grad() called before backward()");
  return grads_[v.id()];
}

void Tape::backward(Var loss) {
  check_owner(loss);
  if (value(loss).size() != 1) {
    throw ContractError("backward: loss must be 1x1, got " + value(loss).shape().str());
  }
  grads_.clear();
  grads_.reserve(nodes_.size());
  for (const Node& n : nodes_) grads_.emplace_back(n.value.rows(), n.value.cols());
  grads_[loss.id()][0] = 1.0;

  std::vector<Tensor*> parent_grads;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward) continue;
    parent_grads.clear();
    for (std::size_t p : n.parents) {
      parent_grads.push_back(nodes_[p].requires_grad ? &grads_[p] : nullptr);
    }
    n.backward(*this, grads_[i], parent_grads);
  }
}

namespace {

Tape& same_tape(Var a, Var b, const char* op) {
  if (&a.tape() != &b.tape()) throw ContractError(std::string(op) + ": vars on different tapes");
  return a.tape();
}

template <typename F>
Tensor map(const Tensor& x, F f) {
  Tensor out = x;
  for (double& v : out.data()) v = f(v);
  return out;
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(matmul(a.value(), b.value()), {ia, ib},
                  [ia, ib](const Tape& tp, const Tensor& g, std::span<Tensor* const> pg) {
                    if (pg[0]) *pg[0] += matmul(g, transpose(tp.value(ib)));
                    if (pg[1]) *pg[1] += matmul(transpose(tp.value(ia)), g);
                  });
}

Var transpose(Var a) {
  return a.tape().record(transpose(a.value()), {a.id()},
                         [](const Tape&, const Tensor& g, std::span<Tensor* const> pg) {
                           *pg[0] += transpose(g);
                         });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  return t.record(a.value() + b.value(), {a.id(), b.id()},
                  [](const Tape&, const Tensor& g, std::span<Tensor* const> pg) {
                    if (pg[0]) *pg[0] += g;
                    if (pg[1]) *pg[1] += g;
                  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  return t.record(a.value() - b.value(), {a.id(), b.id()},
                  [](const Tape&, const Tensor& g, std::span<Tensor* const> pg) {
                    if (pg[0]) *pg[0] += g;
                    if (pg[1]) *pg[1] -= g;
                  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b, "mul");
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(hadamard(a.value(), b.value()), {ia, ib},
                  [ia, ib](const Tape& tp, const Tensor& g, std::span<Tensor* const> pg) {
                    if (pg[0]) *pg[0] += hadamard(g, tp.value(ib));
                    if (pg[1]) *pg[1] += hadamard(g, tp.value(ia));
                  });
}

Var scale(Var a, double s) {
  return a.tape().record(a.value() * s, {a.id()},
                         [s](const Tape&, const Tensor& g, std::span<Tensor* const> pg) {
                           *pg[0] += g * s;
                         });
}

Var relu(Var a) {
  const std::size_t ia = a.id();
  return a.tape().record(map(a.value(), [](double v) { return v > 0.0 ? v : 0.0; }), {ia},
                         [ia](const Tape& tp, const Tensor& g, std::span<Tensor* const> pg) {
                           const Tensor& x = tp.value(ia);
                           Tensor& out = *pg[0];
                           for (std::size_t i = 0; i < g.size(); ++i)
                             if (x[i] > 0.0) out[i] += g[i];
                         });
}

Var exp(Var a) {
  Tape& t = a.tape();
  const std::size_t self = t.size();
  return t.record(map(a.value(), [](double v) { return std::exp(v); }), {a.id()},
                  [self](const Tape& tp, const Tensor& g, std::span<Tensor* const> pg) {
                    *pg[0] += hadamard(g, tp.value(self));
                  });
}

Var log_clamped(Var a) {
  const std::size_t ia = a.id();
  return a.tape().record(
      map(a.value(), [](double v) { return std::log(std::max(v, kLogFloor)); }), {ia},
      [ia](const Tape& tp, const Tensor& g, std::span<Tensor* const> pg) {
        const Tensor& x = tp.value(ia);
        Tensor& out = *pg[0];
        for (std::size_t i = 0; i < g.size(); ++i)
          if (x[i] > kLogFloor) out[i] += g[i] / x[i];
      });
}

Var sigmoid(Var a) {
  Tape& t = a.tape();
  const std::size_t self = t.size();
  return t.record(map(a.value(), [](double v) { return 1.0 / (1.0 + std::exp(-v)); }), {a.id()},
                  [self](const Tape& tp, const Tensor& g, std::span<Tensor* const> pg) {
                    const Tensor& y = tp.value(self);
                    Tensor& out = *pg[0];
                    for (std::size_t i = 0; i < g.size(); ++i) out[i] += g[i] * y[i] * (1.0 - y[i]);
                  });
}

Var clamp(Var a, double lo, double hi) {
  const std::size_t ia = a.id();
  return a.tape().record(map(a.value(), [lo, hi](double v) { return std::clamp(v, lo, hi); }),
                         {ia},
                         [ia, lo, hi](const Tape& tp, const Tensor& g, std::span<Tensor* const> pg) {
                           const Tensor& x = tp.value(ia);
                           Tensor& out = *pg[0];
                           for (std::size_t i = 0; i < g.size(); ++i)
                             if (x[i] >= lo && x[i] <= hi) out[i] += g[i];
                         });
}

Var softmax_rows(Var logits) {
  Tape& t = logits.tape();
  const std::size_t self = t.size();
  return t.record(softmax_rows(logits.value()), {logits.id()},
                  [self](const Tape& tp, const Tensor& g, std::span<Tensor* const> pg) {
                    const Tensor& y = tp.value(self);
                    Tensor& out = *pg[0];
                    for (std::size_t i = 0; i < y.rows(); ++i) {
                      double dot = 0.0;
                      for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
                      for (std::size_t j = 0; j < y.cols(); ++j) out(i, j) += y(i, j) * (g(i, j) - dot);
                    }
                  });
}

Var log_softmax_rows(Var logits) {
  const Tensor& x = logits.value();
  Tensor value(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double v : r) z += std::exp(v - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < r.size(); ++j) value(i, j) = r[j] - lse;
  }
  Tape& t = logits.tape();
  const std::size_t self = t.size();
  return t.record(std::move(value), {logits.id()},
                  [self](const Tape& tp, const Tensor& g, std::span<Tensor* const> pg) {
                    const Tensor& y = tp.value(self);
                    Tensor& out = *pg[0];
                    for (std::size_t i = 0; i < y.rows(); ++i) {
                      double gs = 0.0;
                      for (std::size_t j = 0; j < y.cols(); ++j) gs += g(i, j);
                      for (std::size_t j = 0; j < y.cols(); ++j)
                        out(i, j) += g(i, j) - std::exp(y(i, j)) * gs;
                    }
                  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape().record(Tensor::scalar(s), {a.id()},
                         [](const Tape&, const Tensor& g, std::span<Tensor* const> pg) {
                           const double gv = g[0];
                           for (double& v : pg[0]->data()) v += gv;
                         });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape().record(Tensor::scalar(s / n), {a.id()},
                         [n](const Tape&, const Tensor& g, std::span<Tensor* const> pg) {
                           const double gv = g[0] / n;
                           for (double& v : pg[0]->data()) v += gv;
                         });
}

Var frobenius_sq(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v * v;
  const std::size_t ia = a.id();
  return a.tape().record(Tensor::scalar(s), {ia},
                         [ia](const Tape& tp, const Tensor& g, std::span<Tensor* const> pg) {
                           const Tensor& x = tp.value(ia);
                           Tensor& out = *pg[0];
                           for (std::size_t i = 0; i < x.size(); ++i) out[i] += 2.0 * g[0] * x[i];
                         });
}

Var stop_gradient(Var a) { return a.tape().constant(a.value()); }

Var sq_dist(Var x, Var y) {
  Tape& t = same_tape(x, y, "sq_dist");
  const Tensor& xv = x.value();
  const Tensor& yv = y.value();
  if (xv.cols() != yv.cols()) {
    throw ShapeError("sq_dist: feature width mismatch " + xv.shape().str() + " vs " +
                     yv.shape().str());
  }
  Tensor d(xv.rows(), yv.rows());
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    auto xi = xv.row(i);
    for (std::size_t j = 0; j < yv.rows(); ++j) {
      auto yj = yv.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < xi.size(); ++k) {
        const double diff = xi[k] - yj[k];
        s += diff * diff;
      }
      d(i, j) = s;
    }
  }
  const std::size_t ix = x.id(), iy = y.id();
  return t.record(std::move(d), {ix, iy},
                  [ix, iy](const Tape& tp, const Tensor& g, std::span<Tensor* const> pg) {
                    const Tensor& xv = tp.value(ix);
                    const Tensor& yv = tp.value(iy);
                    // d/dx_i = 2 sum_j g_ij (x_i - y_j); d/dy_j = -2 sum_i g_ij (x_i - y_j)
                    for (std::size_t i = 0; i < xv.rows(); ++i) {
                      for (std::size_t j = 0; j < yv.rows(); ++j) {
                        const double gij = 2.0 * g(i, j);
                        if (gij == 0.0) continue;
                        for (std::size_t k = 0; k < xv.cols(); ++k) {
                          const double diff = gij * (xv(i, k) - yv(j, k));
                          if (pg[0]) (*pg[0])(i, k) += diff;
                          if (pg[1]) (*pg[1])(j, k) -= diff;
                        }
                      }
                    }
                  });
}

Var gather_rows(Var a, std::span<const std::size_t> idx) {
  std::vector<std::size_t> rows(idx.begin(), idx.end());
  Tensor value = gather_rows(a.value(), rows);
  return a.tape().record(std::move(value), {a.id()},
                         [rows = std::move(rows)](const Tape&, const Tensor& g,
                                                  std::span<Tensor* const> pg) {
                           Tensor& out = *pg[0];
                           for (std::size_t r = 0; r < rows.size(); ++r) {
                             auto src = g.row(r);
                             auto dst = out.row(rows[r]);
                             for (std::size_t k = 0; k < src.size(); ++k) dst[k] += src[k];
                           }
                         });
}

Var concat_rows(Var a, Var b) {
  Tape& t = same_tape(a, b, "concat_rows");
  const std::size_t na = a.rows();
  return t.record(concat_rows(a.value(), b.value()), {a.id(), b.id()},
                  [na](const Tape&, const Tensor& g, std::span<Tensor* const> pg) {
                    const std::size_t w = g.cols();
                    if (pg[0]) {
                      for (std::size_t i = 0; i < na * w; ++i) (*pg[0])[i] += g[i];
                    }
                    if (pg[1]) {
                      for (std::size_t i = 0; i < pg[1]->size(); ++i) (*pg[1])[i] += g[na * w + i];
                    }
                  });
}

}  // namespace uda
