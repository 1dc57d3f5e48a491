#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mcrnet/rng.hpp"

namespace mcrnet {

template <typename Scalar>
using Matrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

// Boolean mask over sequence positions; nonzero means "valid".
using Mask = std::vector<std::uint8_t>;

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

template <typename Scalar>
std::string shape_str(const Matrix<Scalar>& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

template <typename Scalar>
bool all_finite(const Matrix<Scalar>& m) {
  return m.allFinite();
}

// A named trainable matrix with a persistent gradient accumulator.
template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  Parameter() = default;
  Parameter(std::string n, Matrix<Scalar> v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(Matrix<Scalar>::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(); }
};

template <typename Scalar>
class Tape;

// Lightweight handle to a node on a tape. Valid only while the tape lives.
template <typename Scalar>
class Tensor {
 public:
  Tensor() = default;

  const Matrix<Scalar>& value() const { return tape_->value(id_); }
  const Matrix<Scalar>& grad() const { return tape_->grad_of(id_); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Index size() const { return value().size(); }

  // Value of a 1x1 tensor.
  Scalar item() const {
    require(rows() == 1 && cols() == 1, "item: tensor is not scalar");
    return value()(0, 0);
  }

  Tape<Scalar>* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape<Scalar>;
  Tensor(Tape<Scalar>* t, int id) : tape_(t), id_(id) {}

  Tape<Scalar>* tape_ = nullptr;
  int id_ = -1;
};

// Records forward ops in execution order (every node's inputs precede it)
// and replays them in reverse for gradient accumulation.
template <typename Scalar>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int)>;

  // Non-differentiable input.
  Tensor<Scalar> constant(Matrix<Scalar> v) {
    return push(std::move(v), {}, nullptr, false, nullptr);
  }

  Tensor<Scalar> scalar(Scalar v) {
    Matrix<Scalar> m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
  }

  // Differentiable leaf not bound to a Parameter (tests, probes).
  Tensor<Scalar> variable(Matrix<Scalar> v) {
    return push(std::move(v), {}, nullptr, true, nullptr);
  }

  // Leaf bound to a Parameter. Repeated calls with the same Parameter
  // return the same node, so shared weights accumulate one gradient.
  Tensor<Scalar> param(Parameter<Scalar>& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Tensor<Scalar>(this, it->second);
    Tensor<Scalar> t = push(p.value, {}, nullptr, true, &p);
    param_nodes_.emplace(&p, t.id());
    return t;
  }

  Tensor<Scalar> emit(Matrix<Scalar> value, std::vector<int> parents,
                      BackwardFn fn) {
    bool track = false;
    for (int pid : parents) track = track || nodes_[pid].track;
    return push(std::move(value), std::move(parents),
                track ? std::move(fn) : nullptr, track, nullptr);
  }

  const Matrix<Scalar>& value(int id) const { return nodes_[id].value; }

  bool tracked(int id) const { return nodes_[id].track; }

  const Matrix<Scalar>& grad_of(int id) const {
    const Node& n = nodes_[id];
    require(n.grad.size() != 0, "grad: no gradient recorded for this node");
    return n.grad;
  }

  // Accumulates g into the node's gradient (no-op for untracked nodes).
  void add_grad(int id, const Matrix<Scalar>& g) {
    Node& n = nodes_[id];
    if (!n.track) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  // Reverse-mode accumulation from a scalar loss. Parameter gradients are
  // added to Parameter::grad, so repeated calls accumulate additively.
  void backward(const Tensor<Scalar>& loss) {
    require(loss.tape() == this, "backward: loss lives on another tape");
    require(loss.rows() == 1 && loss.cols() == 1,
            "backward: loss must be scalar, got " + shape_str(loss.value()));
    for (Node& n : nodes_) n.grad.resize(0, 0);
    Node& root = nodes_[loss.id()];
    require(root.track, "backward: loss does not depend on any parameter");
    root.grad = Matrix<Scalar>::Ones(1, 1);
    for (int id = loss.id(); id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.track || n.grad.size() == 0) continue;
      if (n.backward) n.backward(*this, id);
      if (n.bound) n.bound->grad += n.grad;
    }
  }

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Matrix<Scalar> value;
    Matrix<Scalar> grad;
    std::vector<int> parents;
    BackwardFn backward;
    Parameter<Scalar>* bound = nullptr;
    bool track = false;
  };

  Tensor<Scalar> push(Matrix<Scalar> value, std::vector<int> parents,
                      BackwardFn fn, bool track, Parameter<Scalar>* bound) {
    Node n;
    n.value = std::move(value);
    n.parents = std::move(parents);
    n.backward = std::move(fn);
    n.track = track;
    n.bound = bound;
    nodes_.push_back(std::move(n));
    return Tensor<Scalar>(this, static_cast<int>(nodes_.size()) - 1);
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<Scalar>*, int> param_nodes_;
};

namespace detail {

template <typename Scalar>
Tape<Scalar>& same_tape(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require(a.tape() != nullptr && a.tape() == b.tape(),
          "operands must live on the same tape");
  return *a.tape();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Forward primitives. Each records its own reverse rule on the tape.
// ---------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  Tape<Scalar>& t = detail::same_tape(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          "add: shape mismatch " + shape_str(a.value()) + " vs " +
              shape_str(b.value()));
  int ia = a.id(), ib = b.id();
  return t.emit(a.value() + b.value(), {ia, ib},
                [ia, ib](Tape<Scalar>& tp, int self) {
                  tp.add_grad(ia, tp.grad_of(self));
                  tp.add_grad(ib, tp.grad_of(self));
                });
}

template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  Tape<Scalar>& t = detail::same_tape(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          "sub: shape mismatch " + shape_str(a.value()) + " vs " +
              shape_str(b.value()));
  int ia = a.id(), ib = b.id();
  return t.emit(a.value() - b.value(), {ia, ib},
                [ia, ib](Tape<Scalar>& tp, int self) {
                  tp.add_grad(ia, tp.grad_of(self));
                  tp.add_grad(ib, -tp.grad_of(self));
                });
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar c) {
  int ia = a.id();
  return a.tape()->emit(a.value() * c, {ia},
                        [ia, c](Tape<Scalar>& tp, int self) {
                          tp.add_grad(ia, tp.grad_of(self) * c);
                        });
}

// Elementwise (Hadamard) product.
template <typename Scalar>
Tensor<Scalar> cmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  Tape<Scalar>& t = detail::same_tape(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          "cmul: shape mismatch " + shape_str(a.value()) + " vs " +
              shape_str(b.value()));
  int ia = a.id(), ib = b.id();
  return t.emit(a.value().cwiseProduct(b.value()), {ia, ib},
                [ia, ib](Tape<Scalar>& tp, int self) {
                  const Matrix<Scalar>& g = tp.grad_of(self);
                  if (tp.tracked(ia)) tp.add_grad(ia, g.cwiseProduct(tp.value(ib)));
                  if (tp.tracked(ib)) tp.add_grad(ib, g.cwiseProduct(tp.value(ia)));
                });
}

template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  Tape<Scalar>& t = detail::same_tape(a, b);
  require(a.cols() == b.rows(), "matmul: inner dimensions differ, " +
                                    shape_str(a.value()) + " * " +
                                    shape_str(b.value()));
  int ia = a.id(), ib = b.id();
  return t.emit(a.value() * b.value(), {ia, ib},
                [ia, ib](Tape<Scalar>& tp, int self) {
                  const Matrix<Scalar>& g = tp.grad_of(self);
                  if (tp.tracked(ia))
                    tp.add_grad(ia, g * tp.value(ib).transpose());
                  if (tp.tracked(ib))
                    tp.add_grad(ib, tp.value(ia).transpose() * g);
                });
}

template <typename Scalar>
Tensor<Scalar> transpose(const Tensor<Scalar>& a) {
  int ia = a.id();
  return a.tape()->emit(a.value().transpose(), {ia},
                        [ia](Tape<Scalar>& tp, int self) {
                          tp.add_grad(ia, tp.grad_of(self).transpose());
                        });
}

// Concatenation along the feature (column) axis.
template <typename Scalar>
Tensor<Scalar> concat_cols(const std::vector<Tensor<Scalar>>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  Tape<Scalar>& t = *parts.front().tape();
  Index rows = parts.front().rows();
  Index cols = 0;
  std::vector<int> ids;
  std::vector<Index> widths;
  for (const auto& p : parts) {
    require(p.tape() == &t, "concat_cols: operands on different tapes");
    require(p.rows() == rows, "concat_cols: row counts differ");
    ids.push_back(p.id());
    widths.push_back(p.cols());
    cols += p.cols();
  }
  Matrix<Scalar> out(rows, cols);
  Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return t.emit(std::move(out), ids,
                [ids, widths](Tape<Scalar>& tp, int self) {
                  const Matrix<Scalar>& g = tp.grad_of(self);
                  Index at = 0;
                  for (std::size_t k = 0; k < ids.size(); ++k) {
                    if (tp.tracked(ids[k]))
                      tp.add_grad(ids[k], g.middleCols(at, widths[k]));
                    at += widths[k];
                  }
                });
}

template <typename Scalar>
Tensor<Scalar> concat_cols(std::initializer_list<Tensor<Scalar>> parts) {
  return concat_cols(std::vector<Tensor<Scalar>>(parts));
}

// Vertical stacking.
template <typename Scalar>
Tensor<Scalar> concat_rows(const std::vector<Tensor<Scalar>>& parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  Tape<Scalar>& t = *parts.front().tape();
  Index cols = parts.front().cols();
  Index rows = 0;
  std::vector<int> ids;
  std::vector<Index> heights;
  for (const auto& p : parts) {
    require(p.tape() == &t, "concat_rows: operands on different tapes");
    require(p.cols() == cols, "concat_rows: column counts differ");
    ids.push_back(p.id());
    heights.push_back(p.rows());
    rows += p.rows();
  }
  Matrix<Scalar> out(rows, cols);
  Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return t.emit(std::move(out), ids,
                [ids, heights](Tape<Scalar>& tp, int self) {
                  const Matrix<Scalar>& g = tp.grad_of(self);
                  Index at = 0;
                  for (std::size_t k = 0; k < ids.size(); ++k) {
                    if (tp.tracked(ids[k]))
                      tp.add_grad(ids[k], g.middleRows(at, heights[k]));
                    at += heights[k];
                  }
                });
}

// Repeats a 1xN row vector into RxN.
template <typename Scalar>
Tensor<Scalar> broadcast_rows(const Tensor<Scalar>& a, Index rows) {
  require(a.rows() == 1, "broadcast_rows: input must be 1xN, got " +
                             shape_str(a.value()));
  require(rows >= 1, "broadcast_rows: row count must be positive");
  int ia = a.id();
  Matrix<Scalar> out = a.value().replicate(rows, 1);
  return a.tape()->emit(std::move(out), {ia},
                        [ia](Tape<Scalar>& tp, int self) {
                          tp.add_grad(ia,
                                      tp.grad_of(self).colwise().sum());
                        });
}

template <typename Scalar>
Tensor<Scalar> slice_cols(const Tensor<Scalar>& a, Index begin, Index count) {
  require(begin >= 0 && count >= 1 && begin + count <= a.cols(),
          "slice_cols: range out of bounds");
  int ia = a.id();
  Index rows = a.rows(), cols = a.cols();
  return a.tape()->emit(
      a.value().middleCols(begin, count), {ia},
      [ia, begin, count, rows, cols](Tape<Scalar>& tp, int self) {
        Matrix<Scalar> g = Matrix<Scalar>::Zero(rows, cols);
        g.middleCols(begin, count) = tp.grad_of(self);
        tp.add_grad(ia, g);
      });
}

template <typename Scalar>
Tensor<Scalar> slice_rows(const Tensor<Scalar>& a, Index begin, Index count) {
  require(begin >= 0 && count >= 1 && begin + count <= a.rows(),
          "slice_rows: range out of bounds");
  int ia = a.id();
  Index rows = a.rows(), cols = a.cols();
  return a.tape()->emit(
      a.value().middleRows(begin, count), {ia},
      [ia, begin, count, rows, cols](Tape<Scalar>& tp, int self) {
        Matrix<Scalar> g = Matrix<Scalar>::Zero(rows, cols);
        g.middleRows(begin, count) = tp.grad_of(self);
        tp.add_grad(ia, g);
      });
}

template <typename Scalar>
Tensor<Scalar> row(const Tensor<Scalar>& a, Index r) {
  return slice_rows(a, r, 1);
}

// out.row(i) = a.row(ids[i]); duplicate ids accumulate in the backward pass.
template <typename Scalar>
Tensor<Scalar> gather_rows(const Tensor<Scalar>& a,
                           const std::vector<int>& ids) {
  require(!ids.empty(), "gather_rows: empty index list");
  for (int id : ids)
    require(id >= 0 && id < a.rows(), "gather_rows: index out of range");
  int ia = a.id();
  Index rows = a.rows(), cols = a.cols();
  Matrix<Scalar> out(static_cast<Index>(ids.size()), cols);
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(i) = a.value().row(ids[i]);
  return a.tape()->emit(std::move(out), {ia},
                        [ia, ids, rows, cols](Tape<Scalar>& tp, int self) {
                          const Matrix<Scalar>& g = tp.grad_of(self);
                          Matrix<Scalar> acc = Matrix<Scalar>::Zero(rows, cols);
                          for (std::size_t i = 0; i < ids.size(); ++i)
                            acc.row(ids[i]) += g.row(i);
                          tp.add_grad(ia, acc);
                        });
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& a) {
  int ia = a.id();
  return a.tape()->emit(
      a.value().cwiseMax(Scalar(0)), {ia},
      [ia](Tape<Scalar>& tp, int self) {
        Matrix<Scalar> g =
            (tp.value(ia).array() > Scalar(0))
                .select(tp.grad_of(self), Matrix<Scalar>::Zero(
                                              tp.value(ia).rows(),
                                              tp.value(ia).cols()));
        tp.add_grad(ia, g);
      });
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& a) {
  int ia = a.id();
  Matrix<Scalar> out = a.value().unaryExpr([](Scalar x) {
    if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
    Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
  });
  return a.tape()->emit(std::move(out), {ia},
                        [ia](Tape<Scalar>& tp, int self) {
                          const Matrix<Scalar>& y = tp.value(self);
                          Matrix<Scalar> g = tp.grad_of(self).cwiseProduct(
                              y.cwiseProduct(Matrix<Scalar>::Ones(
                                                 y.rows(), y.cols()) -
                                             y));
                          tp.add_grad(ia, g);
                        });
}

template <typename Scalar>
Tensor<Scalar> log(const Tensor<Scalar>& a) {
  require(a.value().minCoeff() > Scalar(0),
          "log: nonpositive input (clamp first)");
  int ia = a.id();
  return a.tape()->emit(a.value().array().log().matrix(), {ia},
                        [ia](Tape<Scalar>& tp, int self) {
                          tp.add_grad(ia, tp.grad_of(self)
                                              .cwiseQuotient(tp.value(ia)));
                        });
}

// Gradient passes through strictly inside (lo, hi) and is zero outside.
template <typename Scalar>
Tensor<Scalar> clamp(const Tensor<Scalar>& a, Scalar lo, Scalar hi) {
  require(lo < hi, "clamp: empty range");
  int ia = a.id();
  return a.tape()->emit(
      a.value().cwiseMax(lo).cwiseMin(hi), {ia},
      [ia, lo, hi](Tape<Scalar>& tp, int self) {
        const Matrix<Scalar>& x = tp.value(ia);
        Matrix<Scalar> g =
            ((x.array() > lo) && (x.array() < hi))
                .select(tp.grad_of(self),
                        Matrix<Scalar>::Zero(x.rows(), x.cols()));
        tp.add_grad(ia, g);
      });
}

// Row-wise softmax over masked logits. Masked columns get exactly zero
// probability (their logits are treated as -inf); requires at least one
// valid position.
template <typename Scalar>
Tensor<Scalar> masked_softmax(const Tensor<Scalar>& logits, const Mask& mask) {
  require(static_cast<Index>(mask.size()) == logits.cols(),
          "masked_softmax: mask length != logit columns");
  bool any = false;
  for (auto m : mask) any = any || (m != 0);
  require(any, "masked_softmax: all positions masked");
  const Matrix<Scalar>& x = logits.value();
  Matrix<Scalar> out = Matrix<Scalar>::Zero(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    for (Index c = 0; c < x.cols(); ++c)
      if (mask[c]) mx = std::max(mx, x(r, c));
    Scalar denom = Scalar(0);
    for (Index c = 0; c < x.cols(); ++c)
      if (mask[c]) denom += std::exp(x(r, c) - mx);
    for (Index c = 0; c < x.cols(); ++c)
      if (mask[c]) out(r, c) = std::exp(x(r, c) - mx) / denom;
  }
  int ix = logits.id();
  return logits.tape()->emit(
      std::move(out), {ix}, [ix](Tape<Scalar>& tp, int self) {
        const Matrix<Scalar>& y = tp.value(self);
        const Matrix<Scalar>& g = tp.grad_of(self);
        Matrix<Scalar> gx(y.rows(), y.cols());
        for (Index r = 0; r < y.rows(); ++r) {
          Scalar dot = y.row(r).dot(g.row(r));
          gx.row(r) = y.row(r).cwiseProduct(
              g.row(r) - Matrix<Scalar>::Constant(1, y.cols(), dot));
        }
        tp.add_grad(ix, gx);
      });
}

// Convex combination of rows: (1xL distribution) * (Lxh rows) -> 1xh.
template <typename Scalar>
Tensor<Scalar> weighted_sum(const Tensor<Scalar>& weights,
                            const Tensor<Scalar>& rows) {
  require(weights.rows() == 1, "weighted_sum: weights must be a row vector");
  require(weights.cols() == rows.rows(),
          "weighted_sum: weight length != row count");
  return matmul(weights, rows);
}

// x * W + b with b broadcast along rows.
template <typename Scalar>
Tensor<Scalar> affine(const Tensor<Scalar>& x, const Tensor<Scalar>& w,
                      const Tensor<Scalar>& b) {
  Tape<Scalar>& t = detail::same_tape(x, w);
  require(b.tape() == &t, "affine: operands on different tapes");
  require(x.cols() == w.rows(), "affine: input width " +
                                    shape_str(x.value()) +
                                    " does not match weight " +
                                    shape_str(w.value()));
  require(b.rows() == 1 && b.cols() == w.cols(),
          "affine: bias must be 1x" + std::to_string(w.cols()));
  Matrix<Scalar> out = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  int ix = x.id(), iw = w.id(), ib = b.id();
  return t.emit(std::move(out), {ix, iw, ib},
                [ix, iw, ib](Tape<Scalar>& tp, int self) {
                  const Matrix<Scalar>& g = tp.grad_of(self);
                  if (tp.tracked(ix))
                    tp.add_grad(ix, g * tp.value(iw).transpose());
                  if (tp.tracked(iw))
                    tp.add_grad(iw, tp.value(ix).transpose() * g);
                  if (tp.tracked(ib)) tp.add_grad(ib, g.colwise().sum());
                });
}

// Per-row normalization with learnable gain/bias (both 1xN).
template <typename Scalar>
Tensor<Scalar> layer_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gain,
                          const Tensor<Scalar>& bias,
                          Scalar eps = Scalar(1e-5)) {
  Tape<Scalar>& t = detail::same_tape(x, gain);
  require(bias.tape() == &t, "layer_norm: operands on different tapes");
  require(gain.rows() == 1 && gain.cols() == x.cols() && bias.rows() == 1 &&
              bias.cols() == x.cols(),
          "layer_norm: gain/bias must be 1x" + std::to_string(x.cols()));
  const Matrix<Scalar>& xv = x.value();
  const Index n = xv.cols();
  Matrix<Scalar> out(xv.rows(), n);
  for (Index r = 0; r < xv.rows(); ++r) {
    Scalar mu = xv.row(r).mean();
    auto u = xv.row(r).array() - mu;
    Scalar var = u.square().mean();
    Scalar inv = Scalar(1) / std::sqrt(var + eps);
    out.row(r) = ((u * inv).matrix().cwiseProduct(gain.value().row(0))) +
                 bias.value().row(0);
  }
  int ix = x.id(), ig = gain.id(), ib = bias.id();
  return t.emit(std::move(out), {ix, ig, ib},
                [ix, ig, ib, eps](Tape<Scalar>& tp, int self) {
                  const Matrix<Scalar>& xv = tp.value(ix);
                  const Matrix<Scalar>& gv = tp.value(ig);
                  const Matrix<Scalar>& g = tp.grad_of(self);
                  const Index n = xv.cols();
                  Matrix<Scalar> gx = Matrix<Scalar>::Zero(xv.rows(), n);
                  Matrix<Scalar> ggain = Matrix<Scalar>::Zero(1, n);
                  Matrix<Scalar> gbias = Matrix<Scalar>::Zero(1, n);
                  for (Index r = 0; r < xv.rows(); ++r) {
                    Scalar mu = xv.row(r).mean();
                    Eigen::Array<Scalar, 1, Eigen::Dynamic> u =
                        xv.row(r).array() - mu;
                    Scalar var = u.square().mean();
                    Scalar inv = Scalar(1) / std::sqrt(var + eps);
                    Eigen::Array<Scalar, 1, Eigen::Dynamic> xhat = u * inv;
                    Eigen::Array<Scalar, 1, Eigen::Dynamic> gy =
                        g.row(r).array() * gv.row(0).array();
                    Scalar m1 = gy.mean();
                    Scalar m2 = (gy * xhat).mean();
                    gx.row(r) = ((gy - m1 - xhat * m2) * inv).matrix();
                    ggain.row(0).array() += g.row(r).array() * xhat;
                    gbias.row(0) += g.row(r);
                  }
                  if (tp.tracked(ix)) tp.add_grad(ix, gx);
                  if (tp.tracked(ig)) tp.add_grad(ig, ggain);
                  if (tp.tracked(ib)) tp.add_grad(ib, gbias);
                });
}

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& a) {
  int ia = a.id();
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  Index rows = a.rows(), cols = a.cols();
  return a.tape()->emit(std::move(out), {ia},
                        [ia, rows, cols](Tape<Scalar>& tp, int self) {
                          tp.add_grad(ia, Matrix<Scalar>::Constant(
                                              rows, cols,
                                              tp.grad_of(self)(0, 0)));
                        });
}

template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& a) {
  return scale(sum(a), Scalar(1) / static_cast<Scalar>(a.size()));
}

// Multiply every entry by a 1x1 tensor.
template <typename Scalar>
Tensor<Scalar> scale_by(const Tensor<Scalar>& x, const Tensor<Scalar>& s) {
  Tape<Scalar>& t = detail::same_tape(x, s);
  require(s.rows() == 1 && s.cols() == 1, "scale_by: scale must be 1x1");
  int ix = x.id(), is = s.id();
  return t.emit(x.value() * s.value()(0, 0), {ix, is},
                [ix, is](Tape<Scalar>& tp, int self) {
                  const Matrix<Scalar>& g = tp.grad_of(self);
                  if (tp.tracked(ix))
                    tp.add_grad(ix, g * tp.value(is)(0, 0));
                  if (tp.tracked(is)) {
                    Matrix<Scalar> gs(1, 1);
                    gs(0, 0) = g.cwiseProduct(tp.value(ix)).sum();
                    tp.add_grad(is, gs);
                  }
                });
}

// Add a 1x1 tensor to every entry.
template <typename Scalar>
Tensor<Scalar> shift_by(const Tensor<Scalar>& x, const Tensor<Scalar>& s) {
  Tape<Scalar>& t = detail::same_tape(x, s);
  require(s.rows() == 1 && s.cols() == 1, "shift_by: shift must be 1x1");
  int ix = x.id(), is = s.id();
  return t.emit(
      (x.value().array() + s.value()(0, 0)).matrix(), {ix, is},
      [ix, is](Tape<Scalar>& tp, int self) {
        const Matrix<Scalar>& g = tp.grad_of(self);
        if (tp.tracked(ix)) tp.add_grad(ix, g);
        if (tp.tracked(is)) {
          Matrix<Scalar> gs(1, 1);
          gs(0, 0) = g.sum();
          tp.add_grad(is, gs);
        }
      });
}

// Select one entry as a 1x1 tensor.
template <typename Scalar>
Tensor<Scalar> select(const Tensor<Scalar>& a, Index r, Index c) {
  require(r >= 0 && r < a.rows() && c >= 0 && c < a.cols(),
          "select: index out of range");
  int ia = a.id();
  Index rows = a.rows(), cols = a.cols();
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value()(r, c);
  return a.tape()->emit(std::move(out), {ia},
                        [ia, r, c, rows, cols](Tape<Scalar>& tp, int self) {
                          Matrix<Scalar> g = Matrix<Scalar>::Zero(rows, cols);
                          g(r, c) = tp.grad_of(self)(0, 0);
                          tp.add_grad(ia, g);
                        });
}

// Inverted-dropout mask drawn from rng; identity when rate == 0.
template <typename Scalar>
Tensor<Scalar> dropout(const Tensor<Scalar>& x, double rate, Rng& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0, 1)");
  if (rate == 0.0) return x;
  Matrix<Scalar> m(x.rows(), x.cols());
  const Scalar keep = Scalar(1) / Scalar(1.0 - rate);
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c)
      m(r, c) = rng.uniform() < rate ? Scalar(0) : keep;
  return cmul(x, x.tape()->constant(std::move(m)));
}

template <typename Scalar>
Tensor<Scalar> operator+(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return add(a, b);
}
template <typename Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return sub(a, b);
}
template <typename Scalar>
Tensor<Scalar> operator*(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return matmul(a, b);
}
template <typename Scalar>
Tensor<Scalar> operator*(Scalar c, const Tensor<Scalar>& a) {
  return scale(a, c);
}

}  // namespace mcrnet
