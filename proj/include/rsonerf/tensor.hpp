#pragma once

// Dense tensors on a reverse-mode differentiation tape, plus Adam.
// The tape is define-by-run: it is rebuilt every training step and holds a
// value per node, so node indices are topologically ordered by construction.
// Other modules (encodings, renderer) extend the op set through
// Tape::record with their own backward rules.

#include "rsonerf/core.hpp"

#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <utility>

namespace rsonerf::ad {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

// Inputs to exp() are clamped here before exponentiation; density heads
// otherwise overflow long before the optimizer can recover.
inline constexpr double kExpClamp = 15.0;

template <typename S>
struct Tensor {
  std::vector<Index> shape;
  ArrX<S> values;  // flat, row-major
  NodeId node = kNoNode;

  Tensor() = default;
  Tensor(std::vector<Index> shape_, ArrX<S> values_)
      : shape(std::move(shape_)), values(std::move(values_)) {
    Index n = 1;
    for (Index d : shape) {
      require(d > 0, "Tensor shape entries must be positive");
      n *= d;
    }
    require(n == values.size(),
            cat("Tensor shape/value mismatch: shape product ", n, " vs ",
                values.size(), " values"));
  }

  Index size() const { return values.size(); }
  Index rank() const { return static_cast<Index>(shape.size()); }
  Index rows() const { return shape.empty() ? 1 : shape[0]; }
  Index cols() const { return shape.empty() ? 1 : size() / shape[0]; }

  auto mat() const {
    return Eigen::Map<const MatX<S>>(values.data(), rows(), cols());
  }
  auto mat() { return Eigen::Map<MatX<S>>(values.data(), rows(), cols()); }

  S item() const {
    require(size() == 1, "item() needs a scalar tensor");
    return values[0];
  }

  static Tensor scalar(S v) {
    ArrX<S> a(1);
    a[0] = v;
    return Tensor({1}, std::move(a));
  }
  static Tensor zeros(std::vector<Index> shape_) {
    Index n = 1;
    for (Index d : shape_) n *= d;
    return Tensor(std::move(shape_), ArrX<S>::Zero(n));
  }
  static Tensor full(std::vector<Index> shape_, S v) {
    Index n = 1;
    for (Index d : shape_) n *= d;
    return Tensor(std::move(shape_), ArrX<S>::Constant(n, v));
  }
  static Tensor from_mat(const MatX<S>& m) {
    return Tensor({m.rows(), m.cols()},
                  Eigen::Map<const ArrX<S>>(m.data(), m.size()));
  }
  static Tensor from_vec(const VecX<S>& v) {
    return Tensor({v.size()}, v.array());
  }
};

template <typename S>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const ArrX<S>& upstream)>;

  // Leaf whose gradient nobody asks for (targets, encodings of directions).
  Tensor<S> constant(Tensor<S> t) {
    t.node = push(t, {}, nullptr, false);
    return t;
  }

  // Leaf that accumulates gradient (network weights, table entries).
  Tensor<S> parameter(Tensor<S> t) {
    t.node = push(t, {}, nullptr, true);
    return t;
  }

  // Extension point for custom ops. `backward` receives the flat upstream
  // gradient of the recorded value and must accumulate into the parents.
  NodeId record(Tensor<S> value, std::vector<NodeId> parents, BackwardFn backward) {
    bool needs = false;
    for (NodeId p : parents) needs = needs || requires_grad(p);
    return push(std::move(value), std::move(parents), needs ? std::move(backward) : nullptr,
                needs);
  }

  const Tensor<S>& value(NodeId id) const { return nodes_[check(id)].value; }
  bool requires_grad(NodeId id) const { return nodes_[check(id)].requires_grad; }
  Index node_count() const { return static_cast<Index>(nodes_.size()); }

  // Reverse pass from a scalar loss. Returns one flat gradient per node id;
  // untouched nodes keep empty arrays (interpreted as zero).
  std::vector<ArrX<S>> backward(NodeId loss) {
    require(loss >= 0 && loss < node_count(), "backward: loss node not on tape");
    require(value(loss).size() == 1, "backward: loss must be scalar");
    grads_.assign(nodes_.size(), ArrX<S>());
    grads_[loss] = ArrX<S>::Ones(1);
    for (NodeId id = loss; id >= 0; --id) {
      if (grads_[id].size() == 0) continue;
      if (nodes_[id].backward) nodes_[id].backward(*this, grads_[id]);
    }
    return std::move(grads_);
  }

  // Gradient lookup helper honoring the zero-for-unreached contract.
  static Tensor<S> grad_of(const std::vector<ArrX<S>>& grads, const Tensor<S>& t) {
    require(t.node != kNoNode, "grad_of: tensor is not on the tape");
    if (t.node < static_cast<NodeId>(grads.size()) && grads[t.node].size() > 0)
      return Tensor<S>(t.shape, grads[t.node]);
    return Tensor<S>::zeros(t.shape);
  }

  // Called by backward rules.
  template <typename Expr>
  void accumulate(NodeId id, const Expr& flat) {
    ArrX<S>& g = grads_[check(id)];
    if (g.size() == 0)
      g = flat;
    else
      g += flat;
  }
  template <typename Expr>
  void accumulate_mat(NodeId id, const Expr& expr) {
    MatX<S> m = expr;
    accumulate(id, Eigen::Map<const ArrX<S>>(m.data(), m.size()));
  }

  auto upstream_mat(const ArrX<S>& up, NodeId like) const {
    const Tensor<S>& v = value(like);
    return Eigen::Map<const MatX<S>>(up.data(), v.rows(), v.cols());
  }

  // Materializes a tensor as a tape node if it is not one already.
  NodeId ensure(const Tensor<S>& t) {
    if (t.node != kNoNode) {
      require(t.node < node_count(), "tensor references a node beyond this tape");
      return t.node;
    }
    return push(t, {}, nullptr, false);
  }

 private:
  struct Node {
    Tensor<S> value;
    std::vector<NodeId> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };

  NodeId check(NodeId id) const {
    require(id >= 0 && id < node_count(), "node id out of range");
    return id;
  }

  NodeId push(Tensor<S> value, std::vector<NodeId> parents, BackwardFn backward,
              bool requires_grad) {
    value.node = static_cast<NodeId>(nodes_.size());
    nodes_.push_back(Node{std::move(value), std::move(parents), std::move(backward),
                          requires_grad});
    return nodes_.back().value.node;
  }

  std::vector<Node> nodes_;
  std::vector<ArrX<S>> grads_;
};

// ---------------------------------------------------------------------------
// Ops. Each returns the forward value with its node id set and records the
// exact backward rule on the tape.

namespace detail {
template <typename S>
auto as_mat(const ArrX<S>& flat, Index rows, Index cols) {
  return Eigen::Map<const MatX<S>>(flat.data(), rows, cols);
}
}  // namespace detail

template <typename S>
Tensor<S> matmul(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul expects rank-2 tensors");
  require(a.cols() == b.rows(),
          cat("matmul dimension mismatch: [", a.rows(), "x", a.cols(), "] x [",
              b.rows(), "x", b.cols(), "]"));
  const NodeId ia = tape.ensure(a), ib = tape.ensure(b);
  const Index m = a.rows(), n = b.cols();
  Tensor<S> out = Tensor<S>::from_mat(tape.value(ia).mat() * tape.value(ib).mat());
  out.node = tape.record(out, {ia, ib},
                         [ia, ib, m, n](Tape<S>& t, const ArrX<S>& up) {
                           const auto dC = detail::as_mat<S>(up, m, n);
                           if (t.requires_grad(ia))
                             t.accumulate_mat(ia, dC * t.value(ib).mat().transpose());
                           if (t.requires_grad(ib))
                             t.accumulate_mat(ib, t.value(ia).mat().transpose() * dC);
                         });
  return out;
}

template <typename S>
Tensor<S> add(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b) {
  require(a.shape == b.shape, cat("add shape mismatch: ", a.size(), " vs ", b.size()));
  const NodeId ia = tape.ensure(a), ib = tape.ensure(b);
  Tensor<S> out(a.shape, tape.value(ia).values + tape.value(ib).values);
  out.node = tape.record(out, {ia, ib}, [ia, ib](Tape<S>& t, const ArrX<S>& up) {
    if (t.requires_grad(ia)) t.accumulate(ia, up);
    if (t.requires_grad(ib)) t.accumulate(ib, up);
  });
  return out;
}

template <typename S>
Tensor<S> sub(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b) {
  require(a.shape == b.shape, cat("sub shape mismatch: ", a.size(), " vs ", b.size()));
  const NodeId ia = tape.ensure(a), ib = tape.ensure(b);
  Tensor<S> out(a.shape, tape.value(ia).values - tape.value(ib).values);
  out.node = tape.record(out, {ia, ib}, [ia, ib](Tape<S>& t, const ArrX<S>& up) {
    if (t.requires_grad(ia)) t.accumulate(ia, up);
    if (t.requires_grad(ib)) t.accumulate(ib, (-up).eval());
  });
  return out;
}

template <typename S>
Tensor<S> mul(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b) {
  require(a.shape == b.shape, cat("mul shape mismatch: ", a.size(), " vs ", b.size()));
  const NodeId ia = tape.ensure(a), ib = tape.ensure(b);
  Tensor<S> out(a.shape, tape.value(ia).values * tape.value(ib).values);
  out.node = tape.record(out, {ia, ib}, [ia, ib](Tape<S>& t, const ArrX<S>& up) {
    if (t.requires_grad(ia)) t.accumulate(ia, (up * t.value(ib).values).eval());
    if (t.requires_grad(ib)) t.accumulate(ib, (up * t.value(ia).values).eval());
  });
  return out;
}

template <typename S>
Tensor<S> scale(Tape<S>& tape, const Tensor<S>& a, S factor) {
  const NodeId ia = tape.ensure(a);
  Tensor<S> out(a.shape, (tape.value(ia).values * factor).eval());
  out.node = tape.record(out, {ia}, [ia, factor](Tape<S>& t, const ArrX<S>& up) {
    if (t.requires_grad(ia)) t.accumulate(ia, (up * factor).eval());
  });
  return out;
}

// x: [R x C], bias: rank-1 [C], broadcast over rows.
template <typename S>
Tensor<S> add_bias(Tape<S>& tape, const Tensor<S>& x, const Tensor<S>& bias) {
  require(bias.rank() == 1 && bias.size() == x.cols(),
          cat("add_bias: bias length ", bias.size(), " vs ", x.cols(), " columns"));
  const NodeId ix = tape.ensure(x), ib = tape.ensure(bias);
  const Index r = x.rows(), c = x.cols();
  MatX<S> y = tape.value(ix).mat();
  y.rowwise() += Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>(
      tape.value(ib).values.data(), c);
  Tensor<S> out({r, c}, Eigen::Map<const ArrX<S>>(y.data(), y.size()));
  out.node = tape.record(out, {ix, ib}, [ix, ib, r, c](Tape<S>& t, const ArrX<S>& up) {
    if (t.requires_grad(ix)) t.accumulate(ix, up);
    if (t.requires_grad(ib)) {
      VecX<S> db = detail::as_mat<S>(up, r, c).colwise().sum().transpose();
      t.accumulate(ib, db.array());
    }
  });
  return out;
}

enum class Activation { Relu, Sigmoid, Softplus, Exp };

template <typename S>
Tensor<S> activation(Tape<S>& tape, const Tensor<S>& x, Activation kind) {
  const NodeId ix = tape.ensure(x);
  const ArrX<S>& v = tape.value(ix).values;
  const S clamp = static_cast<S>(kExpClamp);
  ArrX<S> y;
  switch (kind) {
    case Activation::Relu:
      y = v.max(S(0));
      break;
    case Activation::Sigmoid:
      y = (v >= S(0)).select(S(1) / (S(1) + (-v).exp()), v.exp() / (S(1) + v.exp()));
      break;
    case Activation::Softplus:
      y = v.max(S(0)) + (S(1) + (-v.abs()).exp()).log();
      break;
    case Activation::Exp:
      y = v.min(clamp).exp();
      break;
  }
  Tensor<S> out(x.shape, std::move(y));
  const NodeId iy = tape.record(
      out, {ix}, [ix, kind, clamp](Tape<S>& t, const ArrX<S>& up) {
        if (!t.requires_grad(ix)) return;
        const ArrX<S>& v = t.value(ix).values;
        switch (kind) {
          case Activation::Relu:
            t.accumulate(ix, (up * (v > S(0)).template cast<S>()).eval());
            break;
          case Activation::Sigmoid: {
            ArrX<S> s =
                (v >= S(0)).select(S(1) / (S(1) + (-v).exp()), v.exp() / (S(1) + v.exp()));
            t.accumulate(ix, (up * s * (S(1) - s)).eval());
            break;
          }
          case Activation::Softplus: {
            ArrX<S> s =
                (v >= S(0)).select(S(1) / (S(1) + (-v).exp()), v.exp() / (S(1) + v.exp()));
            t.accumulate(ix, (up * s).eval());
            break;
          }
          case Activation::Exp: {
            ArrX<S> d = (v <= clamp).select(v.min(clamp).exp(), ArrX<S>::Zero(v.size()));
            t.accumulate(ix, (up * d).eval());
            break;
          }
        }
      });
  out.node = iy;
  return out;
}

template <typename S>
Tensor<S> relu(Tape<S>& t, const Tensor<S>& x) { return activation(t, x, Activation::Relu); }
template <typename S>
Tensor<S> sigmoid(Tape<S>& t, const Tensor<S>& x) { return activation(t, x, Activation::Sigmoid); }
template <typename S>
Tensor<S> softplus(Tape<S>& t, const Tensor<S>& x) { return activation(t, x, Activation::Softplus); }
template <typename S>
Tensor<S> exp_clamped(Tape<S>& t, const Tensor<S>& x) { return activation(t, x, Activation::Exp); }

template <typename S>
Tensor<S> sum(Tape<S>& tape, const Tensor<S>& x) {
  const NodeId ix = tape.ensure(x);
  const Index n = x.size();
  Tensor<S> out = Tensor<S>::scalar(tape.value(ix).values.sum());
  out.node = tape.record(out, {ix}, [ix, n](Tape<S>& t, const ArrX<S>& up) {
    if (t.requires_grad(ix)) t.accumulate(ix, ArrX<S>::Constant(n, up[0]));
  });
  return out;
}

template <typename S>
Tensor<S> mean(Tape<S>& tape, const Tensor<S>& x) {
  const NodeId ix = tape.ensure(x);
  const Index n = x.size();
  Tensor<S> out = Tensor<S>::scalar(tape.value(ix).values.mean());
  out.node = tape.record(out, {ix}, [ix, n](Tape<S>& t, const ArrX<S>& up) {
    if (t.requires_grad(ix))
      t.accumulate(ix, ArrX<S>::Constant(n, up[0] / static_cast<S>(n)));
  });
  return out;
}

template <typename S>
Tensor<S> mse_loss(Tape<S>& tape, const Tensor<S>& pred, const Tensor<S>& target) {
  require(pred.shape == target.shape,
          cat("mse_loss shape mismatch: ", pred.rows(), "x", pred.cols(), " vs ",
              target.rows(), "x", target.cols()));
  const NodeId ip = tape.ensure(pred), it = tape.ensure(target);
  const Index n = pred.size();
  ArrX<S> diff = tape.value(ip).values - tape.value(it).values;
  Tensor<S> out = Tensor<S>::scalar(diff.square().sum() / static_cast<S>(n));
  out.node = tape.record(out, {ip, it}, [ip, it, n](Tape<S>& t, const ArrX<S>& up) {
    const ArrX<S> d = (t.value(ip).values - t.value(it).values) *
                      (S(2) * up[0] / static_cast<S>(n));
    if (t.requires_grad(ip)) t.accumulate(ip, d);
    if (t.requires_grad(it)) t.accumulate(it, (-d).eval());
  });
  return out;
}

template <typename S>
Tensor<S> concat_cols(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.rows() == b.rows(),
          cat("concat_cols: row mismatch ", a.rows(), " vs ", b.rows()));
  const NodeId ia = tape.ensure(a), ib = tape.ensure(b);
  const Index r = a.rows(), ca = a.cols(), cb = b.cols();
  MatX<S> y(r, ca + cb);
  y.leftCols(ca) = tape.value(ia).mat();
  y.rightCols(cb) = tape.value(ib).mat();
  Tensor<S> out = Tensor<S>::from_mat(y);
  out.node = tape.record(out, {ia, ib}, [ia, ib, r, ca, cb](Tape<S>& t, const ArrX<S>& up) {
    const auto dY = detail::as_mat<S>(up, r, ca + cb);
    if (t.requires_grad(ia)) t.accumulate_mat(ia, dY.leftCols(ca));
    if (t.requires_grad(ib)) t.accumulate_mat(ib, dY.rightCols(cb));
  });
  return out;
}

template <typename S>
Tensor<S> slice_cols(Tape<S>& tape, const Tensor<S>& x, Index begin, Index count) {
  require(x.rank() == 2 && begin >= 0 && count > 0 && begin + count <= x.cols(),
          cat("slice_cols out of range: [", begin, ", ", begin + count, ") of ",
              x.cols(), " columns"));
  const NodeId ix = tape.ensure(x);
  const Index r = x.rows(), c = x.cols();
  Tensor<S> out = Tensor<S>::from_mat(tape.value(ix).mat().middleCols(begin, count));
  out.node = tape.record(out, {ix}, [ix, r, c, begin, count](Tape<S>& t, const ArrX<S>& up) {
    if (!t.requires_grad(ix)) return;
    MatX<S> dX = MatX<S>::Zero(r, c);
    dX.middleCols(begin, count) = detail::as_mat<S>(up, r, count);
    t.accumulate_mat(ix, dX);
  });
  return out;
}

// Per-row scaling by a constant vector (deformation time masks).
template <typename S>
Tensor<S> row_scale(Tape<S>& tape, const Tensor<S>& x, const VecX<S>& w) {
  require(x.rank() == 2 && w.size() == x.rows(),
          cat("row_scale: weight length ", w.size(), " vs ", x.rows(), " rows"));
  const NodeId ix = tape.ensure(x);
  const Index r = x.rows(), c = x.cols();
  MatX<S> y = w.asDiagonal() * tape.value(ix).mat();
  Tensor<S> out = Tensor<S>::from_mat(y);
  out.node = tape.record(out, {ix}, [ix, r, c, w](Tape<S>& t, const ArrX<S>& up) {
    if (t.requires_grad(ix))
      t.accumulate_mat(ix, w.asDiagonal() * detail::as_mat<S>(up, r, c));
  });
  return out;
}

// clamp to [0, 1]; gradient passes through on the closed interval so the
// identity deformation keeps full gradient flow.
template <typename S>
Tensor<S> clamp01(Tape<S>& tape, const Tensor<S>& x) {
  const NodeId ix = tape.ensure(x);
  Tensor<S> out(x.shape, tape.value(ix).values.max(S(0)).min(S(1)));
  out.node = tape.record(out, {ix}, [ix](Tape<S>& t, const ArrX<S>& up) {
    if (!t.requires_grad(ix)) return;
    const ArrX<S>& v = t.value(ix).values;
    t.accumulate(ix, (up * ((v >= S(0)) && (v <= S(1))).template cast<S>()).eval());
  });
  return out;
}

// ---------------------------------------------------------------------------
// Adam with bias correction. One (m, v) slot per parameter tensor.

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename S>
struct AdamState {
  AdamConfig cfg;
  std::int64_t step_count = 0;
  std::vector<ArrX<S>> m, v;

  explicit AdamState(AdamConfig c = {}) : cfg(c) {
    require(c.learning_rate > 0, "Adam learning_rate must be positive");
    require(c.beta1 > 0 && c.beta1 < 1 && c.beta2 > 0 && c.beta2 < 1,
            "Adam betas must lie in (0,1)");
    require(c.epsilon > 0, "Adam epsilon must be positive");
  }

  template <typename Params>
  void ensure_slots(const Params& params) {
    if (!m.empty()) return;
    for (const auto* p : params) {
      m.push_back(ArrX<S>::Zero(p->size()));
      v.push_back(ArrX<S>::Zero(p->size()));
    }
  }
};

// In-place bias-corrected update; `grads` must align with `params`.
template <typename S>
void adam_step(std::vector<Tensor<S>*>& params, const std::vector<ArrX<S>>& grads,
               AdamState<S>& state) {
  require(params.size() == grads.size(),
          cat("adam_step: ", params.size(), " params vs ", grads.size(), " grads"));
  state.ensure_slots(params);
  require(state.m.size() == params.size(), "adam_step: state tracks a different set");
  state.step_count += 1;
  const S lr = static_cast<S>(state.cfg.learning_rate);
  const S b1 = static_cast<S>(state.cfg.beta1), b2 = static_cast<S>(state.cfg.beta2);
  const S eps = static_cast<S>(state.cfg.epsilon);
  const S c1 = S(1) - static_cast<S>(std::pow(state.cfg.beta1, double(state.step_count)));
  const S c2 = S(1) - static_cast<S>(std::pow(state.cfg.beta2, double(state.step_count)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<S>& p = *params[i];
    const ArrX<S>& g = grads[i];
    require(g.size() == p.size() || g.size() == 0,
            cat("adam_step: grad size ", g.size(), " vs param size ", p.size()));
    ArrX<S>& mi = state.m[i];
    ArrX<S>& vi = state.v[i];
    // an empty gradient means the parameter never reached the loss: zero
    if (g.size() == 0) {
      mi *= b1;
      vi *= b2;
    } else {
      mi = b1 * mi + (S(1) - b1) * g;
      vi = b2 * vi + (S(1) - b2) * g.square();
    }
    p.values -= lr * (mi / c1) / ((vi / c2).sqrt() + eps);
  }
}

}  // namespace rsonerf::ad
