#pragma once

// Reverse-mode automatic differentiation over dense matrices.
//
// Every node on the tape holds an Eigen matrix. Elementwise primitives follow
// numpy-style broadcasting restricted to dimensions of size 1, which lets the
// same generic kinematics code run on a scalar (1x1) or on a whole batch of
// frames laid out as a 1xF row.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mmcfit/errors.hpp"

namespace mmc::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix&)>;

  Tape() { nodes_.reserve(4096); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var variable(Matrix value) { return push(std::move(value), true, "variable", nullptr); }
  Var variable(double value) { return variable(Matrix::Constant(1, 1, value)); }
  Var constant(Matrix value) { return push(std::move(value), false, "constant", nullptr); }
  Var constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse.
  void backward(const Var& loss) {
    if (loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
    if (loss.rows() != 1 || loss.cols() != 1) throw ContractError("backward: loss must be 1x1");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    nodes_[loss.id()].grad = Matrix::Ones(1, 1);
    for (int i = loss.id(); i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.size() == 0) continue;
      current_op_ = n.op;
      // The closure may reallocate nothing: nodes are only appended in forward mode.
      n.backward(*this, n.grad);
    }
  }

  /// Gradient accumulated on `v` by the last backward(); zeros when untouched.
  Matrix grad(const Var& v) const {
    const Node& n = nodes_.at(v.id());
    if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  const Matrix& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  void set_check_finite(bool on) { check_finite_ = on; }
  bool check_finite() const { return check_finite_; }

  Var push(Matrix value, bool requires_grad, const char* op, Backward backward) {
    if (check_finite_ && !value.allFinite()) throw NonFiniteError(op, "forward");
    nodes_.push_back(Node{std::move(value), Matrix(), requires_grad, op,
                          requires_grad ? std::move(backward) : Backward()});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }

  /// Adds `g` into rows [offset, offset + g.size()) of a column node's gradient,
  /// reading g column-major.
  void accumulate_slice(int id, Index offset, const Matrix& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (check_finite_ && !g.allFinite()) throw NonFiniteError(current_op_, "backward");
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.grad.col(0).segment(offset, g.size()) += Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
  }

  /// Adds `g` into the block of a node's gradient starting at (r0, c0).
  void accumulate_block(int id, Index r0, Index c0, const Matrix& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (check_finite_ && !g.allFinite()) throw NonFiniteError(current_op_, "backward");
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.grad.block(r0, c0, g.rows(), g.cols()) += g;
  }

  void accumulate(int id, const Matrix& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (check_finite_ && !g.allFinite()) throw NonFiniteError(current_op_, "backward");
    if (g.rows() != n.value.rows() || g.cols() != n.value.cols())
      throw ContractError(std::string("gradient shape mismatch in ") + current_op_);
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad;
    const char* op;
    Backward backward;
  };

  std::vector<Node> nodes_;
  bool check_finite_ = true;
  const char* current_op_ = "";
};

inline const Matrix& Var::value() const { return tape_->value(id_); }

namespace detail {

inline Index broadcast_dim(Index a, Index b, const char* op) {
  if (a == b) return a;
  if (a == 1) return b;
  if (b == 1) return a;
  throw ContractError(std::string("incompatible shapes in ") + op);
}

inline Matrix expand(const Matrix& m, Index rows, Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  return m.replicate(rows / m.rows(), cols / m.cols());
}

inline Matrix reduce_to(const Matrix& g, Index rows, Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  Matrix out = g;
  if (rows == 1 && out.rows() != 1) out = out.colwise().sum().eval();
  if (cols == 1 && out.cols() != 1) out = out.rowwise().sum().eval();
  return out;
}

inline Tape* common_tape(const Var& a, const Var& b) {
  if (a.tape() != b.tape() || a.tape() == nullptr) throw ContractError("operands live on different tapes");
  return a.tape();
}

template <class Fn>
Matrix zip(const Matrix& a, const Matrix& b, Fn fn, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return fn(a.array(), b.array()).matrix();
  const Index r = broadcast_dim(a.rows(), b.rows(), op);
  const Index c = broadcast_dim(a.cols(), b.cols(), op);
  const Matrix ea = expand(a, r, c);
  const Matrix eb = expand(b, r, c);
  return fn(ea.array(), eb.array()).matrix();
}

// Unary elementwise op given value function and derivative-from-(input, output).
template <class F, class D>
Var unary(const Var& x, const char* op, F f, D dfdx) {
  Tape* t = x.tape();
  Matrix out = f(x.value().array()).matrix();
  const int xi = x.id();
  return t->push(std::move(out), t->requires_grad(xi), op, [xi, dfdx](Tape& tape, const Matrix& g) {
    // output value is not stored separately; recompute from input where needed
    const Matrix& in = tape.value(xi);
    tape.accumulate(xi, (g.array() * dfdx(in.array())).matrix());
  });
}

}  // namespace detail

// ---- binary elementwise -------------------------------------------------

inline Var operator+(const Var& a, const Var& b) {
  Tape* t = detail::common_tape(a, b);
  Matrix out = detail::zip(a.value(), b.value(), [](const auto& x, const auto& y) { return x + y; }, "add");
  const int ai = a.id(), bi = b.id();
  const bool rg = t->requires_grad(ai) || t->requires_grad(bi);
  return t->push(std::move(out), rg, "add", [ai, bi](Tape& tape, const Matrix& g) {
    const Matrix& av = tape.value(ai);
    const Matrix& bv = tape.value(bi);
    tape.accumulate(ai, detail::reduce_to(g, av.rows(), av.cols()));
    tape.accumulate(bi, detail::reduce_to(g, bv.rows(), bv.cols()));
  });
}

inline Var operator-(const Var& a, const Var& b) {
  Tape* t = detail::common_tape(a, b);
  Matrix out = detail::zip(a.value(), b.value(), [](const auto& x, const auto& y) { return x - y; }, "sub");
  const int ai = a.id(), bi = b.id();
  const bool rg = t->requires_grad(ai) || t->requires_grad(bi);
  return t->push(std::move(out), rg, "sub", [ai, bi](Tape& tape, const Matrix& g) {
    const Matrix& av = tape.value(ai);
    const Matrix& bv = tape.value(bi);
    tape.accumulate(ai, detail::reduce_to(g, av.rows(), av.cols()));
    tape.accumulate(bi, detail::reduce_to(-g, bv.rows(), bv.cols()));
  });
}

inline Var operator*(const Var& a, const Var& b) {
  Tape* t = detail::common_tape(a, b);
  Matrix out = detail::zip(a.value(), b.value(), [](const auto& x, const auto& y) { return x * y; }, "mul");
  const int ai = a.id(), bi = b.id();
  const bool rg = t->requires_grad(ai) || t->requires_grad(bi);
  return t->push(std::move(out), rg, "mul", [ai, bi](Tape& tape, const Matrix& g) {
    const Matrix& av = tape.value(ai);
    const Matrix& bv = tape.value(bi);
    auto prod = [](const auto& x, const auto& y) { return x * y; };
    if (tape.requires_grad(ai))
      tape.accumulate(ai, detail::reduce_to(detail::zip(g, bv, prod, "mul"), av.rows(), av.cols()));
    if (tape.requires_grad(bi))
      tape.accumulate(bi, detail::reduce_to(detail::zip(g, av, prod, "mul"), bv.rows(), bv.cols()));
  });
}

inline Var operator/(const Var& a, const Var& b) {
  Tape* t = detail::common_tape(a, b);
  Matrix out = detail::zip(a.value(), b.value(), [](const auto& x, const auto& y) { return x / y; }, "div");
  const int ai = a.id(), bi = b.id();
  const bool rg = t->requires_grad(ai) || t->requires_grad(bi);
  return t->push(std::move(out), rg, "div", [ai, bi](Tape& tape, const Matrix& g) {
    const Matrix& av = tape.value(ai);
    const Matrix& bv = tape.value(bi);
    if (tape.requires_grad(ai)) {
      Matrix ga = detail::zip(g, bv, [](const auto& x, const auto& y) { return x / y; }, "div");
      tape.accumulate(ai, detail::reduce_to(ga, av.rows(), av.cols()));
    }
    if (tape.requires_grad(bi)) {
      // d(a/b)/db = -a / b^2
      Matrix q = detail::zip(av, bv, [](const auto& x, const auto& y) { return -x / (y * y); }, "div");
      Matrix gb = detail::zip(g, q, [](const auto& x, const auto& y) { return x * y; }, "div");
      tape.accumulate(bi, detail::reduce_to(gb, bv.rows(), bv.cols()));
    }
  });
}

// ---- scalar-constant forms ---------------------------------------------

inline Var operator+(const Var& a, double c) {
  const int ai = a.id();
  Matrix out = (a.value().array() + c).matrix();
  return a.tape()->push(std::move(out), a.tape()->requires_grad(ai), "add_const",
                        [ai](Tape& tape, const Matrix& g) { tape.accumulate(ai, g); });
}
inline Var operator+(double c, const Var& a) { return a + c; }
inline Var operator-(const Var& a, double c) { return a + (-c); }

inline Var operator*(const Var& a, double c) {
  const int ai = a.id();
  Matrix out = a.value() * c;
  return a.tape()->push(std::move(out), a.tape()->requires_grad(ai), "scale",
                        [ai, c](Tape& tape, const Matrix& g) { tape.accumulate(ai, g * c); });
}
inline Var operator*(double c, const Var& a) { return a * c; }
inline Var operator/(const Var& a, double c) { return a * (1.0 / c); }
inline Var operator-(const Var& a) { return a * -1.0; }

inline Var operator-(double c, const Var& a) {
  const int ai = a.id();
  Matrix out = (c - a.value().array()).matrix();
  return a.tape()->push(std::move(out), a.tape()->requires_grad(ai), "rsub",
                        [ai](Tape& tape, const Matrix& g) { tape.accumulate(ai, -g); });
}

inline Var operator/(double c, const Var& a) {
  return detail::unary(
      a, "rdiv", [c](const auto& x) { return c / x; }, [c](const auto& x) { return -c / (x * x); });
}

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }

// ---- unary elementwise -------------------------------------------------

inline Var sin(const Var& x) {
  return detail::unary(x, "sin", [](const auto& v) { return v.sin(); }, [](const auto& v) { return v.cos(); });
}
inline Var cos(const Var& x) {
  return detail::unary(x, "cos", [](const auto& v) { return v.cos(); }, [](const auto& v) { return -v.sin(); });
}
inline Var tanh(const Var& x) {
  return detail::unary(
      x, "tanh", [](const auto& v) { return v.tanh(); },
      [](const auto& v) { return 1.0 - v.tanh().square(); });
}
inline Var exp(const Var& x) {
  return detail::unary(x, "exp", [](const auto& v) { return v.exp(); }, [](const auto& v) { return v.exp(); });
}
inline Var log(const Var& x) {
  return detail::unary(x, "log", [](const auto& v) { return v.log(); }, [](const auto& v) { return v.inverse(); });
}
inline Var sqrt(const Var& x) {
  return detail::unary(
      x, "sqrt", [](const auto& v) { return v.sqrt(); }, [](const auto& v) { return 0.5 / v.sqrt(); });
}
inline Var square(const Var& x) {
  return detail::unary(x, "square", [](const auto& v) { return v.square(); }, [](const auto& v) { return 2.0 * v; });
}

namespace detail {
template <class A>
auto sigmoid_array(const A& v) {
  return (1.0 + (-v).exp()).inverse();
}
}  // namespace detail

inline Var sigmoid(const Var& x) {
  return detail::unary(
      x, "sigmoid", [](const auto& v) { return detail::sigmoid_array(v); },
      [](const auto& v) {
        const Eigen::ArrayXXd s = detail::sigmoid_array(v);
        return (s * (1.0 - s)).eval();
      });
}

inline Var softplus(const Var& x) {
  return detail::unary(
      x, "softplus", [](const auto& v) { return (v.max(0.0) + (-v.abs()).exp().log1p()).eval(); },
      [](const auto& v) { return detail::sigmoid_array(v).eval(); });
}

inline Var silu(const Var& x) {
  return detail::unary(
      x, "silu", [](const auto& v) { return (v * detail::sigmoid_array(v)).eval(); },
      [](const auto& v) {
        const Eigen::ArrayXXd s = detail::sigmoid_array(v);
        return (s * (1.0 + v * (1.0 - s))).eval();
      });
}

/// Huber penalty expressed on a squared residual q = r^2 (q >= 0):
/// q/2 for r <= delta, delta*(r - delta/2) beyond. Smooth at q = 0.
inline Var huber_sq(const Var& q, double delta) {
  const double d2 = delta * delta;
  return detail::unary(
      q, "huber",
      [delta, d2](const auto& v) {
        return (v <= d2).select(0.5 * v, delta * (v.max(0.0).sqrt() - 0.5 * delta)).eval();
      },
      [delta, d2](const auto& v) {
        return (v <= d2).select(Eigen::ArrayXXd::Constant(v.rows(), v.cols(), 0.5),
                                0.5 * delta / v.max(d2).sqrt())
            .eval();
      });
}

// ---- reductions and structure ------------------------------------------

inline Var sum(const Var& x) {
  const int xi = x.id();
  const Index r = x.rows(), c = x.cols();
  return x.tape()->push(Matrix::Constant(1, 1, x.value().sum()), x.tape()->requires_grad(xi), "sum",
                        [xi, r, c](Tape& tape, const Matrix& g) {
                          tape.accumulate(xi, Matrix::Constant(r, c, g(0, 0)));
                        });
}

inline Var mean(const Var& x) { return sum(x) * (1.0 / static_cast<double>(x.value().size())); }

/// Weighted sum with a constant weight matrix of the same shape (or broadcastable).
inline Var weighted_sum(const Var& x, const Matrix& w) {
  const int xi = x.id();
  const Matrix we = detail::expand(w, x.rows(), x.cols());
  const double s = (x.value().array() * we.array()).sum();
  return x.tape()->push(Matrix::Constant(1, 1, s), x.tape()->requires_grad(xi), "weighted_sum",
                        [xi, we](Tape& tape, const Matrix& g) { tape.accumulate(xi, we * g(0, 0)); });
}

inline Var matmul(const Var& a, const Var& b) {
  Tape* t = detail::common_tape(a, b);
  if (a.cols() != b.rows()) throw ContractError("matmul: inner dimensions differ");
  Matrix out = a.value() * b.value();
  const int ai = a.id(), bi = b.id();
  const bool rg = t->requires_grad(ai) || t->requires_grad(bi);
  return t->push(std::move(out), rg, "matmul", [ai, bi](Tape& tape, const Matrix& g) {
    if (tape.requires_grad(ai)) tape.accumulate(ai, g * tape.value(bi).transpose());
    if (tape.requires_grad(bi)) tape.accumulate(bi, tape.value(ai).transpose() * g);
  });
}

/// Rectangular sub-block copy.
inline Var block(const Var& x, Index r0, Index c0, Index nr, Index nc) {
  if (r0 < 0 || c0 < 0 || r0 + nr > x.rows() || c0 + nc > x.cols()) throw ContractError("block: out of range");
  const int xi = x.id();
  Matrix out = x.value().block(r0, c0, nr, nc);
  return x.tape()->push(std::move(out), x.tape()->requires_grad(xi), "block",
                        [xi, r0, c0](Tape& tape, const Matrix& g) { tape.accumulate_block(xi, r0, c0, g); });
}

inline Var row(const Var& x, Index i) { return block(x, i, 0, 1, x.cols()); }

/// View a contiguous slice of a column vector as a column-major (rows x cols) matrix.
inline Var reshape_slice(const Var& x, Index offset, Index rows, Index cols) {
  if (x.cols() != 1) throw ContractError("reshape_slice: source must be a column vector");
  if (offset < 0 || offset + rows * cols > x.rows()) throw ContractError("reshape_slice: out of range");
  const int xi = x.id();
  Matrix out = Eigen::Map<const Matrix>(x.value().data() + offset, rows, cols);
  return x.tape()->push(std::move(out), x.tape()->requires_grad(xi), "reshape_slice",
                        [xi, offset](Tape& tape, const Matrix& g) { tape.accumulate_slice(xi, offset, g); });
}

/// Stack equally wide matrices vertically.
inline Var vstack(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("vstack: empty input");
  Tape* t = parts.front().tape();
  const Index c = parts.front().cols();
  Index r = 0;
  bool rg = false;
  std::vector<int> ids;
  std::vector<Index> heights;
  for (const Var& p : parts) {
    if (p.tape() != t || p.cols() != c) throw ContractError("vstack: mismatched operands");
    r += p.rows();
    rg = rg || t->requires_grad(p.id());
    ids.push_back(p.id());
    heights.push_back(p.rows());
  }
  Matrix out(r, c);
  Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return t->push(std::move(out), rg, "vstack", [ids, heights](Tape& tape, const Matrix& g) {
    Index pos = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      tape.accumulate(ids[k], g.middleRows(pos, heights[k]));
      pos += heights[k];
    }
  });
}

// ---- whole-vector gradient driver --------------------------------------

struct ValueAndGradient {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

/// Evaluates `loss(tape, params)` (params is an N x 1 leaf) and its exact gradient.
template <class LossFn>
ValueAndGradient value_and_gradient(LossFn&& loss, const Eigen::VectorXd& at, bool check_finite = true) {
  Tape tape;
  tape.set_check_finite(check_finite);
  const Var x = tape.variable(Matrix(at));
  const Var l = loss(tape, x);
  tape.backward(l);
  return {l.scalar(), tape.grad(x).col(0)};
}

template <class LossFn>
Eigen::VectorXd gradient(LossFn&& loss, const Eigen::VectorXd& at) {
  return value_and_gradient(std::forward<LossFn>(loss), at).gradient;
}

}  // namespace mmc::ad
