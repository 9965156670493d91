#include "spdgnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace spdgnn::ad {

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw Error("autodiff: use of an invalid Var");
  return *a.tape;
}

void check_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw Error("autodiff: operands live on different tapes");
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeMismatchError(std::string(op) + ": shape mismatch");
  }
}

bool is_scalar(const Matrix& m) { return m.rows() == 1 && m.cols() == 1; }

}  // namespace

// ---- scalar functions ------------------------------------------------------

ScalarFn exp_fn() {
  return {[](double x) { return std::exp(x); }, [](double x) { return std::exp(x); }, "exp"};
}
ScalarFn log_fn() {
  return {[](double x) { return std::log(x); }, [](double x) { return 1.0 / x; }, "log"};
}
ScalarFn sqrt_fn() {
  return {[](double x) { return std::sqrt(x); },
          [](double x) { return 0.5 / std::sqrt(x); },
          "sqrt"};
}
ScalarFn inv_sqrt_fn() {
  return {[](double x) { return 1.0 / std::sqrt(x); },
          [](double x) { return -0.5 / (x * std::sqrt(x)); },
          "inv_sqrt"};
}
ScalarFn relu_fn() {
  return {[](double x) { return x > 0.0 ? x : 0.0; },
          [](double x) { return x > 0.0 ? 1.0 : 0.0; },
          "relu"};
}
ScalarFn clamp_min_fn(double floor) {
  return {[floor](double x) { return x > floor ? x : floor; },
          [floor](double x) { return x > floor ? 1.0 : 0.0; },
          "clamp_min"};
}
ScalarFn tanh_fn() {
  return {[](double x) { return std::tanh(x); },
          [](double x) {
            const double t = std::tanh(x);
            return 1.0 - t * t;
          },
          "tanh"};
}
ScalarFn artanh_fn() {
  return {[](double x) { return std::atanh(x); },
          [](double x) { return 1.0 / (1.0 - x * x); },
          "artanh"};
}
ScalarFn recip_fn() {
  return {[](double x) { return 1.0 / x; }, [](double x) { return -1.0 / (x * x); }, "recip"};
}

// ---- Tape ------------------------------------------------------------------

int Tape::push(Matrix value, std::vector<int> parents, BackwardFn bw) {
#ifndef NDEBUG
  if (!value.allFinite()) {
    throw NonFiniteError("autodiff: forward op produced a non-finite value");
  }
#endif
  Node node;
  node.value = std::move(value);
  node.parents = std::move(parents);
  node.backward = std::move(bw);
  for (int p : node.parents) {
    if (nodes_[p].requires_grad) {
      node.requires_grad = true;
      break;
    }
  }
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::constant(Matrix v) {
  const int id = push(std::move(v), {}, nullptr);
  return Var{this, id};
}

Var Tape::param(Matrix v) {
  const int id = push(std::move(v), {}, nullptr);
  nodes_[id].requires_grad = true;
  return Var{this, id};
}

const Matrix& Tape::value(Var v) const { return nodes_.at(v.id).value; }

Matrix Tape::grad(Var v) const {
  if (!backward_done_) throw Error("Tape::grad: backward() has not been run");
  const Node& n = nodes_.at(v.id);
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(int id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw Error("Tape::backward: loss from another tape");
  if (backward_done_) {
    throw Error("Tape::backward: backward already run on this tape; re-record first");
  }
  const Node& ln = nodes_.at(loss.id);
  if (!is_scalar(ln.value)) {
    throw NotScalarLossError("Tape::backward: loss must be a 1x1 scalar");
  }
  backward_done_ = true;
  if (!ln.requires_grad) return;
  nodes_[loss.id].grad = Matrix::Ones(1, 1);
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, id);
  }
}

void Tape::clear() {
  nodes_.clear();
  backward_done_ = false;
}

// ---- primitives ------------------------------------------------------------

Var add(Var a, Var b) {
  Tape& t = tape_of(a);
  check_same_tape(a, b);
  const Matrix& va = t.value(a);
  const Matrix& vb = t.value(b);
  check_same_shape(va, vb, "add");
  int id = t.push(va + vb, {a.id, b.id}, [a, b](Tape& tp, int self) {
    const Matrix& g = tp.grad_at(self);
    tp.accumulate(a.id, g);
    tp.accumulate(b.id, g);
  });
  return Var{&t, id};
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a);
  check_same_tape(a, b);
  const Matrix& va = t.value(a);
  const Matrix& vb = t.value(b);
  check_same_shape(va, vb, "sub");
  int id = t.push(va - vb, {a.id, b.id}, [a, b](Tape& tp, int self) {
    const Matrix& g = tp.grad_at(self);
    tp.accumulate(a.id, g);
    tp.accumulate(b.id, -g);
  });
  return Var{&t, id};
}

Var scale(Var a, double c) {
  Tape& t = tape_of(a);
  int id = t.push(c * t.value(a), {a.id}, [a, c](Tape& tp, int self) {
    tp.accumulate(a.id, c * tp.grad_at(self));
  });
  return Var{&t, id};
}

Var add_const(Var a, double c) {
  Tape& t = tape_of(a);
  int id = t.push(t.value(a).array() + c, {a.id}, [a](Tape& tp, int self) {
    tp.accumulate(a.id, tp.grad_at(self));
  });
  return Var{&t, id};
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  check_same_tape(a, b);
  const Matrix& va = t.value(a);
  const Matrix& vb = t.value(b);
  if (va.cols() != vb.rows()) throw ShapeMismatchError("matmul: inner dimensions disagree");
  int id = t.push(va * vb, {a.id, b.id}, [a, b](Tape& tp, int self) {
    const Matrix& g = tp.grad_at(self);
    tp.accumulate(a.id, g * tp.value_at(b.id).transpose());
    tp.accumulate(b.id, tp.value_at(a.id).transpose() * g);
  });
  return Var{&t, id};
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  int id = t.push(t.value(a).transpose(), {a.id}, [a](Tape& tp, int self) {
    tp.accumulate(a.id, tp.grad_at(self).transpose());
  });
  return Var{&t, id};
}

Var hadamard(Var a, Var b) {
  Tape& t = tape_of(a);
  check_same_tape(a, b);
  const Matrix& va = t.value(a);
  const Matrix& vb = t.value(b);
  check_same_shape(va, vb, "hadamard");
  int id = t.push(va.cwiseProduct(vb), {a.id, b.id}, [a, b](Tape& tp, int self) {
    const Matrix& g = tp.grad_at(self);
    tp.accumulate(a.id, g.cwiseProduct(tp.value_at(b.id)));
    tp.accumulate(b.id, g.cwiseProduct(tp.value_at(a.id)));
  });
  return Var{&t, id};
}

Var relu(Var a) { return unary(a, relu_fn()); }

Var leaky_relu(Var a, double slope) {
  ScalarFn fn{[slope](double x) { return x > 0.0 ? x : slope * x; },
              [slope](double x) { return x > 0.0 ? 1.0 : slope; },
              "leaky_relu"};
  return unary(a, fn);
}

Var softmax(Var a, int axis) {
  Tape& t = tape_of(a);
  const Matrix& va = t.value(a);
  Matrix out(va.rows(), va.cols());
  if (axis == 1) {
    for (Eigen::Index r = 0; r < va.rows(); ++r) {
      const double m = va.row(r).maxCoeff();
      Eigen::ArrayXd e = (va.row(r).array() - m).exp();
      out.row(r) = e / e.sum();
    }
  } else if (axis == 0) {
    for (Eigen::Index c = 0; c < va.cols(); ++c) {
      const double m = va.col(c).maxCoeff();
      Eigen::ArrayXd e = (va.col(c).array() - m).exp();
      out.col(c) = e / e.sum();
    }
  } else {
    throw ShapeMismatchError("softmax: axis must be 0 or 1");
  }
  int id = t.push(out, {a.id}, [a, axis, out](Tape& tp, int self) {
    const Matrix& g = tp.grad_at(self);
    Matrix ga(out.rows(), out.cols());
    if (axis == 1) {
      for (Eigen::Index r = 0; r < out.rows(); ++r) {
        const double d = g.row(r).cwiseProduct(out.row(r)).sum();
        ga.row(r) = out.row(r).cwiseProduct((g.row(r).array() - d).matrix());
      }
    } else {
      for (Eigen::Index c = 0; c < out.cols(); ++c) {
        const double d = g.col(c).cwiseProduct(out.col(c)).sum();
        ga.col(c) = out.col(c).cwiseProduct((g.col(c).array() - d).matrix());
      }
    }
    tp.accumulate(a.id, ga);
  });
  return Var{&t, id};
}

Var trace(Var a) {
  Tape& t = tape_of(a);
  const Matrix& va = t.value(a);
  if (va.rows() != va.cols()) throw ShapeMismatchError("trace: input is not square");
  Matrix out(1, 1);
  out(0, 0) = va.trace();
  const Eigen::Index n = va.rows();
  int id = t.push(out, {a.id}, [a, n](Tape& tp, int self) {
    const double g = tp.grad_at(self)(0, 0);
    tp.accumulate(a.id, g * Matrix::Identity(n, n));
  });
  return Var{&t, id};
}

Var frobenius_norm_sq(Var a) {
  Tape& t = tape_of(a);
  Matrix out(1, 1);
  out(0, 0) = t.value(a).squaredNorm();
  int id = t.push(out, {a.id}, [a](Tape& tp, int self) {
    const double g = tp.grad_at(self)(0, 0);
    tp.accumulate(a.id, 2.0 * g * tp.value_at(a.id));
  });
  return Var{&t, id};
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  Matrix out(1, 1);
  out(0, 0) = t.value(a).sum();
  int id = t.push(out, {a.id}, [a](Tape& tp, int self) {
    const double g = tp.grad_at(self)(0, 0);
    const Matrix& va = tp.value_at(a.id);
    tp.accumulate(a.id, Matrix::Constant(va.rows(), va.cols(), g));
  });
  return Var{&t, id};
}

Var gather_rows(Var x, const std::vector<int>& idx) {
  Tape& t = tape_of(x);
  const Matrix& vx = t.value(x);
  Matrix out(static_cast<Eigen::Index>(idx.size()), vx.cols());
  for (size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= vx.rows()) {
      throw ShapeMismatchError("gather_rows: row index out of range");
    }
    out.row(static_cast<Eigen::Index>(k)) = vx.row(idx[k]);
  }
  int id = t.push(std::move(out), {x.id}, [x, idx](Tape& tp, int self) {
    const Matrix& g = tp.grad_at(self);
    const Matrix& vx = tp.value_at(x.id);
    Matrix gx = Matrix::Zero(vx.rows(), vx.cols());
    for (size_t k = 0; k < idx.size(); ++k) {
      gx.row(idx[k]) += g.row(static_cast<Eigen::Index>(k));
    }
    tp.accumulate(x.id, gx);
  });
  return Var{&t, id};
}

Var scatter_add_rows(Var e, const std::vector<int>& idx, int num_rows) {
  Tape& t = tape_of(e);
  const Matrix& ve = t.value(e);
  if (static_cast<Eigen::Index>(idx.size()) != ve.rows()) {
    throw ShapeMismatchError("scatter_add_rows: index count differs from row count");
  }
  Matrix out = Matrix::Zero(num_rows, ve.cols());
  for (size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= num_rows) {
      throw ShapeMismatchError("scatter_add_rows: row index out of range");
    }
    out.row(idx[k]) += ve.row(static_cast<Eigen::Index>(k));
  }
  int id = t.push(std::move(out), {e.id}, [e, idx](Tape& tp, int self) {
    const Matrix& g = tp.grad_at(self);
    const Matrix& ve = tp.value_at(e.id);
    Matrix ge(ve.rows(), ve.cols());
    for (size_t k = 0; k < idx.size(); ++k) {
      ge.row(static_cast<Eigen::Index>(k)) = g.row(idx[k]);
    }
    tp.accumulate(e.id, ge);
  });
  return Var{&t, id};
}

Var concat(Var a, Var b, int axis) {
  Tape& t = tape_of(a);
  check_same_tape(a, b);
  const Matrix& va = t.value(a);
  const Matrix& vb = t.value(b);
  Matrix out;
  if (axis == 0) {
    if (va.cols() != vb.cols()) throw ShapeMismatchError("concat: column counts differ");
    out.resize(va.rows() + vb.rows(), va.cols());
    out.topRows(va.rows()) = va;
    out.bottomRows(vb.rows()) = vb;
  } else if (axis == 1) {
    if (va.rows() != vb.rows()) throw ShapeMismatchError("concat: row counts differ");
    out.resize(va.rows(), va.cols() + vb.cols());
    out.leftCols(va.cols()) = va;
    out.rightCols(vb.cols()) = vb;
  } else {
    throw ShapeMismatchError("concat: axis must be 0 or 1");
  }
  const Eigen::Index ar = va.rows(), ac = va.cols();
  int id = t.push(std::move(out), {a.id, b.id}, [a, b, axis, ar, ac](Tape& tp, int self) {
    const Matrix& g = tp.grad_at(self);
    if (axis == 0) {
      tp.accumulate(a.id, g.topRows(ar));
      tp.accumulate(b.id, g.bottomRows(g.rows() - ar));
    } else {
      tp.accumulate(a.id, g.leftCols(ac));
      tp.accumulate(b.id, g.rightCols(g.cols() - ac));
    }
  });
  return Var{&t, id};
}

Var dropout(Var a, double p, std::mt19937_64& rng, bool train) {
  Tape& t = tape_of(a);
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: p must lie in [0, 1)");
  if (!train || p == 0.0) {
    int id = t.push(t.value(a), {a.id}, [a](Tape& tp, int self) {
      tp.accumulate(a.id, tp.grad_at(self));
    });
    return Var{&t, id};
  }
  const Matrix& va = t.value(a);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - p);
  Matrix mask(va.rows(), va.cols());
  for (Eigen::Index i = 0; i < va.rows(); ++i)
    for (Eigen::Index j = 0; j < va.cols(); ++j) mask(i, j) = u(rng) < p ? 0.0 : keep_scale;
  int id = t.push(va.cwiseProduct(mask), {a.id}, [a, mask](Tape& tp, int self) {
    tp.accumulate(a.id, tp.grad_at(self).cwiseProduct(mask));
  });
  return Var{&t, id};
}

Var dropout_sym(Var a, double p, std::mt19937_64& rng, bool train) {
  Tape& t = tape_of(a);
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout_sym: p must lie in [0, 1)");
  const Matrix& va = t.value(a);
  if (va.rows() != va.cols()) throw ShapeMismatchError("dropout_sym: input is not square");
  if (!train || p == 0.0) {
    int id = t.push(va, {a.id}, [a](Tape& tp, int self) {
      tp.accumulate(a.id, tp.grad_at(self));
    });
    return Var{&t, id};
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - p);
  Matrix mask(va.rows(), va.cols());
  for (Eigen::Index i = 0; i < va.rows(); ++i)
    for (Eigen::Index j = i; j < va.cols(); ++j) {
      const double m = u(rng) < p ? 0.0 : keep_scale;
      mask(i, j) = mask(j, i) = m;
    }
  int id = t.push(va.cwiseProduct(mask), {a.id}, [a, mask](Tape& tp, int self) {
    tp.accumulate(a.id, tp.grad_at(self).cwiseProduct(mask));
  });
  return Var{&t, id};
}

Var unary(Var a, const ScalarFn& fn) {
  Tape& t = tape_of(a);
  const Matrix& va = t.value(a);
  Matrix out = va.unaryExpr([&](double x) { return fn.f(x); });
  ScalarFn captured = fn;
  int id = t.push(std::move(out), {a.id}, [a, captured](Tape& tp, int self) {
    const Matrix& g = tp.grad_at(self);
    const Matrix& va = tp.value_at(a.id);
    Matrix d = va.unaryExpr([&](double x) { return captured.df(x); });
    tp.accumulate(a.id, g.cwiseProduct(d));
  });
  return Var{&t, id};
}

Var mul_scalar(Var a, Var s) {
  Tape& t = tape_of(a);
  check_same_tape(a, s);
  const Matrix& vs = t.value(s);
  if (!is_scalar(vs)) throw ShapeMismatchError("mul_scalar: multiplier must be 1x1");
  int id = t.push(vs(0, 0) * t.value(a), {a.id, s.id}, [a, s](Tape& tp, int self) {
    const Matrix& g = tp.grad_at(self);
    const double sv = tp.value_at(s.id)(0, 0);
    tp.accumulate(a.id, sv * g);
    Matrix gs(1, 1);
    gs(0, 0) = g.cwiseProduct(tp.value_at(a.id)).sum();
    tp.accumulate(s.id, gs);
  });
  return Var{&t, id};
}

Var sym(Var a) {
  Tape& t = tape_of(a);
  const Matrix& va = t.value(a);
  if (va.rows() != va.cols()) throw ShapeMismatchError("sym: input is not square");
  int id = t.push(0.5 * (va + va.transpose()), {a.id}, [a](Tape& tp, int self) {
    const Matrix& g = tp.grad_at(self);
    tp.accumulate(a.id, 0.5 * (g + g.transpose()));
  });
  return Var{&t, id};
}

Var add_rowvec(Var x, Var b) {
  Tape& t = tape_of(x);
  check_same_tape(x, b);
  const Matrix& vx = t.value(x);
  const Matrix& vb = t.value(b);
  if (vb.rows() != 1 || vb.cols() != vx.cols()) {
    throw ShapeMismatchError("add_rowvec: bias must be 1 x cols");
  }
  int id = t.push(vx.rowwise() + vb.row(0), {x.id, b.id}, [x, b](Tape& tp, int self) {
    const Matrix& g = tp.grad_at(self);
    tp.accumulate(x.id, g);
    tp.accumulate(b.id, g.colwise().sum());
  });
  return Var{&t, id};
}

Var upper_tri_vec(Var s) {
  Tape& t = tape_of(s);
  const Matrix& vs = t.value(s);
  if (vs.rows() != vs.cols()) throw ShapeMismatchError("upper_tri_vec: input is not square");
  const int n = static_cast<int>(vs.rows());
  Matrix out(1, n * (n + 1) / 2);
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) out(0, k++) = vs(i, j);
  int id = t.push(std::move(out), {s.id}, [s, n](Tape& tp, int self) {
    const Matrix& g = tp.grad_at(self);
    Matrix gs = Matrix::Zero(n, n);
    int k = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) gs(i, j) = g(0, k++);
    tp.accumulate(s.id, gs);
  });
  return Var{&t, id};
}

Var upper_tri_unvec(Var row, int n) {
  Tape& t = tape_of(row);
  const Matrix& vr = t.value(row);
  if (n < 1 || vr.rows() != 1 || vr.cols() != n * (n + 1) / 2)
    throw ShapeMismatchError("upper_tri_unvec: row must be 1 x n(n+1)/2");
  Matrix out(n, n);
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      out(i, j) = vr(0, k);
      out(j, i) = vr(0, k);
      ++k;
    }
  int id = t.push(std::move(out), {row.id}, [row, n](Tape& tp, int self) {
    const Matrix& g = tp.grad_at(self);
    Matrix gr(1, n * (n + 1) / 2);
    int k = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) gr(0, k++) = i == j ? g(i, i) : g(i, j) + g(j, i);
    tp.accumulate(row.id, gr);
  });
  return Var{&t, id};
}

Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw ShapeMismatchError("stack_rows: no rows");
  Tape& t = tape_of(rows[0]);
  const int cols = static_cast<int>(t.value(rows[0]).cols());
  Matrix out(static_cast<int>(rows.size()), cols);
  std::vector<int> parents;
  parents.reserve(rows.size());
  for (size_t k = 0; k < rows.size(); ++k) {
    check_same_tape(rows[0], rows[k]);
    const Matrix& v = t.value(rows[k]);
    if (v.rows() != 1 || v.cols() != cols)
      throw ShapeMismatchError("stack_rows: every row must be 1 x " + std::to_string(cols));
    out.row(static_cast<int>(k)) = v.row(0);
    parents.push_back(rows[k].id);
  }
  std::vector<int> ids = parents;
  int id = t.push(std::move(out), std::move(parents), [ids](Tape& tp, int self) {
    const Matrix& g = tp.grad_at(self);
    for (size_t k = 0; k < ids.size(); ++k) tp.accumulate(ids[k], g.row(static_cast<int>(k)));
  });
  return Var{&t, id};
}

Var slice_cols(Var a, int first, int count) {
  Tape& t = tape_of(a);
  const Matrix& va = t.value(a);
  if (first < 0 || count < 1 || first + count > va.cols())
    throw ShapeMismatchError("slice_cols: range outside matrix");
  const int rows = static_cast<int>(va.rows());
  const int total = static_cast<int>(va.cols());
  int id = t.push(va.middleCols(first, count), {a.id},
                  [a, first, count, rows, total](Tape& tp, int self) {
                    Matrix ga = Matrix::Zero(rows, total);
                    ga.middleCols(first, count) = tp.grad_at(self);
                    tp.accumulate(a.id, ga);
                  });
  return Var{&t, id};
}

Var weighted_sum(const std::vector<Var>& xs, const std::vector<double>& ws) {
  if (xs.empty() || xs.size() != ws.size()) {
    throw ShapeMismatchError("weighted_sum: empty input or weight count mismatch");
  }
  Tape& t = tape_of(xs[0]);
  std::vector<int> parents;
  parents.reserve(xs.size());
  Matrix out = ws[0] * t.value(xs[0]);
  parents.push_back(xs[0].id);
  for (size_t k = 1; k < xs.size(); ++k) {
    check_same_tape(xs[0], xs[k]);
    check_same_shape(out, t.value(xs[k]), "weighted_sum");
    out += ws[k] * t.value(xs[k]);
    parents.push_back(xs[k].id);
  }
  std::vector<int> ids = parents;
  std::vector<double> w = ws;
  int id = t.push(std::move(out), std::move(parents), [ids, w](Tape& tp, int self) {
    const Matrix& g = tp.grad_at(self);
    for (size_t k = 0; k < ids.size(); ++k) {
      tp.accumulate(ids[k], w[k] * g);
    }
  });
  return Var{&t, id};
}

Var weighted_sum_var(const std::vector<Var>& xs, const std::vector<Var>& ws) {
  if (xs.empty() || xs.size() != ws.size()) {
    throw ShapeMismatchError("weighted_sum_var: empty input or weight count mismatch");
  }
  Tape& t = tape_of(xs[0]);
  Matrix out = Matrix::Zero(t.value(xs[0]).rows(), t.value(xs[0]).cols());
  std::vector<int> parents;
  for (size_t k = 0; k < xs.size(); ++k) {
    check_same_tape(xs[0], xs[k]);
    check_same_tape(xs[0], ws[k]);
    if (!is_scalar(t.value(ws[k]))) {
      throw ShapeMismatchError("weighted_sum_var: weights must be 1x1");
    }
    check_same_shape(out, t.value(xs[k]), "weighted_sum_var");
    out += t.value(ws[k])(0, 0) * t.value(xs[k]);
  }
  std::vector<Var> xs_c = xs, ws_c = ws;
  for (const Var& v : xs) parents.push_back(v.id);
  for (const Var& v : ws) parents.push_back(v.id);
  int id = t.push(std::move(out), std::move(parents), [xs_c, ws_c](Tape& tp, int self) {
    const Matrix& g = tp.grad_at(self);
    for (size_t k = 0; k < xs_c.size(); ++k) {
      tp.accumulate(xs_c[k].id, tp.value_at(ws_c[k].id)(0, 0) * g);
      Matrix gw(1, 1);
      gw(0, 0) = g.cwiseProduct(tp.value_at(xs_c[k].id)).sum();
      tp.accumulate(ws_c[k].id, gw);
    }
  });
  return Var{&t, id};
}

Var segment_softmax(Var vals, const std::vector<int>& offsets) {
  Tape& t = tape_of(vals);
  const Matrix& v = t.value(vals);
  if (v.cols() != 1) throw ShapeMismatchError("segment_softmax: values must be Ex1");
  if (offsets.empty() || offsets.front() != 0 ||
      offsets.back() != static_cast<int>(v.rows())) {
    throw ShapeMismatchError("segment_softmax: bad offsets");
  }
  Matrix out(v.rows(), 1);
  for (size_t s = 0; s + 1 < offsets.size(); ++s) {
    const int lo = offsets[s], hi = offsets[s + 1];
    if (hi <= lo) continue;
    const double m = v.block(lo, 0, hi - lo, 1).maxCoeff();
    double z = 0.0;
    for (int e = lo; e < hi; ++e) z += std::exp(v(e, 0) - m);
    for (int e = lo; e < hi; ++e) out(e, 0) = std::exp(v(e, 0) - m) / z;
  }
  std::vector<int> offs = offsets;
  int id = t.push(out, {vals.id}, [vals, offs, out](Tape& tp, int self) {
    const Matrix& g = tp.grad_at(self);
    Matrix gv(out.rows(), 1);
    for (size_t s = 0; s + 1 < offs.size(); ++s) {
      const int lo = offs[s], hi = offs[s + 1];
      double d = 0.0;
      for (int e = lo; e < hi; ++e) d += g(e, 0) * out(e, 0);
      for (int e = lo; e < hi; ++e) gv(e, 0) = out(e, 0) * (g(e, 0) - d);
    }
    tp.accumulate(vals.id, gv);
  });
  return Var{&t, id};
}

Var eig_fn(Var s, const ScalarFn& fn) {
  Tape& t = tape_of(s);
  const Matrix& vs = t.value(s);
  if (vs.rows() != vs.cols()) throw NotSymmetricError("eig_fn: input is not square");
  if ((vs - vs.transpose()).norm() > 1e-9 * (1.0 + vs.norm())) {
    throw NotSymmetricError("eig_fn: input is not symmetric");
  }
  EigenDecomposition ed = detail::jacobi_eig(0.5 * (vs + vs.transpose()));
  const int n = static_cast<int>(ed.lambda.size());
  Vector flam(n), dflam(n);
  for (int i = 0; i < n; ++i) {
    flam(i) = fn.f(ed.lambda(i));
    dflam(i) = fn.df(ed.lambda(i));
  }
  Matrix out = ed.u * flam.asDiagonal() * ed.u.transpose();
  out = 0.5 * (out + out.transpose());
  ScalarFn captured = fn;
  int id = t.push(std::move(out), {s.id},
                  [s, ed, flam, dflam, captured, n](Tape& tp, int self) {
                    const Matrix& g = tp.grad_at(self);
                    Matrix b = ed.u.transpose() * g * ed.u;
                    Matrix k(n, n);
                    for (int i = 0; i < n; ++i) {
                      for (int j = 0; j < n; ++j) {
                        if (i == j) {
                          k(i, j) = dflam(i);
                        } else if (std::abs(ed.lambda(i) - ed.lambda(j)) < 1e-6) {
                          k(i, j) = captured.df(0.5 * (ed.lambda(i) + ed.lambda(j)));
                        } else {
                          k(i, j) = (flam(i) - flam(j)) / (ed.lambda(i) - ed.lambda(j));
                        }
                      }
                    }
                    Matrix gs = ed.u * k.cwiseProduct(b) * ed.u.transpose();
                    tp.accumulate(s.id, 0.5 * (gs + gs.transpose()));
                  });
  return Var{&t, id};
}

Var qr_q(Var a) {
  Tape& t = tape_of(a);
  const Matrix& va = t.value(a);
  if (va.rows() != va.cols()) throw ShapeMismatchError("qr_q: input is not square");
  auto [q, r] = detail::qr_pos(va);
  int id = t.push(q, {a.id}, [a, q, r](Tape& tp, int self) {
    const Matrix& g = tp.grad_at(self);
    Matrix b = q.transpose() * g;
    Matrix m = b - b.transpose();
    Matrix lower = m.triangularView<Eigen::StrictlyLower>();
    // grad = Q * tril(B - B^T, -1) * R^{-T}
    Matrix rhs = r.triangularView<Eigen::Upper>().solve(lower.transpose());
    tp.accumulate(a.id, q * rhs.transpose());
  });
  return Var{&t, id};
}

Var spmm(const std::vector<int>& rows, const std::vector<int>& cols,
         const std::vector<double>& w, Var h, int num_out_rows) {
  Tape& t = tape_of(h);
  if (rows.size() != cols.size() || rows.size() != w.size()) {
    throw ShapeMismatchError("spmm: triplet arrays differ in length");
  }
  const Matrix& vh = t.value(h);
  Matrix out = Matrix::Zero(num_out_rows, vh.cols());
  for (size_t e = 0; e < rows.size(); ++e) {
    out.row(rows[e]) += w[e] * vh.row(cols[e]);
  }
  std::vector<int> r = rows, c = cols;
  std::vector<double> ww = w;
  int id = t.push(std::move(out), {h.id}, [h, r, c, ww](Tape& tp, int self) {
    const Matrix& g = tp.grad_at(self);
    const Matrix& vh = tp.value_at(h.id);
    Matrix gh = Matrix::Zero(vh.rows(), vh.cols());
    for (size_t e = 0; e < r.size(); ++e) {
      gh.row(c[e]) += ww[e] * g.row(r[e]);
    }
    tp.accumulate(h.id, gh);
  });
  return Var{&t, id};
}

Var spmm_var(const std::vector<int>& rows, const std::vector<int>& cols, Var alpha, Var h,
             int num_out_rows) {
  Tape& t = tape_of(h);
  check_same_tape(alpha, h);
  const Matrix& va = t.value(alpha);
  if (va.cols() != 1 || static_cast<size_t>(va.rows()) != rows.size() ||
      rows.size() != cols.size()) {
    throw ShapeMismatchError("spmm_var: edge weight shape mismatch");
  }
  const Matrix& vh = t.value(h);
  Matrix out = Matrix::Zero(num_out_rows, vh.cols());
  for (size_t e = 0; e < rows.size(); ++e) {
    out.row(rows[e]) += va(static_cast<Eigen::Index>(e), 0) * vh.row(cols[e]);
  }
  std::vector<int> r = rows, c = cols;
  int id = t.push(std::move(out), {alpha.id, h.id}, [alpha, h, r, c](Tape& tp, int self) {
    const Matrix& g = tp.grad_at(self);
    const Matrix& va = tp.value_at(alpha.id);
    const Matrix& vh = tp.value_at(h.id);
    Matrix gh = Matrix::Zero(vh.rows(), vh.cols());
    Matrix ga(va.rows(), 1);
    for (size_t e = 0; e < r.size(); ++e) {
      gh.row(c[e]) += va(static_cast<Eigen::Index>(e), 0) * g.row(r[e]);
      ga(static_cast<Eigen::Index>(e), 0) = g.row(r[e]).dot(vh.row(c[e]));
    }
    tp.accumulate(h.id, gh);
    tp.accumulate(alpha.id, ga);
  });
  return Var{&t, id};
}

Var ball_project(Var x, double max_norm) {
  Tape& t = tape_of(x);
  const Matrix& vx = t.value(x);
  const double nrm = vx.norm();
  if (nrm <= max_norm) {
    int id = t.push(vx, {x.id}, [x](Tape& tp, int self) {
      tp.accumulate(x.id, tp.grad_at(self));
    });
    return Var{&t, id};
  }
  const double f = max_norm / nrm;
  int id = t.push(f * vx, {x.id}, [x, f, nrm](Tape& tp, int self) {
    const Matrix& g = tp.grad_at(self);
    const Matrix& vx = tp.value_at(x.id);
    const Matrix unit = vx / nrm;
    const double along = g.cwiseProduct(unit).sum();
    tp.accumulate(x.id, f * (g - along * unit));
  });
  return Var{&t, id};
}

// ---- losses ----------------------------------------------------------------

namespace {

Eigen::VectorXd as_vector(const Matrix& m, const char* op) {
  if (m.cols() == 1) return m.col(0);
  if (m.rows() == 1) return m.row(0).transpose();
  throw ShapeMismatchError(std::string(op) + ": input must be a vector");
}

}  // namespace

Var cross_entropy(Var logits, int label) {
  Tape& t = tape_of(logits);
  const Matrix& vl = t.value(logits);
  Eigen::VectorXd s = as_vector(vl, "cross_entropy");
  const int k = static_cast<int>(s.size());
  if (label < 0 || label >= k) throw LabelOutOfRangeError("cross_entropy: label out of range");
  const double m = s.maxCoeff();
  const double lse = m + std::log((s.array() - m).exp().sum());
  Matrix out(1, 1);
  out(0, 0) = lse - s(label);
  int id = t.push(out, {logits.id}, [logits, label](Tape& tp, int self) {
    const double g = tp.grad_at(self)(0, 0);
    const Matrix& vl = tp.value_at(logits.id);
    Eigen::VectorXd s = as_vector(vl, "cross_entropy");
    const double m = s.maxCoeff();
    Eigen::ArrayXd p = (s.array() - m).exp();
    p /= p.sum();
    p(label) -= 1.0;
    Matrix gl(vl.rows(), vl.cols());
    if (vl.cols() == 1) {
      gl.col(0) = g * p.matrix();
    } else {
      gl.row(0) = g * p.matrix().transpose();
    }
    tp.accumulate(logits.id, gl);
  });
  return Var{&t, id};
}

Var multi_margin(Var scores, int label, double margin) {
  Tape& t = tape_of(scores);
  const Matrix& vs = t.value(scores);
  Eigen::VectorXd s = as_vector(vs, "multi_margin");
  const int k = static_cast<int>(s.size());
  if (label < 0 || label >= k) throw LabelOutOfRangeError("multi_margin: label out of range");
  double loss = 0.0;
  for (int i = 0; i < k; ++i) {
    if (i == label) continue;
    loss += std::max(0.0, margin - s(label) + s(i));
  }
  loss /= static_cast<double>(k);
  Matrix out(1, 1);
  out(0, 0) = loss;
  int id = t.push(out, {scores.id}, [scores, label, margin, k](Tape& tp, int self) {
    const double g = tp.grad_at(self)(0, 0);
    const Matrix& vs = tp.value_at(scores.id);
    Eigen::VectorXd s = as_vector(vs, "multi_margin");
    Eigen::VectorXd gs = Eigen::VectorXd::Zero(k);
    for (int i = 0; i < k; ++i) {
      if (i == label) continue;
      if (margin - s(label) + s(i) > 0.0) {
        gs(i) += g / k;
        gs(label) -= g / k;
      }
    }
    Matrix gm(vs.rows(), vs.cols());
    if (vs.cols() == 1) {
      gm.col(0) = gs;
    } else {
      gm.row(0) = gs.transpose();
    }
    tp.accumulate(scores.id, gm);
  });
  return Var{&t, id};
}

// ---- composites -------------------------------------------------------------

Var dot(Var a, Var b) { return sum(hadamard(a, b)); }

Var mean(const std::vector<Var>& xs) {
  if (xs.empty()) throw EmptyGraphError("mean: empty input");
  std::vector<double> w(xs.size(), 1.0 / static_cast<double>(xs.size()));
  return weighted_sum(xs, w);
}

}  // namespace spdgnn::ad
