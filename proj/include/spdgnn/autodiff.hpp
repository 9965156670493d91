#pragma once

#include <Eigen/Dense>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "spdgnn/errors.hpp"
#include "spdgnn/symcore.hpp"

namespace spdgnn::ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; owns nothing.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

/// Scalar function together with its derivative, used by elementwise ops and
/// by eig_fn (where it acts on eigenvalues).
struct ScalarFn {
  std::function<double(double)> f;
  std::function<double(double)> df;
  std::string name;
};

ScalarFn exp_fn();
ScalarFn log_fn();
ScalarFn sqrt_fn();
ScalarFn inv_sqrt_fn();
ScalarFn relu_fn();
ScalarFn clamp_min_fn(double floor);  // x -> max(x, floor)
ScalarFn tanh_fn();
ScalarFn artanh_fn();
ScalarFn recip_fn();

using BackwardFn = std::function<void(Tape&, int)>;

/// Record of a computation: values forward, adjoints backward.
/// Node ids are append-ordered, hence topologically ordered. A tape is
/// confined to a single training run; it is not thread-safe.
class Tape {
 public:
  Var constant(Matrix v);
  Var param(Matrix v);

  const Matrix& value(Var v) const;
  /// Gradient of the last backward() w.r.t. v; zero for leaves the loss does
  /// not reach. Only valid after backward().
  Matrix grad(Var v) const;

  /// Reverse sweep from a scalar loss. Calling it a second time without
  /// re-recording throws (no silent accumulation).
  void backward(Var loss);

  void clear();
  int size() const { return static_cast<int>(nodes_.size()); }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

  // Low-level plumbing for op implementations.
  int push(Matrix value, std::vector<int> parents, BackwardFn bw);
  const Matrix& value_at(int id) const { return nodes_[id].value; }
  const Matrix& grad_at(int id) const { return nodes_[id].grad; }
  void accumulate(int id, const Matrix& g);

 private:
  struct Node {
    Matrix value;
    Matrix grad;  // empty until first accumulate
    std::vector<int> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// ---- primitives ----------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double c);
Var add_const(Var a, double c);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var hadamard(Var a, Var b);
Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var softmax(Var a, int axis);  // axis 0: over each column; axis 1: over each row
Var trace(Var a);
Var frobenius_norm_sq(Var a);
Var sum(Var a);
Var gather_rows(Var x, const std::vector<int>& idx);
Var scatter_add_rows(Var e, const std::vector<int>& idx, int num_rows);
Var concat(Var a, Var b, int axis);
Var dropout(Var a, double p, std::mt19937_64& rng, bool train);
/// Dropout on a symmetric matrix: the mask is sampled on the upper triangle
/// and mirrored, so the output stays symmetric.
Var dropout_sym(Var a, double p, std::mt19937_64& rng, bool train);
Var unary(Var a, const ScalarFn& fn);
Var mul_scalar(Var a, Var s);              // s is 1x1
Var sym(Var a);                            // (a + a^T)/2
Var add_rowvec(Var x, Var b);              // b is 1xC, broadcast over rows
Var upper_tri_vec(Var s);                  // row-wise upper triangle, 1 x n(n+1)/2
/// Inverse of upper_tri_vec: 1 x n(n+1)/2 row back to a symmetric n x n.
Var upper_tri_unvec(Var row, int n);
Var stack_rows(const std::vector<Var>& rows);  // each 1xC, stacked to NxC
Var slice_cols(Var a, int first, int count);
Var weighted_sum(const std::vector<Var>& xs, const std::vector<double>& ws);
Var weighted_sum_var(const std::vector<Var>& xs, const std::vector<Var>& ws);
Var segment_softmax(Var vals, const std::vector<int>& offsets);  // vals is Ex1

/// out = U f(Lambda) U^T for symmetric input. Backward is the
/// eigendecomposition adjoint with divided differences; near-equal
/// eigenvalues (gap < 1e-6) use the analytic limit f'((li+lj)/2).
Var eig_fn(Var s, const ScalarFn& fn);

/// Q factor of a QR factorization with diag(R) > 0. Square, full-rank input.
Var qr_q(Var a);

/// Sparse (triplet) matrix product: out.row(rows[e]) += w[e] * h.row(cols[e]).
Var spmm(const std::vector<int>& rows, const std::vector<int>& cols,
         const std::vector<double>& w, Var h, int num_out_rows);
/// Same with differentiable edge weights (alpha is Ex1).
Var spmm_var(const std::vector<int>& rows, const std::vector<int>& cols, Var alpha, Var h,
             int num_out_rows);

/// Projection into the open unit ball of radius max_norm (identity inside).
Var ball_project(Var x, double max_norm);

// ---- losses ---------------------------------------------------------------

/// -log softmax(logits)[label]; logits is a vector (Kx1 or 1xK).
Var cross_entropy(Var logits, int label);
/// (1/K) * sum_{k != y} max(0, margin - s_y + s_k).
Var multi_margin(Var scores, int label, double margin = 1.0);

// ---- composites (no new backward rules) ------------------------------------

Var dot(Var a, Var b);           // sum(a.*b) as 1x1
Var mean(const std::vector<Var>& xs);

}  // namespace spdgnn::ad
