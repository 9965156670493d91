#pragma once

#include <Eigen/Dense>
#include <random>

#include "spdgnn/errors.hpp"

namespace spdgnn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense real symmetric matrix. Construction symmetrizes as (A + A^T)/2 and
/// rejects non-finite entries, so a SymMatrix is symmetric bit-for-bit.
class SymMatrix {
 public:
  explicit SymMatrix(const Eigen::Ref<const Matrix>& a);

  // Trusted path for values that are symmetric by construction.
  static SymMatrix from_symmetric(Matrix a);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Matrix& mat() const { return m_; }

 private:
  SymMatrix() = default;
  Matrix m_;
};

/// Symmetric positive definite matrix. The positivity invariant is
/// guaranteed by the producing operation (clamp_eigs, spd_exp, ...) and
/// re-verified by eigendecomposition in debug builds.
class SpdMatrix {
 public:
  explicit SpdMatrix(const SymMatrix& s);

  int dim() const { return s_.dim(); }
  const Matrix& mat() const { return s_.mat(); }
  const SymMatrix& sym() const { return s_; }

 private:
  SymMatrix s_;
};

/// Result of a symmetric eigendecomposition: input = u * lambda.asDiagonal() * u^T.
/// Eigenvalues are sorted descending; each eigenvector column is sign-fixed so
/// that its entry of largest magnitude is positive (ties broken by lowest row
/// index), which makes the decomposition deterministic.
struct EigenDecomposition {
  Matrix u;
  Vector lambda;
};

/// Cyclic Jacobi eigendecomposition (sweep cap 30). Deterministic: identical
/// input yields bit-identical output on one platform.
EigenDecomposition sym_eig(const SymMatrix& s);

/// Raw-matrix overload; the input must already be symmetric.
EigenDecomposition sym_eig(const Eigen::Ref<const Matrix>& s);

/// If any eigenvalue gap of s is below `gap_tol`, perturb by a symmetrized
/// Gaussian noise matrix with the given standard deviation; otherwise return
/// s unchanged.
SymMatrix jitter_if_degenerate(const SymMatrix& s, double sigma, std::mt19937_64& rng,
                               double gap_tol = 1e-6);

/// Reconstruct with eigenvalues floored at `floor` (> 0), yielding an SPD matrix.
SpdMatrix clamp_eigs(const SymMatrix& s, double floor = 1e-8);

/// Matrix exponential of a symmetric matrix via eigendecomposition.
/// Throws OverflowError when any eigenvalue exceeds 700 (exp would overflow,
/// which in training signals divergence).
SpdMatrix spd_exp(const SymMatrix& s);

/// Matrix logarithm, inverse of spd_exp.
SymMatrix spd_log(const SpdMatrix& p);

SpdMatrix spd_sqrt(const SpdMatrix& p);
SpdMatrix spd_inv_sqrt(const SpdMatrix& p);

/// Affine-invariant geodesic distance ||log(P^{-1/2} Q P^{-1/2})||_F.
double spd_distance(const SpdMatrix& p, const SpdMatrix& q);

namespace detail {

// Core Jacobi routine on a raw symmetric matrix (no symmetry check).
EigenDecomposition jacobi_eig(Matrix a);

// QR of a square matrix normalized to diag(r) > 0, which makes the factor
// pair unique for full-rank input. Throws RankDeficientError otherwise.
struct QrPos {
  Matrix q;
  Matrix r;
};
QrPos qr_pos(const Matrix& a);

// U f(diag) U^T for a scalar map applied to the eigenvalues.
template <typename Fn>
Matrix eig_apply(const EigenDecomposition& ed, Fn&& fn) {
  Vector mapped = ed.lambda.unaryExpr([&](double x) { return fn(x); });
  return ed.u * mapped.asDiagonal() * ed.u.transpose();
}

}  // namespace detail

}  // namespace spdgnn
