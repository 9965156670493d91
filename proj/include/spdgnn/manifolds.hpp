#pragma once

#include <Eigen/Dense>

#include "spdgnn/autodiff.hpp"
#include "spdgnn/errors.hpp"
#include "spdgnn/symcore.hpp"

namespace spdgnn {

enum class GeomKind { euclidean, hyperbolic, spd, product };

/// Poincaré points are kept strictly inside the unit ball by this margin so
/// artanh stays finite.
inline constexpr double kBallMargin = 1e-5;

/// Selects the latent space for a model. `dim` means: Euclidean/Hyperbolic
/// vector dimension d, SPD matrix size n, Product block size m (the space is
/// H^m x R^m).
struct GeometryContext {
  GeomKind kind;
  int dim;

  static GeometryContext euclidean(int d);
  static GeometryContext hyperbolic(int d);
  static GeometryContext spd(int n);  // n >= 2
  static GeometryContext product(int m);

  /// Dimension of the tangent-space vectorization: d, d, n(n+1)/2, 2m.
  int ambient() const;
  const char* name() const;
};

/// A point of one of the four latent spaces, as plain numbers (no tape).
/// Euclidean/hyperbolic: d x 1 column; SPD: n x n matrix; product: (2m) x 1
/// column, hyperbolic block first.
struct ManifoldPoint {
  GeomKind kind;
  Matrix value;

  static ManifoldPoint euclidean(const Vector& x);
  static ManifoldPoint hyperbolic(const Vector& x);  // throws OutsideBall
  static ManifoldPoint spd(const SpdMatrix& p);
  static ManifoldPoint product(const Vector& h, const Vector& e);
};

// ---- SPD gyrocalculus (numeric) --------------------------------------------

/// P (+) Q = sqrt(P) Q sqrt(P).
SpdMatrix spd_gyro_add(const SpdMatrix& p, const SpdMatrix& q);

/// (-) P = P^{-1}.
SpdMatrix spd_gyro_inverse(const SpdMatrix& p);

/// Q factor of the positive-diagonal QR of m_raw; if m_raw is numerically
/// near-singular, 1e-6 * I is added first.
Matrix orthogonalize(const Matrix& m_raw);

/// M o P = M P M^T with M = orthogonalize(m_raw); an isometry of the
/// affine-invariant metric.
SpdMatrix spd_isometry(const Matrix& m_raw, const SpdMatrix& p);

/// Eigenvalue floor nonlinearities. reeig floors at eps, tgreeig at 1
/// (equivalently exp o relu o log on eigenvalues).
SpdMatrix reeig(const SpdMatrix& p, double eps = 0.5);
SpdMatrix tgreeig(const SpdMatrix& p);

// ---- Poincaré ball, curvature -1 (numeric) ----------------------------------

/// Rescale x to norm 1 - kBallMargin when it is outside. Throws OutsideBall
/// on non-finite input (no finite point is unprojectable).
Vector ball_clip(const Vector& x);

Vector mobius_add(const Vector& x, const Vector& y);
Vector poincare_expmap0(const Vector& v);
Vector poincare_logmap0(const Vector& x);

/// W (.) x = expmap0(W logmap0(x)).
Vector hyp_matvec(const Matrix& w, const Vector& x);

// ---- Product space H^m x R^m (numeric) --------------------------------------

struct ProductPoint {
  Vector h;  // Poincaré block
  Vector e;  // Euclidean block
};

/// Feature transform with four m x m blocks:
/// out_h = (W11 (.) z_h) mobius+ (W12 (.) expmap0(z_e)),  out_e = W21 logmap0(z_h) + W22 z_e.
ProductPoint product_transform(const Matrix& w11, const Matrix& w12, const Matrix& w21,
                               const Matrix& w22, const ProductPoint& z);

/// Weighted tangent aggregation: (expmap0(sum_j k_j logmap0(q_h_j)), sum_j k_j q_e_j).
ProductPoint product_aggregate(const std::vector<double>& weights,
                               const std::vector<ProductPoint>& points);

/// Bias then nonlinearity: (phi1(p_h mobius+ b_h), relu(p_e + b_e)) with
/// phi1 = expmap0 o relu o logmap0.
ProductPoint product_bias_nonlin(const ProductPoint& p, const Vector& bias_h,
                                 const Vector& bias_e);

// ---- Differentiable counterparts on the tape --------------------------------

namespace diff {

ad::Var spd_exp(ad::Var s);
ad::Var spd_log(ad::Var p);
ad::Var spd_sqrt(ad::Var p);
ad::Var gyro_add(ad::Var p, ad::Var q);
ad::Var reeig(ad::Var p, double eps = 0.5);
ad::Var tgreeig(ad::Var p);
ad::Var orthogonalize(ad::Var m_raw);
ad::Var isometry(ad::Var m_raw, ad::Var p);

/// Euclidean norm of a column vector as 1x1, floored at 1e-12 so the origin
/// stays differentiable.
ad::Var vnorm(ad::Var x);

ad::Var expmap0(ad::Var v);
ad::Var logmap0(ad::Var x);
ad::Var mobius_add(ad::Var x, ad::Var y);
ad::Var hyp_matvec(ad::Var w, ad::Var x);

/// phi1(x mobius+ b): relu applied in the tangent space at the origin.
ad::Var hyp_bias_nonlin(ad::Var x, ad::Var b);

}  // namespace diff

}  // namespace spdgnn
