#include "spdgnn/manifolds.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace spdgnn {

namespace {

// Near-singular inputs get 1e-6 * I added before the positive-diagonal QR.
bool needs_regularization(const Matrix& m) {
  Eigen::HouseholderQR<Matrix> qr(m);
  const double dmin = qr.matrixQR().diagonal().cwiseAbs().minCoeff();
  return dmin <= 1e-6 * (1.0 + m.norm());
}

SpdMatrix spd_from_exact(Matrix m) {
  return SpdMatrix(SymMatrix::from_symmetric(0.5 * (m + m.transpose())));
}

}  // namespace

// ---- GeometryContext --------------------------------------------------------

GeometryContext GeometryContext::euclidean(int d) {
  if (d < 1) throw ConfigError("GeometryContext: euclidean dim must be >= 1");
  return {GeomKind::euclidean, d};
}
GeometryContext GeometryContext::hyperbolic(int d) {
  if (d < 1) throw ConfigError("GeometryContext: hyperbolic dim must be >= 1");
  return {GeomKind::hyperbolic, d};
}
GeometryContext GeometryContext::spd(int n) {
  if (n < 2) throw ConfigError("GeometryContext: spd size must be >= 2");
  return {GeomKind::spd, n};
}
GeometryContext GeometryContext::product(int m) {
  if (m < 1) throw ConfigError("GeometryContext: product block size must be >= 1");
  return {GeomKind::product, m};
}

int GeometryContext::ambient() const {
  switch (kind) {
    case GeomKind::euclidean:
    case GeomKind::hyperbolic:
      return dim;
    case GeomKind::spd:
      return dim * (dim + 1) / 2;
    case GeomKind::product:
      return 2 * dim;
  }
  throw ConfigError("GeometryContext: unknown kind");
}

const char* GeometryContext::name() const {
  switch (kind) {
    case GeomKind::euclidean:
      return "euclidean";
    case GeomKind::hyperbolic:
      return "hyperbolic";
    case GeomKind::spd:
      return "spd";
    case GeomKind::product:
      return "product";
  }
  return "unknown";
}

// ---- ManifoldPoint ----------------------------------------------------------

ManifoldPoint ManifoldPoint::euclidean(const Vector& x) {
  if (!x.allFinite()) throw NonFiniteError("ManifoldPoint: non-finite euclidean point");
  return {GeomKind::euclidean, x};
}

ManifoldPoint ManifoldPoint::hyperbolic(const Vector& x) {
  if (!x.allFinite()) throw OutsideBallError("ManifoldPoint: non-finite hyperbolic point");
  if (x.norm() > 1.0 - kBallMargin) {
    throw OutsideBallError("ManifoldPoint: hyperbolic point outside the ball margin");
  }
  return {GeomKind::hyperbolic, x};
}

ManifoldPoint ManifoldPoint::spd(const SpdMatrix& p) { return {GeomKind::spd, p.mat()}; }

ManifoldPoint ManifoldPoint::product(const Vector& h, const Vector& e) {
  ManifoldPoint hp = hyperbolic(h);
  if (!e.allFinite()) throw NonFiniteError("ManifoldPoint: non-finite product point");
  Matrix v(h.size() + e.size(), 1);
  v.topRows(h.size()) = hp.value;
  v.bottomRows(e.size()) = e;
  return {GeomKind::product, v};
}

// ---- SPD gyrocalculus -------------------------------------------------------

SpdMatrix spd_gyro_add(const SpdMatrix& p, const SpdMatrix& q) {
  if (p.dim() != q.dim()) throw DimensionMismatchError("spd_gyro_add: dimension mismatch");
  const Matrix w = spd_sqrt(p).mat();
  return spd_from_exact(w * q.mat() * w);
}

SpdMatrix spd_gyro_inverse(const SpdMatrix& p) {
  EigenDecomposition ed = sym_eig(p.sym());
  if (ed.lambda.minCoeff() <= 0.0) {
    throw NotPositiveDefiniteError("spd_gyro_inverse: input is not positive definite");
  }
  return spd_from_exact(detail::eig_apply(ed, [](double x) { return 1.0 / x; }));
}

Matrix orthogonalize(const Matrix& m_raw) {
  if (m_raw.rows() != m_raw.cols()) {
    throw DimensionMismatchError("orthogonalize: input is not square");
  }
  if (needs_regularization(m_raw)) {
    return detail::qr_pos(m_raw + 1e-6 * Matrix::Identity(m_raw.rows(), m_raw.cols())).q;
  }
  return detail::qr_pos(m_raw).q;
}

SpdMatrix spd_isometry(const Matrix& m_raw, const SpdMatrix& p) {
  if (m_raw.rows() != p.dim()) {
    throw DimensionMismatchError("spd_isometry: shape mismatch");
  }
  const Matrix m = orthogonalize(m_raw);
  return spd_from_exact(m * p.mat() * m.transpose());
}

SpdMatrix reeig(const SpdMatrix& p, double eps) {
  if (!(eps > 0.0)) throw ConfigError("reeig: eps must be positive");
  EigenDecomposition ed = sym_eig(p.sym());
  return spd_from_exact(detail::eig_apply(ed, [&](double x) { return std::max(x, eps); }));
}

SpdMatrix tgreeig(const SpdMatrix& p) { return reeig(p, 1.0); }

// ---- Poincaré ball ----------------------------------------------------------

Vector ball_clip(const Vector& x) {
  if (!x.allFinite()) throw OutsideBallError("ball_clip: non-finite point");
  const double n = x.norm();
  if (n > 1.0 - kBallMargin) return x * ((1.0 - kBallMargin) / n);
  return x;
}

Vector mobius_add(const Vector& x, const Vector& y) {
  if (x.size() != y.size()) throw DimensionMismatchError("mobius_add: size mismatch");
  const double xy = x.dot(y);
  const double xx = x.squaredNorm();
  const double yy = y.squaredNorm();
  const double den = 1.0 + 2.0 * xy + xx * yy;
  Vector out = ((1.0 + 2.0 * xy + yy) * x + (1.0 - xx) * y) / den;
  return ball_clip(out);
}

Vector poincare_expmap0(const Vector& v) {
  const double n = v.norm();
  if (n < 1e-12) return v;
  return ball_clip(std::tanh(n) / n * v);
}

Vector poincare_logmap0(const Vector& x) {
  const Vector c = ball_clip(x);
  const double n = c.norm();
  if (n < 1e-12) return c;
  return std::atanh(n) / n * c;
}

Vector hyp_matvec(const Matrix& w, const Vector& x) {
  if (w.cols() != x.size()) throw DimensionMismatchError("hyp_matvec: shape mismatch");
  return poincare_expmap0(w * poincare_logmap0(x));
}

// ---- Product space ----------------------------------------------------------

ProductPoint product_transform(const Matrix& w11, const Matrix& w12, const Matrix& w21,
                               const Matrix& w22, const ProductPoint& z) {
  const Eigen::Index m = z.h.size();
  if (z.e.size() != m || w11.rows() != m || w11.cols() != m || w12.rows() != m ||
      w12.cols() != m || w21.rows() != m || w21.cols() != m || w22.rows() != m ||
      w22.cols() != m) {
    throw DimensionMismatchError("product_transform: block shape mismatch");
  }
  Vector h = mobius_add(hyp_matvec(w11, z.h), hyp_matvec(w12, poincare_expmap0(z.e)));
  Vector e = w21 * poincare_logmap0(z.h) + w22 * z.e;
  return {h, e};
}

ProductPoint product_aggregate(const std::vector<double>& weights,
                               const std::vector<ProductPoint>& points) {
  if (points.empty() || points.size() != weights.size()) {
    throw DimensionMismatchError("product_aggregate: empty input or weight count mismatch");
  }
  Vector th = Vector::Zero(points[0].h.size());
  Vector e = Vector::Zero(points[0].e.size());
  for (size_t i = 0; i < points.size(); ++i) {
    th += weights[i] * poincare_logmap0(points[i].h);
    e += weights[i] * points[i].e;
  }
  return {poincare_expmap0(th), e};
}

ProductPoint product_bias_nonlin(const ProductPoint& p, const Vector& bias_h,
                                 const Vector& bias_e) {
  Vector th = poincare_logmap0(mobius_add(p.h, bias_h));
  Vector h = poincare_expmap0(th.cwiseMax(0.0));
  Vector e = (p.e + bias_e).cwiseMax(0.0);
  return {h, e};
}

// ---- Differentiable counterparts --------------------------------------------

namespace diff {

using ad::Tape;
using ad::Var;

namespace {

// Domain check on the recorded value before eig_fn maps the eigenvalues;
// without it a NaN would surface later as an untyped non-finite failure.
void check_spectrum(Var v, double lo, double hi, const char* who) {
  const Matrix& m = v.tape->value(v);
  EigenDecomposition ed = detail::jacobi_eig(0.5 * (m + m.transpose()));
  if (ed.lambda.minCoeff() <= lo) {
    throw NotPositiveDefiniteError(std::string(who) + ": input has a nonpositive eigenvalue");
  }
  if (ed.lambda.maxCoeff() > hi) {
    throw OverflowError(std::string(who) + ": eigenvalue too large (diverging parameters)");
  }
}

}  // namespace

Var spd_exp(Var s) {
  check_spectrum(s, -std::numeric_limits<double>::infinity(), 700.0, "spd_exp");
  return ad::eig_fn(s, ad::exp_fn());
}

Var spd_log(Var p) {
  check_spectrum(p, 0.0, std::numeric_limits<double>::infinity(), "spd_log");
  return ad::eig_fn(p, ad::log_fn());
}

Var spd_sqrt(Var p) {
  check_spectrum(p, 0.0, std::numeric_limits<double>::infinity(), "spd_sqrt");
  return ad::eig_fn(p, ad::sqrt_fn());
}

Var gyro_add(Var p, Var q) {
  Var w = spd_sqrt(p);
  return ad::sym(ad::matmul(ad::matmul(w, q), w));
}

Var reeig(Var p, double eps) {
  if (!(eps > 0.0)) throw ConfigError("reeig: eps must be positive");
  return ad::eig_fn(p, ad::clamp_min_fn(eps));
}

Var tgreeig(Var p) { return reeig(p, 1.0); }

Var orthogonalize(Var m_raw) {
  Tape& t = *m_raw.tape;
  const Matrix& v = t.value(m_raw);
  if (v.rows() != v.cols()) {
    throw DimensionMismatchError("orthogonalize: input is not square");
  }
  if (needs_regularization(v)) {
    Var shifted = ad::add(m_raw, t.constant(1e-6 * Matrix::Identity(v.rows(), v.cols())));
    return ad::qr_q(shifted);
  }
  return ad::qr_q(m_raw);
}

Var isometry(Var m_raw, Var p) {
  Var q = orthogonalize(m_raw);
  return ad::sym(ad::matmul(ad::matmul(q, p), ad::transpose(q)));
}

Var vnorm(Var x) {
  Var sq = ad::frobenius_norm_sq(x);
  return ad::unary(ad::unary(sq, ad::clamp_min_fn(1e-24)), ad::sqrt_fn());
}

Var expmap0(Var v) {
  Var n = vnorm(v);
  Var c = ad::hadamard(ad::unary(n, ad::tanh_fn()), ad::unary(n, ad::recip_fn()));
  return ad::ball_project(ad::mul_scalar(v, c), 1.0 - kBallMargin);
}

Var logmap0(Var x) {
  Tape& t = *x.tape;
  if (t.value(x).norm() >= 1.0) {
    throw OutsideBallError("logmap0: point escaped the unit ball");
  }
  Var n = vnorm(x);
  Var c = ad::hadamard(ad::unary(n, ad::artanh_fn()), ad::unary(n, ad::recip_fn()));
  return ad::mul_scalar(x, c);
}

Var mobius_add(Var x, Var y) {
  Var xy = ad::dot(x, y);
  Var xx = ad::frobenius_norm_sq(x);
  Var yy = ad::frobenius_norm_sq(y);
  Var two_xy = ad::scale(xy, 2.0);
  Var cx = ad::add_const(ad::add(two_xy, yy), 1.0);              // 1 + 2<x,y> + |y|^2
  Var cy = ad::add_const(ad::scale(xx, -1.0), 1.0);              // 1 - |x|^2
  Var den = ad::add_const(ad::add(two_xy, ad::hadamard(xx, yy)), 1.0);
  Var num = ad::add(ad::mul_scalar(x, cx), ad::mul_scalar(y, cy));
  Var out = ad::mul_scalar(num, ad::unary(den, ad::recip_fn()));
  return ad::ball_project(out, 1.0 - kBallMargin);
}

Var hyp_matvec(Var w, Var x) { return expmap0(ad::matmul(w, logmap0(x))); }

Var hyp_bias_nonlin(Var x, Var b) {
  return expmap0(ad::relu(logmap0(mobius_add(x, b))));
}

}  // namespace diff

}  // namespace spdgnn
