#include "spdgnn/symcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace spdgnn {

namespace {

bool all_finite(const Eigen::Ref<const Matrix>& a) { return a.allFinite(); }

}  // namespace

SymMatrix::SymMatrix(const Eigen::Ref<const Matrix>& a) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatchError("SymMatrix: input is not square");
  }
  if (!all_finite(a)) {
    throw NonFiniteError("SymMatrix: input contains NaN or Inf");
  }
  m_ = 0.5 * (a + a.transpose());
}

SymMatrix SymMatrix::from_symmetric(Matrix a) {
  SymMatrix s;
  s.m_ = std::move(a);
  return s;
}

SpdMatrix::SpdMatrix(const SymMatrix& s) : s_(s) {
#ifndef NDEBUG
  EigenDecomposition ed = sym_eig(s);
  if (ed.lambda.minCoeff() <= 0.0) {
    throw NotPositiveDefiniteError("SpdMatrix: smallest eigenvalue is not positive");
  }
#endif
}

namespace detail {

EigenDecomposition jacobi_eig(Matrix a) {
  const int n = static_cast<int>(a.rows());
  Matrix u = Matrix::Identity(n, n);

  if (n > 1) {
    const int max_sweeps = 30;
    const double total = a.norm();
    const double off_tol = 1e-15 * (1.0 + total);
    bool converged = false;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      double off = 0.0;
      for (int p = 0; p < n - 1; ++p)
        for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
      if (std::sqrt(off) <= off_tol) {
        converged = true;
        break;
      }
      for (int p = 0; p < n - 1; ++p) {
        for (int q = p + 1; q < n; ++q) {
          const double apq = a(p, q);
          if (apq == 0.0) continue;
          // Once a rotation cannot change the diagonal at working precision,
          // annihilate the entry directly.
          if (sweep > 3 &&
              std::abs(apq) <= 100.0 * std::numeric_limits<double>::epsilon() *
                                   (std::abs(a(p, p)) + std::abs(a(q, q)))) {
            a(p, q) = a(q, p) = 0.0;
            continue;
          }
          const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
          double t;
          if (std::abs(theta) > 1e154) {
            t = 1.0 / (2.0 * theta);
          } else {
            t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
            if (theta < 0.0) t = -t;
          }
          const double c = 1.0 / std::sqrt(t * t + 1.0);
          const double s = t * c;
          const double tau = s / (1.0 + c);

          const double app = a(p, p);
          const double aqq = a(q, q);
          a(p, p) = app - t * apq;
          a(q, q) = aqq + t * apq;
          a(p, q) = a(q, p) = 0.0;
          for (int r = 0; r < n; ++r) {
            if (r != p && r != q) {
              const double arp = a(r, p);
              const double arq = a(r, q);
              a(r, p) = a(p, r) = arp - s * (arq + tau * arp);
              a(r, q) = a(q, r) = arq + s * (arp - tau * arq);
            }
            const double urp = u(r, p);
            const double urq = u(r, q);
            u(r, p) = urp - s * (urq + tau * urp);
            u(r, q) = urq + s * (urp - tau * urq);
          }
        }
      }
    }
    if (!converged) {
      double off = 0.0;
      for (int p = 0; p < n - 1; ++p)
        for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
      if (std::sqrt(off) > off_tol) {
        throw NoConvergenceError("sym_eig: Jacobi sweeps exhausted without convergence");
      }
    }
  }

  // Sort eigenvalues descending; stable so equal eigenvalues keep their
  // Jacobi order, which keeps the whole decomposition deterministic.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return a(i, i) > a(j, j); });

  EigenDecomposition ed;
  ed.u.resize(n, n);
  ed.lambda.resize(n);
  for (int j = 0; j < n; ++j) {
    ed.lambda(j) = a(order[j], order[j]);
    ed.u.col(j) = u.col(order[j]);
  }

  // Sign convention: the entry of largest magnitude in each column is made
  // positive; the strict comparison breaks magnitude ties by lowest row index.
  for (int j = 0; j < n; ++j) {
    int best = 0;
    for (int r = 1; r < n; ++r) {
      if (std::abs(ed.u(r, j)) > std::abs(ed.u(best, j))) best = r;
    }
    if (ed.u(best, j) < 0.0) ed.u.col(j) = -ed.u.col(j);
  }
  return ed;
}

QrPos qr_pos(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatchError("qr_pos: input is not square");
  }
  const int n = static_cast<int>(a.rows());
  Eigen::HouseholderQR<Matrix> qr(a);
  QrPos out;
  out.q = qr.householderQ() * Matrix::Identity(n, n);
  out.r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j) {
    if (out.r(j, j) < 0.0) {
      out.q.col(j) = -out.q.col(j);
      out.r.row(j) = -out.r.row(j);
    }
  }
  const double tol = 1e-12 * (1.0 + a.norm());
  for (int j = 0; j < n; ++j) {
    if (std::abs(out.r(j, j)) <= tol) {
      throw RankDeficientError("qr_pos: input is numerically rank deficient");
    }
  }
  return out;
}

}  // namespace detail

EigenDecomposition sym_eig(const SymMatrix& s) { return detail::jacobi_eig(s.mat()); }

EigenDecomposition sym_eig(const Eigen::Ref<const Matrix>& s) {
  if (s.rows() != s.cols()) {
    throw DimensionMismatchError("sym_eig: input is not square");
  }
  if (!s.allFinite()) {
    throw NonFiniteError("sym_eig: input contains NaN or Inf");
  }
  const double asym = (s - s.transpose()).norm();
  if (asym > 1e-9 * (1.0 + s.norm())) {
    throw NotSymmetricError("sym_eig: input is not symmetric");
  }
  return detail::jacobi_eig(0.5 * (s + s.transpose()));
}

SymMatrix jitter_if_degenerate(const SymMatrix& s, double sigma, std::mt19937_64& rng,
                               double gap_tol) {
  if (sigma < 0.0) {
    throw ConfigError("jitter_if_degenerate: sigma must be nonnegative");
  }
  const int n = s.dim();
  if (n < 2 || sigma == 0.0) return s;

  EigenDecomposition ed = sym_eig(s);
  double min_gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i + 1 < n; ++i) {
    min_gap = std::min(min_gap, ed.lambda(i) - ed.lambda(i + 1));
  }
  if (min_gap >= gap_tol) return s;

  std::normal_distribution<double> dist(0.0, sigma);
  Matrix noise(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) noise(i, j) = dist(rng);
  return SymMatrix::from_symmetric(s.mat() + 0.5 * (noise + noise.transpose()));
}

SpdMatrix clamp_eigs(const SymMatrix& s, double floor) {
  if (!(floor > 0.0)) {
    throw ConfigError("clamp_eigs: floor must be positive");
  }
  EigenDecomposition ed = sym_eig(s);
  Matrix out = detail::eig_apply(ed, [&](double x) { return std::max(x, floor); });
  return SpdMatrix(SymMatrix::from_symmetric(0.5 * (out + out.transpose())));
}

SpdMatrix spd_exp(const SymMatrix& s) {
  EigenDecomposition ed = sym_eig(s);
  if (ed.lambda.maxCoeff() > 700.0) {
    throw OverflowError("spd_exp: eigenvalue exceeds 700; matrix exponential would overflow");
  }
  Matrix out = detail::eig_apply(ed, [](double x) { return std::exp(x); });
  return SpdMatrix(SymMatrix::from_symmetric(0.5 * (out + out.transpose())));
}

SymMatrix spd_log(const SpdMatrix& p) {
  EigenDecomposition ed = sym_eig(p.sym());
  if (ed.lambda.minCoeff() <= 0.0) {
    throw NotPositiveDefiniteError("spd_log: input has a nonpositive eigenvalue");
  }
  Matrix out = detail::eig_apply(ed, [](double x) { return std::log(x); });
  return SymMatrix::from_symmetric(0.5 * (out + out.transpose()));
}

SpdMatrix spd_sqrt(const SpdMatrix& p) {
  EigenDecomposition ed = sym_eig(p.sym());
  if (ed.lambda.minCoeff() <= 0.0) {
    throw NotPositiveDefiniteError("spd_sqrt: input has a nonpositive eigenvalue");
  }
  Matrix out = detail::eig_apply(ed, [](double x) { return std::sqrt(x); });
  return SpdMatrix(SymMatrix::from_symmetric(0.5 * (out + out.transpose())));
}

SpdMatrix spd_inv_sqrt(const SpdMatrix& p) {
  EigenDecomposition ed = sym_eig(p.sym());
  if (ed.lambda.minCoeff() <= 0.0) {
    throw NotPositiveDefiniteError("spd_inv_sqrt: input has a nonpositive eigenvalue");
  }
  Matrix out = detail::eig_apply(ed, [](double x) { return 1.0 / std::sqrt(x); });
  return SpdMatrix(SymMatrix::from_symmetric(0.5 * (out + out.transpose())));
}

double spd_distance(const SpdMatrix& p, const SpdMatrix& q) {
  if (p.dim() != q.dim()) {
    throw DimensionMismatchError("spd_distance: dimension mismatch");
  }
  const Matrix w = spd_inv_sqrt(p).mat();
  Matrix m = w * q.mat() * w;
  SymMatrix inner(m);  // symmetrize against round-off
  return spd_log(SpdMatrix(inner)).mat().norm();
}

}  // namespace spdgnn
