#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "spdgnn/autodiff.hpp"
#include "spdgnn/symcore.hpp"

namespace testutil {

using spdgnn::Matrix;
using spdgnn::Vector;

inline Matrix rand_matrix(std::mt19937_64& rng, int r, int c, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

inline Matrix rand_sym(std::mt19937_64& rng, int n, double scale = 1.0) {
  Matrix a = rand_matrix(rng, n, n, scale);
  return 0.5 * (a + a.transpose());
}

// SPD with eigenvalues spread over [min_eig, max_eig]; the spread keeps
// eigengaps comfortably away from the degenerate regime for gradient checks.
inline Matrix rand_spd(std::mt19937_64& rng, int n, double min_eig = 0.3,
                       double max_eig = 3.0) {
  Matrix a = rand_matrix(rng, n, n);
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  Vector lam(n);
  for (int i = 0; i < n; ++i) {
    lam(i) = min_eig + (max_eig - min_eig) * static_cast<double>(i) /
                           std::max(1, n - 1);
  }
  std::shuffle(lam.data(), lam.data() + n, rng);
  Matrix p = q * lam.asDiagonal() * q.transpose();
  return 0.5 * (p + p.transpose());
}

// Smallest gap between sorted eigenvalues; used to keep FD probes away from
// the divided-difference guard in eig_fn's backward.
inline double min_eigengap(const Matrix& s) {
  spdgnn::EigenDecomposition ed = spdgnn::sym_eig(0.5 * (s + s.transpose()));
  double gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i + 1 < ed.lambda.size(); ++i) {
    gap = std::min(gap, ed.lambda(i) - ed.lambda(i + 1));
  }
  return gap;
}

// A differentiable scalar program: given a fresh tape and the leaf Vars
// (one per entry of `params`, registered in order), return the loss.
using Program =
    std::function<spdgnn::ad::Var(spdgnn::ad::Tape&, const std::vector<spdgnn::ad::Var>&)>;

inline double eval_program(const Program& prog, const std::vector<Matrix>& params) {
  spdgnn::ad::Tape tape;
  std::vector<spdgnn::ad::Var> vars;
  vars.reserve(params.size());
  for (const Matrix& p : params) vars.push_back(tape.param(p));
  spdgnn::ad::Var loss = prog(tape, vars);
  return tape.value(loss)(0, 0);
}

inline std::vector<Matrix> analytic_grads(const Program& prog,
                                          const std::vector<Matrix>& params) {
  spdgnn::ad::Tape tape;
  std::vector<spdgnn::ad::Var> vars;
  vars.reserve(params.size());
  for (const Matrix& p : params) vars.push_back(tape.param(p));
  spdgnn::ad::Var loss = prog(tape, vars);
  tape.backward(loss);
  std::vector<Matrix> out;
  out.reserve(vars.size());
  for (spdgnn::ad::Var v : vars) out.push_back(tape.grad(v));
  return out;
}

inline std::vector<Matrix> fd_grads(const Program& prog, std::vector<Matrix> params,
                                    double h = 1e-5) {
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (size_t p = 0; p < params.size(); ++p) {
    Matrix g(params[p].rows(), params[p].cols());
    for (Eigen::Index i = 0; i < params[p].rows(); ++i) {
      for (Eigen::Index j = 0; j < params[p].cols(); ++j) {
        const double orig = params[p](i, j);
        params[p](i, j) = orig + h;
        const double fp = eval_program(prog, params);
        params[p](i, j) = orig - h;
        const double fm = eval_program(prog, params);
        params[p](i, j) = orig;
        g(i, j) = (fp - fm) / (2.0 * h);
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

// Max over parameters of ||ad - fd||_inf / (1 + ||fd||_inf).
inline double grad_check(const Program& prog, const std::vector<Matrix>& params,
                         double h = 1e-5) {
  std::vector<Matrix> ag = analytic_grads(prog, params);
  std::vector<Matrix> fg = fd_grads(prog, params, h);
  double worst = 0.0;
  for (size_t p = 0; p < params.size(); ++p) {
    const double num = (ag[p] - fg[p]).cwiseAbs().maxCoeff();
    const double den = 1.0 + fg[p].cwiseAbs().maxCoeff();
    worst = std::max(worst, num / den);
  }
  return worst;
}

}  // namespace testutil
