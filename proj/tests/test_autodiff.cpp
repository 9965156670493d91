#include <doctest.h>

#include <cmath>
#include <random>

#include "spdgnn/autodiff.hpp"
#include "testutil.hpp"

using namespace spdgnn;
using namespace spdgnn::ad;
using testutil::grad_check;
using testutil::rand_matrix;
using testutil::rand_spd;
using testutil::rand_sym;

namespace {

Matrix scalar(double x) {
  Matrix m(1, 1);
  m(0, 0) = x;
  return m;
}

// Keeps relu/leaky_relu probes away from the kink at zero.
Matrix away_from_zero(Matrix m, double margin = 0.05) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (std::abs(m(i, j)) < margin) m(i, j) = m(i, j) < 0.0 ? -margin : margin;
    }
  return m;
}

}  // namespace

TEST_CASE("scalar square: d(w^2)/dw = 2w") {
  Tape t;
  Var w = t.param(scalar(3.0));
  Var loss = hadamard(w, w);
  t.backward(loss);
  CHECK(t.grad(w)(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("unreached parameter gets zero gradient") {
  std::mt19937_64 rng(1);
  Tape t;
  Var w = t.param(scalar(3.0));
  Var unused = t.param(rand_matrix(rng, 2, 2));
  Var loss = hadamard(w, w);
  t.backward(loss);
  CHECK(t.grad(unused).norm() == 0.0);
}

TEST_CASE("backward twice without re-recording throws") {
  Tape t;
  Var w = t.param(scalar(2.0));
  Var loss = hadamard(w, w);
  t.backward(loss);
  CHECK_THROWS_AS(t.backward(loss), Error);
}

TEST_CASE("non-scalar loss is rejected") {
  Tape t;
  Var w = t.param(Matrix::Identity(2, 2));
  CHECK_THROWS_AS(t.backward(w), NotScalarLossError);
}

TEST_CASE("backward of trace(W X) w.r.t. W is X^T") {
  std::mt19937_64 rng(5);
  Matrix x = rand_matrix(rng, 3, 3);
  Tape t;
  Var w = t.param(rand_matrix(rng, 3, 3));
  Var loss = trace(matmul(w, t.constant(x)));
  t.backward(loss);
  CHECK(t.grad(w).isApprox(x.transpose(), 1e-14));
}

TEST_CASE("relu subgradient convention") {
  Tape t;
  Matrix in(1, 2);
  in << -1.0, 2.0;
  Var x = t.param(in);
  Var loss = sum(relu(x));
  t.backward(loss);
  Matrix expect(1, 2);
  expect << 0.0, 1.0;
  CHECK(t.grad(x) == expect);
}

TEST_CASE("sum over independent subgraphs: adjoints are additive") {
  std::mt19937_64 rng(6);
  Matrix a0 = rand_matrix(rng, 3, 3), b0 = rand_matrix(rng, 3, 3);

  Tape joint;
  Var a = joint.param(a0), b = joint.param(b0);
  Var loss = add(frobenius_norm_sq(a), trace(matmul(b, b)));
  joint.backward(loss);

  Tape ta;
  Var a2 = ta.param(a0);
  ta.backward(frobenius_norm_sq(a2));
  Tape tb;
  Var b2 = tb.param(b0);
  tb.backward(trace(matmul(b2, b2)));

  CHECK(joint.grad(a) == ta.grad(a2));
  CHECK(joint.grad(b) == tb.grad(b2));
}

TEST_CASE("matmul gradient vs finite differences") {
  std::mt19937_64 rng(7);
  Matrix g0 = rand_matrix(rng, 4, 4);
  testutil::Program prog = [g0](Tape& t, const std::vector<Var>& ps) {
    return ad::sum(hadamard(matmul(ps[0], ps[1]), t.constant(g0)));
  };
  double err = grad_check(prog, {rand_matrix(rng, 4, 4), rand_matrix(rng, 4, 4)});
  CHECK(err <= 1e-6);
}

TEST_CASE("elementwise and structural primitives vs finite differences") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix g0 = rand_matrix(rng, 3, 4);
    Matrix x0 = away_from_zero(rand_matrix(rng, 3, 4));

    testutil::Program relu_prog = [g0](Tape& t, const std::vector<Var>& ps) {
      return ad::sum(hadamard(relu(ps[0]), t.constant(g0)));
    };
    CHECK(grad_check(relu_prog, {x0}) <= 1e-4);

    testutil::Program lrelu_prog = [g0](Tape& t, const std::vector<Var>& ps) {
      return ad::sum(hadamard(leaky_relu(ps[0], 0.2), t.constant(g0)));
    };
    CHECK(grad_check(lrelu_prog, {x0}) <= 1e-4);

    testutil::Program tanh_prog = [g0](Tape& t, const std::vector<Var>& ps) {
      return ad::sum(hadamard(unary(ps[0], tanh_fn()), t.constant(g0)));
    };
    CHECK(grad_check(tanh_prog, {rand_matrix(rng, 3, 4)}) <= 1e-4);

    testutil::Program soft_prog = [g0](Tape& t, const std::vector<Var>& ps) {
      return ad::sum(hadamard(softmax(ps[0], 1), t.constant(g0)));
    };
    CHECK(grad_check(soft_prog, {rand_matrix(rng, 3, 4)}) <= 1e-4);

    testutil::Program mixed_prog = [g0](Tape& t, const std::vector<Var>& ps) {
      Var y = add(scale(ps[0], 1.5), add_const(ps[1], 0.3));
      Var z = sub(y, hadamard(ps[0], ps[1]));
      return ad::sum(hadamard(transpose(z), t.constant(g0.transpose())));
    };
    CHECK(grad_check(mixed_prog, {rand_matrix(rng, 3, 4), rand_matrix(rng, 3, 4)}) <= 1e-4);
  }
}

TEST_CASE("gather, scatter, concat, row bias vs finite differences") {
  std::mt19937_64 rng(9);
  const std::vector<int> idx{2, 0, 2, 1};
  Matrix g0 = rand_matrix(rng, 4, 3);
  testutil::Program gather_prog = [g0, idx](Tape& t, const std::vector<Var>& ps) {
    return ad::sum(hadamard(gather_rows(ps[0], idx), t.constant(g0)));
  };
  CHECK(grad_check(gather_prog, {rand_matrix(rng, 3, 3)}) <= 1e-4);

  Matrix g1 = rand_matrix(rng, 3, 3);
  testutil::Program scatter_prog = [g1, idx](Tape& t, const std::vector<Var>& ps) {
    return ad::sum(hadamard(scatter_add_rows(ps[0], idx, 3), t.constant(g1)));
  };
  CHECK(grad_check(scatter_prog, {rand_matrix(rng, 4, 3)}) <= 1e-4);

  Matrix g2 = rand_matrix(rng, 5, 3);
  testutil::Program concat_prog = [g2](Tape& t, const std::vector<Var>& ps) {
    return ad::sum(hadamard(concat(ps[0], ps[1], 0), t.constant(g2)));
  };
  CHECK(grad_check(concat_prog, {rand_matrix(rng, 2, 3), rand_matrix(rng, 3, 3)}) <= 1e-4);

  Matrix g3 = rand_matrix(rng, 4, 3);
  testutil::Program bias_prog = [g3](Tape& t, const std::vector<Var>& ps) {
    return ad::sum(hadamard(add_rowvec(ps[0], ps[1]), t.constant(g3)));
  };
  CHECK(grad_check(bias_prog, {rand_matrix(rng, 4, 3), rand_matrix(rng, 1, 3)}) <= 1e-4);
}

TEST_CASE("sym, upper_tri_vec, mul_scalar, weighted sums vs finite differences") {
  std::mt19937_64 rng(10);
  Matrix g0 = rand_matrix(rng, 3, 3);
  testutil::Program sym_prog = [g0](Tape& t, const std::vector<Var>& ps) {
    return ad::sum(hadamard(ad::sym(ps[0]), t.constant(g0)));
  };
  CHECK(grad_check(sym_prog, {rand_matrix(rng, 3, 3)}) <= 1e-4);

  Matrix g1 = rand_matrix(rng, 1, 6);
  testutil::Program tri_prog = [g1](Tape& t, const std::vector<Var>& ps) {
    return ad::sum(hadamard(upper_tri_vec(ad::sym(ps[0])), t.constant(g1)));
  };
  CHECK(grad_check(tri_prog, {rand_matrix(rng, 3, 3)}) <= 1e-4);

  Matrix g2 = rand_matrix(rng, 2, 2);
  testutil::Program ms_prog = [g2](Tape& t, const std::vector<Var>& ps) {
    return ad::sum(hadamard(mul_scalar(ps[0], ps[1]), t.constant(g2)));
  };
  CHECK(grad_check(ms_prog, {rand_matrix(rng, 2, 2), scalar(0.7)}) <= 1e-4);

  testutil::Program ws_prog = [g2](Tape& t, const std::vector<Var>& ps) {
    Var s = weighted_sum({ps[0], ps[1]}, {0.25, -1.5});
    return ad::sum(hadamard(s, t.constant(g2)));
  };
  CHECK(grad_check(ws_prog, {rand_matrix(rng, 2, 2), rand_matrix(rng, 2, 2)}) <= 1e-4);

  testutil::Program wsv_prog = [g2](Tape& t, const std::vector<Var>& ps) {
    Var s = weighted_sum_var({ps[0], ps[1]}, {ps[2], ps[3]});
    return ad::sum(hadamard(s, t.constant(g2)));
  };
  CHECK(grad_check(wsv_prog, {rand_matrix(rng, 2, 2), rand_matrix(rng, 2, 2),
                              scalar(0.4), scalar(-0.8)}) <= 1e-4);
}

TEST_CASE("spmm and spmm_var vs finite differences") {
  std::mt19937_64 rng(11);
  const std::vector<int> rows{0, 0, 1, 2, 2};
  const std::vector<int> cols{0, 1, 1, 0, 2};
  const std::vector<double> w{0.5, 0.5, 1.0, 0.3, 0.7};
  Matrix g0 = rand_matrix(rng, 3, 2);
  testutil::Program spmm_prog = [=](Tape& t, const std::vector<Var>& ps) {
    return ad::sum(hadamard(spmm(rows, cols, w, ps[0], 3), t.constant(g0)));
  };
  CHECK(grad_check(spmm_prog, {rand_matrix(rng, 3, 2)}) <= 1e-4);

  testutil::Program spmmv_prog = [=](Tape& t, const std::vector<Var>& ps) {
    return ad::sum(hadamard(spmm_var(rows, cols, ps[1], ps[0], 3), t.constant(g0)));
  };
  CHECK(grad_check(spmmv_prog, {rand_matrix(rng, 3, 2), rand_matrix(rng, 5, 1)}) <= 1e-4);
}

TEST_CASE("segment_softmax rows sum to one and pass finite differences") {
  std::mt19937_64 rng(12);
  const std::vector<int> offsets{0, 2, 5, 6};
  Matrix v0 = rand_matrix(rng, 6, 1);
  Tape t;
  Var v = t.param(v0);
  Var a = segment_softmax(v, offsets);
  const Matrix& av = t.value(a);
  CHECK(av(0, 0) + av(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(av(2, 0) + av(3, 0) + av(4, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(av(5, 0) == doctest::Approx(1.0).epsilon(1e-12));

  Matrix g0 = rand_matrix(rng, 6, 1);
  testutil::Program prog = [g0, offsets](Tape& tp, const std::vector<Var>& ps) {
    return ad::sum(hadamard(segment_softmax(ps[0], offsets), tp.constant(g0)));
  };
  CHECK(grad_check(prog, {v0}) <= 1e-4);
}

TEST_CASE("dropout: eval is identity, train rescales by kept mass") {
  std::mt19937_64 rng(13);
  Matrix x0 = rand_matrix(rng, 4, 4);
  Tape t;
  Var x = t.param(x0);
  Var e = dropout(x, 0.5, rng, /*train=*/false);
  CHECK(t.value(e) == x0);

  std::mt19937_64 rng2(14);
  Var d = dropout(x, 0.5, rng2, /*train=*/true);
  const Matrix& dv = t.value(d);
  int zeros = 0;
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) {
      if (dv(i, j) == 0.0) {
        ++zeros;
      } else {
        CHECK(dv(i, j) == doctest::Approx(2.0 * x0(i, j)));
      }
    }
  CHECK(zeros > 0);
  CHECK(zeros < 16);

  // Deterministic mask (fresh rng inside the program) makes FD valid.
  Matrix g0 = rand_matrix(rng, 4, 4);
  testutil::Program prog = [g0](Tape& tp, const std::vector<Var>& ps) {
    std::mt19937_64 r(99);
    return ad::sum(hadamard(dropout(ps[0], 0.5, r, true), tp.constant(g0)));
  };
  CHECK(grad_check(prog, {x0}) <= 1e-4);
}

TEST_CASE("dropout_sym keeps the output symmetric") {
  std::mt19937_64 rng(15);
  Matrix s0 = rand_sym(rng, 4);
  Tape t;
  Var s = t.param(s0);
  Var d = dropout_sym(s, 0.5, rng, true);
  const Matrix& dv = t.value(d);
  CHECK((dv - dv.transpose()).norm() == 0.0);
}

TEST_CASE("ball_project: identity inside, rescale with correct gradient outside") {
  std::mt19937_64 rng(16);
  Matrix inside = rand_matrix(rng, 3, 1);
  inside *= 0.3 / inside.norm();
  Matrix outside = rand_matrix(rng, 3, 1);
  outside *= 2.0 / outside.norm();

  Matrix g0 = rand_matrix(rng, 3, 1);
  testutil::Program prog = [g0](Tape& tp, const std::vector<Var>& ps) {
    return ad::sum(hadamard(ball_project(ps[0], 1.0), tp.constant(g0)));
  };
  CHECK(grad_check(prog, {inside}) <= 1e-4);
  CHECK(grad_check(prog, {outside}) <= 1e-4);

  Tape t;
  Var x = t.param(outside);
  CHECK(t.value(ball_project(x, 1.0)).norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("eig_fn forward: exp at zero is the identity") {
  Tape t;
  Var s = t.param(Matrix::Zero(2, 2));
  Var e = eig_fn(s, exp_fn());
  CHECK(t.value(e).isApprox(Matrix::Identity(2, 2), 1e-14));
  Var loss = trace(e);
  t.backward(loss);
  CHECK(t.grad(s).isApprox(Matrix::Identity(2, 2), 1e-12));
}

TEST_CASE("eig_fn gradient of ||log P||_F^2 vs finite differences") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix p0 = rand_spd(rng, 4, 0.4, 3.4);  // eigengap 1.0 by construction
    REQUIRE(testutil::min_eigengap(p0) > 0.1);
    testutil::Program prog = [](Tape&, const std::vector<Var>& ps) {
      Var p = ad::sym(ps[0]);
      return frobenius_norm_sq(eig_fn(p, log_fn()));
    };
    CHECK(grad_check(prog, {p0}) <= 1e-4);
  }
}

TEST_CASE("eig_fn equal-eigenvalue limit: grad trace(log(2I)) = I/2") {
  Tape t;
  Var p = t.param(2.0 * Matrix::Identity(3, 3));
  Var loss = trace(eig_fn(p, log_fn()));
  t.backward(loss);
  CHECK(t.grad(p) == 0.5 * Matrix::Identity(3, 3));
}

TEST_CASE("eig_fn rejects asymmetric input") {
  Tape t;
  Matrix a(2, 2);
  a << 1.0, 0.5, 0.0, 1.0;
  Var v = t.param(a);
  CHECK_THROWS_AS(eig_fn(v, exp_fn()), NotSymmetricError);
}

TEST_CASE("eig_fn with clamp floor vs finite differences") {
  std::mt19937_64 rng(18);
  Matrix p0 = rand_spd(rng, 3, 0.2, 2.2);  // eigenvalues 0.2, 1.2, 2.2
  testutil::Program prog = [](Tape&, const std::vector<Var>& ps) {
    Var p = ad::sym(ps[0]);
    return frobenius_norm_sq(eig_fn(p, clamp_min_fn(0.5)));
  };
  CHECK(grad_check(prog, {p0}) <= 1e-4);
}

TEST_CASE("qr_q: orthogonal output, positive-diagonal convention, gradient") {
  std::mt19937_64 rng(19);
  Matrix a0 = rand_matrix(rng, 4, 4) + 0.5 * Matrix::Identity(4, 4);
  Tape t;
  Var a = t.param(a0);
  Var q = qr_q(a);
  const Matrix& qv = t.value(q);
  CHECK((qv.transpose() * qv - Matrix::Identity(4, 4)).norm() <= 1e-10);
  // R = Q^T A must be upper triangular with positive diagonal.
  Matrix r = qv.transpose() * a0;
  for (int i = 0; i < 4; ++i) {
    CHECK(r(i, i) > 0.0);
    for (int j = 0; j < i; ++j) CHECK(std::abs(r(i, j)) <= 1e-12 * (1.0 + a0.norm()));
  }

  Matrix g0 = rand_matrix(rng, 4, 4);
  testutil::Program prog = [g0](Tape& tp, const std::vector<Var>& ps) {
    return ad::sum(hadamard(qr_q(ps[0]), tp.constant(g0)));
  };
  CHECK(grad_check(prog, {a0}) <= 1e-4);
}

TEST_CASE("qr_q of the identity is the identity") {
  Tape t;
  Var a = t.param(Matrix::Identity(3, 3));
  CHECK(t.value(qr_q(a)) == Matrix::Identity(3, 3));
}

TEST_CASE("cross_entropy values and gradient") {
  Tape t;
  Matrix z(2, 1);
  z << 0.0, 0.0;
  Var logits = t.param(z);
  Var l = cross_entropy(logits, 0);
  CHECK(t.value(l)(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(cross_entropy(logits, 2), LabelOutOfRangeError);
  CHECK_THROWS_AS(cross_entropy(logits, -1), LabelOutOfRangeError);

  std::mt19937_64 rng(20);
  testutil::Program prog = [](Tape&, const std::vector<Var>& ps) {
    return cross_entropy(ps[0], 1);
  };
  CHECK(grad_check(prog, {rand_matrix(rng, 4, 1)}) <= 1e-4);
}

TEST_CASE("multi_margin values and gradient") {
  Tape t;
  Matrix s1(3, 1);
  s1 << 5.0, 0.0, 0.0;
  CHECK(t.value(multi_margin(t.param(s1), 0))(0, 0) == 0.0);

  Matrix s2(2, 1);
  s2 << 0.0, 0.5;
  CHECK(t.value(multi_margin(t.param(s2), 0))(0, 0) == doctest::Approx(0.75));

  // Probe away from hinge boundaries so central differences are valid; with
  // label 0 every competing margin term is strictly active.
  Matrix s3(4, 1);
  s3 << 0.4, -0.3, 1.8, 0.2;
  testutil::Program prog = [](Tape&, const std::vector<Var>& ps) {
    return multi_margin(ps[0], 0);
  };
  CHECK(grad_check(prog, {s3}) <= 1e-4);
}

TEST_CASE("composite chain through eig ops matches finite differences") {
  std::mt19937_64 rng(21);
  Matrix p0 = rand_spd(rng, 3, 0.5, 2.5);
  Matrix w0 = rand_matrix(rng, 3, 3);
  Matrix g0 = rand_matrix(rng, 3, 3);
  // Asymmetric readout g0 so the orthogonal factor's gradient is nonzero.
  testutil::Program prog = [g0](Tape& t, const std::vector<Var>& ps) {
    Var q = qr_q(ps[1]);
    Var p = ad::sym(ps[0]);
    Var iso = matmul(matmul(q, eig_fn(p, exp_fn())), transpose(q));
    Var back = eig_fn(ad::sym(iso), log_fn());
    return ad::sum(hadamard(back, t.constant(g0)));
  };
  CHECK(grad_check(prog, {p0, w0 + Matrix::Identity(3, 3)}) <= 1e-4);
}
