#include <doctest.h>

#include <cmath>
#include <random>

#include "spdgnn/classifiers.hpp"
#include "spdgnn/errors.hpp"
#include "spdgnn/manifolds.hpp"
#include "testutil.hpp"

using namespace spdgnn;

TEST_CASE("vectorize_upper reads the upper triangle row-wise") {
  Vector v2 = vectorize_upper(SymMatrix(Matrix::Identity(2, 2)));
  CHECK((v2 - (Vector(3) << 1, 0, 1).finished()).norm() == 0.0);
  Matrix m(3, 3);
  m << 1, 2, 3, 2, 4, 5, 3, 5, 6;
  Vector v3 = vectorize_upper(SymMatrix(m));
  CHECK((v3 - (Vector(6) << 1, 2, 3, 4, 5, 6).finished()).norm() == 0.0);
}

TEST_CASE("linear scores multiply rows by w transpose") {
  ad::Tape t;
  Matrix w(2, 3), x(2, 3);
  w << 1, 0, 1, 0, 2, 0;
  x << 1, 2, 3, 4, 5, 6;
  ad::Var s = linear_scores(t.param(w), t.constant(x));
  Matrix expect(2, 2);
  expect << 4, 4, 10, 10;
  CHECK((t.value(s) - expect).norm() == 0.0);
}

TEST_CASE("svm trace scores match direct trace computation") {
  std::mt19937_64 rng(7);
  const int n = 3;
  ad::Tape t;
  std::vector<ad::Var> wk;
  std::vector<Matrix> wk_sym;
  for (int c = 0; c < 2; ++c) {
    Matrix raw = testutil::rand_matrix(rng, n, n);
    wk.push_back(t.param(raw));
    wk_sym.push_back(0.5 * (raw + raw.transpose()));
  }
  std::vector<Matrix> xs;
  Matrix emb(4, n * (n + 1) / 2);
  for (int i = 0; i < 4; ++i) {
    Matrix x = testutil::rand_sym(rng, n);
    xs.push_back(x);
    emb.row(i) = vectorize_upper(SymMatrix(x)).transpose();
  }
  ad::Var s = svmmm_scores(wk, t.constant(emb), n);
  for (int i = 0; i < 4; ++i)
    for (int c = 0; c < 2; ++c)
      CHECK(t.value(s)(i, c) ==
            doctest::Approx((wk_sym[static_cast<size_t>(c)] * xs[static_cast<size_t>(i)]).trace())
                .epsilon(1e-12));
}

TEST_CASE("all-zero svm weights give margin loss (K-1)/K exactly") {
  for (int k : {2, 3, 5}) {
    ad::Tape t;
    std::vector<ad::Var> wk;
    for (int c = 0; c < k; ++c) wk.push_back(t.param(Matrix::Zero(3, 3)));
    std::mt19937_64 rng(static_cast<unsigned long long>(k));
    Matrix emb = testutil::rand_matrix(rng, 4, 6);
    ad::Var s = svmmm_scores(wk, t.constant(emb), 3);
    std::vector<int> labels = {0, k - 1, 1 % k, 0};
    ad::Var loss = mean_multi_margin(s, labels);
    CHECK(t.value(loss)(0, 0) == static_cast<double>(k - 1) / static_cast<double>(k));
  }
}

TEST_CASE("svm regularizer matches sum of trace products") {
  std::mt19937_64 rng(11);
  const int n = 2;
  ad::Tape t;
  std::vector<ad::Var> wk;
  std::vector<Matrix> wk_sym;
  for (int c = 0; c < 3; ++c) {
    Matrix raw = testutil::rand_matrix(rng, n, n);
    wk.push_back(t.param(raw));
    wk_sym.push_back(0.5 * (raw + raw.transpose()));
  }
  Matrix emb(3, 3);
  Matrix c_mat = Matrix::Zero(n, n);
  for (int i = 0; i < 3; ++i) {
    Matrix x = testutil::rand_sym(rng, n);
    emb.row(i) = vectorize_upper(SymMatrix(x)).transpose();
    c_mat += x / 3.0;
  }
  ad::Var reg = svmmm_regularizer(wk, t.constant(emb), n);
  double expect = 0.0;
  for (const Matrix& w : wk_sym) expect += (w * c_mat * w * c_mat).trace();
  CHECK(t.value(reg)(0, 0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("svm loss gradient passes finite differences") {
  const int n = 2, k = 3;
  std::mt19937_64 init_rng(3);
  std::vector<Matrix> inits;
  for (int c = 0; c < k; ++c) inits.push_back(testutil::rand_matrix(init_rng, n, n));
  Matrix emb = testutil::rand_matrix(init_rng, 4, 3);
  inits.push_back(emb);
  std::vector<int> labels = {0, 2, 1, 0};
  testutil::Program prog = [labels, n, k](ad::Tape&, const std::vector<ad::Var>& ps) {
    std::vector<ad::Var> wk(ps.begin(), ps.begin() + k);
    ad::Var e = ps.back();
    ad::Var hinge = mean_multi_margin(svmmm_scores(wk, e, n), labels);
    return ad::add(hinge, ad::scale(svmmm_regularizer(wk, e, n), 0.01));
  };
  CHECK(testutil::grad_check(prog, inits) < 1e-5);
}

TEST_CASE("nc scores match the quadratic similarity") {
  std::mt19937_64 rng(5);
  const int d = 4, k = 2;
  ad::Tape t;
  Matrix mu = testutil::rand_matrix(rng, k, d);
  Matrix b(k, 1);
  b << 0.3, -0.1;
  std::vector<ad::Var> pk;
  std::vector<Matrix> pk_mats;
  for (int c = 0; c < k; ++c) {
    Matrix raw = testutil::rand_matrix(rng, d, d, 0.4);
    pk.push_back(t.param(raw));
    pk_mats.push_back(spd_exp(SymMatrix(0.5 * (raw + raw.transpose()))).mat());
  }
  Matrix emb = testutil::rand_matrix(rng, 3, d);
  ad::Var s = ncmm_scores(t.param(mu), pk, t.param(b), t.constant(emb));
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < k; ++c) {
      Vector diff = (emb.row(i) - mu.row(c)).transpose();
      double expect = -0.5 * diff.dot(pk_mats[static_cast<size_t>(c)] * diff) + b(c, 0);
      CHECK(t.value(s)(i, c) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("nc similarity has zero input gradient at the centroid") {
  const int d = 3;
  ad::Tape t;
  Matrix mu(2, d);
  mu << 0.4, -0.2, 0.9, -1.0, 0.3, 0.0;
  std::mt19937_64 rng(2);
  std::vector<ad::Var> pk = {t.constant(testutil::rand_sym(rng, d)),
                             t.constant(Matrix::Zero(d, d))};
  ad::Var emb = t.param(mu.row(0));
  ad::Var s = ncmm_scores(t.constant(mu), pk, t.constant(Matrix::Zero(2, 1)), emb);
  ad::Var target = ad::gather_rows(ad::transpose(s), {0});  // score of class 0
  t.backward(ad::sum(target));
  CHECK(t.grad(emb).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("nc loss gradient passes finite differences") {
  const int d = 3, k = 2;
  std::mt19937_64 rng(9);
  std::vector<Matrix> inits = {testutil::rand_matrix(rng, k, d),   // mu
                               testutil::rand_matrix(rng, d, d, 0.3),
                               testutil::rand_matrix(rng, d, d, 0.3),
                               testutil::rand_matrix(rng, k, 1),   // b
                               testutil::rand_matrix(rng, 4, d)};  // emb
  std::vector<int> labels = {0, 1, 1, 0};
  testutil::Program prog = [labels](ad::Tape&, const std::vector<ad::Var>& ps) {
    ad::Var s = ncmm_scores(ps[0], {ps[1], ps[2]}, ps[3], ps[4]);
    return mean_multi_margin(s, labels);
  };
  CHECK(testutil::grad_check(prog, inits) < 1e-5);
}

TEST_CASE("mean cross entropy of uniform scores is log K") {
  ad::Tape t;
  ad::Var s = t.constant(Matrix::Zero(3, 4));
  ad::Var loss = mean_cross_entropy(s, {0, 1, 3});
  CHECK(t.value(loss)(0, 0) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  CHECK_THROWS_AS(mean_cross_entropy(s, {0, 1}), ShapeMismatchError);
}

TEST_CASE("predict breaks ties toward the lowest index") {
  Matrix s(3, 3);
  s << 1, 1, 0, 0, 2, 2, -1, -1, -1;
  CHECK(predict(s) == std::vector<int>{0, 1, 0});
  CHECK(accuracy(s, {0, 1, 2}) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("embedding width must be triangular for svm scores") {
  ad::Tape t;
  std::vector<ad::Var> wk = {t.param(Matrix::Zero(3, 3))};
  CHECK_THROWS_AS(svmmm_scores(wk, t.constant(Matrix::Zero(2, 5)), 3), ShapeMismatchError);
}
