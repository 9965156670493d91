#include "spdgnn/classifiers.hpp"

#include "spdgnn/errors.hpp"
#include "spdgnn/manifolds.hpp"

namespace spdgnn {

namespace {

// Upper-triangle mask that doubles off-diagonal entries, so that
// tr(W X) = <mask . vec(W), vec(X)> for symmetric W, X.
Matrix trace_mask(int n) {
  Matrix m(1, n * (n + 1) / 2);
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) m(0, k++) = i == j ? 1.0 : 2.0;
  return m;
}

}  // namespace

Vector vectorize_upper(const SymMatrix& s) {
  const int n = s.dim();
  Vector v(n * (n + 1) / 2);
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) v(k++) = s.mat()(i, j);
  return v;
}

ad::Var linear_scores(ad::Var w, ad::Var emb) {
  return ad::matmul(emb, ad::transpose(w));
}

ad::Var ncmm_scores(ad::Var mu, const std::vector<ad::Var>& pk_raw, ad::Var b, ad::Var emb) {
  ad::Tape& t = *emb.tape;
  const int num_rows = static_cast<int>(t.value(emb).rows());
  const int d = static_cast<int>(t.value(emb).cols());
  const int k = static_cast<int>(pk_raw.size());
  if (t.value(mu).rows() != k || t.value(mu).cols() != d || t.value(b).rows() != k)
    throw ShapeMismatchError("ncmm_scores: parameter shapes do not match");
  ad::Var ones_col = t.constant(Matrix::Ones(d, 1));
  ad::Var ones_rows = t.constant(Matrix::Ones(num_rows, 1));
  ad::Var out;
  for (int c = 0; c < k; ++c) {
    ad::Var mu_c = ad::gather_rows(mu, {c});
    ad::Var diff = ad::add_rowvec(emb, ad::scale(mu_c, -1.0));
    ad::Var pc = diff::spd_exp(ad::sym(pk_raw[static_cast<size_t>(c)]));
    ad::Var quad = ad::matmul(ad::hadamard(ad::matmul(diff, pc), diff), ones_col);
    ad::Var col = ad::add(ad::scale(quad, -0.5), ad::mul_scalar(ones_rows, ad::gather_rows(b, {c})));
    out = c == 0 ? col : ad::concat(out, col, 1);
  }
  return out;
}

ad::Var svmmm_scores(const std::vector<ad::Var>& wk_raw, ad::Var emb, int n) {
  ad::Tape& t = *emb.tape;
  if (t.value(emb).cols() != n * (n + 1) / 2)
    throw ShapeMismatchError("svmmm_scores: embedding width must be n(n+1)/2");
  ad::Var mask = t.constant(trace_mask(n));
  ad::Var out;
  for (size_t c = 0; c < wk_raw.size(); ++c) {
    ad::Var row = ad::hadamard(ad::upper_tri_vec(ad::sym(wk_raw[c])), mask);
    ad::Var col = ad::matmul(emb, ad::transpose(row));
    out = c == 0 ? col : ad::concat(out, col, 1);
  }
  return out;
}

ad::Var svmmm_regularizer(const std::vector<ad::Var>& wk_raw, ad::Var emb_batch, int n) {
  ad::Tape& t = *emb_batch.tape;
  const int num_rows = static_cast<int>(t.value(emb_batch).rows());
  if (num_rows < 1) throw ShapeMismatchError("svmmm_regularizer: empty batch");
  ad::Var mean_row =
      t.constant(Matrix::Constant(1, num_rows, 1.0 / static_cast<double>(num_rows)));
  ad::Var c_mat = ad::upper_tri_unvec(ad::matmul(mean_row, emb_batch), n);
  ad::Var out;
  for (size_t c = 0; c < wk_raw.size(); ++c) {
    ad::Var wk = ad::sym(wk_raw[c]);
    ad::Var term = ad::trace(ad::matmul(ad::matmul(ad::matmul(wk, c_mat), wk), c_mat));
    out = c == 0 ? term : ad::add(out, term);
  }
  return out;
}

ad::Var mean_cross_entropy(ad::Var scores, const std::vector<int>& labels) {
  ad::Tape& t = *scores.tape;
  if (t.value(scores).rows() != static_cast<Eigen::Index>(labels.size()))
    throw ShapeMismatchError("mean_cross_entropy: one label per score row required");
  std::vector<ad::Var> terms;
  terms.reserve(labels.size());
  for (size_t i = 0; i < labels.size(); ++i)
    terms.push_back(ad::cross_entropy(ad::gather_rows(scores, {static_cast<int>(i)}), labels[i]));
  return ad::mean(terms);
}

ad::Var mean_multi_margin(ad::Var scores, const std::vector<int>& labels) {
  ad::Tape& t = *scores.tape;
  if (t.value(scores).rows() != static_cast<Eigen::Index>(labels.size()))
    throw ShapeMismatchError("mean_multi_margin: one label per score row required");
  std::vector<ad::Var> terms;
  terms.reserve(labels.size());
  for (size_t i = 0; i < labels.size(); ++i)
    terms.push_back(ad::multi_margin(ad::gather_rows(scores, {static_cast<int>(i)}), labels[i]));
  return ad::mean(terms);
}

std::vector<int> predict(const Matrix& scores) {
  std::vector<int> out(static_cast<size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    int best = 0;
    for (Eigen::Index j = 1; j < scores.cols(); ++j)
      if (scores(i, j) > scores(i, best)) best = static_cast<int>(j);
    out[static_cast<size_t>(i)] = best;
  }
  return out;
}

double accuracy(const Matrix& scores, const std::vector<int>& labels) {
  if (scores.rows() != static_cast<Eigen::Index>(labels.size()))
    throw ShapeMismatchError("accuracy: one label per score row required");
  if (labels.empty()) return 0.0;
  std::vector<int> pred = predict(scores);
  int hits = 0;
  for (size_t i = 0; i < labels.size(); ++i)
    if (pred[i] == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace spdgnn
