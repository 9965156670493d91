#pragma once

#include <vector>

#include "spdgnn/autodiff.hpp"
#include "spdgnn/symcore.hpp"

namespace spdgnn {

/// Row-wise upper triangle of a symmetric matrix, so I_2 -> (1, 0, 1).
Vector vectorize_upper(const SymMatrix& s);

/// y = W x for each embedding row; w is K x D, emb is N x D, result N x K.
ad::Var linear_scores(ad::Var w, ad::Var emb);

/// Nearest-class similarity -1/2 (x - mu_k) P_k (x - mu_k)^T + b_k with
/// P_k = exp(sym(pk_raw[k])) kept positive definite. mu is K x D, b is K x 1.
ad::Var ncmm_scores(ad::Var mu, const std::vector<ad::Var>& pk_raw, ad::Var b, ad::Var emb);

/// Trace scores tr(W_k X_i) where X_i is the symmetric n x n matrix whose
/// upper-triangle vectorization is row i of emb. W_k = sym(wk_raw[k]).
ad::Var svmmm_scores(const std::vector<ad::Var>& wk_raw, ad::Var emb, int n);

/// sum_k tr(W_k C W_k C) with C the batch mean of the X_i.
ad::Var svmmm_regularizer(const std::vector<ad::Var>& wk_raw, ad::Var emb_batch, int n);

/// Mean of -log softmax(scores_i)[y_i] over rows.
ad::Var mean_cross_entropy(ad::Var scores, const std::vector<int>& labels);
/// Mean of (1/K) sum_{l != y_i} max(0, 1 - s_{y_i} + s_l) over rows.
ad::Var mean_multi_margin(ad::Var scores, const std::vector<int>& labels);

/// Row-wise argmax; ties resolve to the lowest index.
std::vector<int> predict(const Matrix& scores);
double accuracy(const Matrix& scores, const std::vector<int>& labels);

}  // namespace spdgnn
