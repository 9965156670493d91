#include "spdgnn/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spdgnn/classifiers.hpp"
#include "spdgnn/errors.hpp"

namespace spdgnn {

namespace {

Matrix uniform_init(std::mt19937_64& rng, int rows, int cols) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

// 1 at positions of diagonal entries within the row-wise upper-triangle
// vectorization, 0 elsewhere.
Matrix diag_positions(int n) {
  Matrix m = Matrix::Zero(1, n * (n + 1) / 2);
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j, ++k)
      if (i == j) m(0, k) = 1.0;
  return m;
}

}  // namespace

Arch parse_arch(const std::string& name) {
  if (name == "gcn") return Arch::gcn;
  if (name == "gat") return Arch::gat;
  if (name == "cheb") return Arch::cheb;
  if (name == "sgc") return Arch::sgc;
  if (name == "gin") return Arch::gin;
  throw ConfigError("unknown architecture '" + name + "'");
}

ClassifierKind parse_classifier(const std::string& name) {
  if (name == "linear-xe") return ClassifierKind::linear_xe;
  if (name == "svm-mm") return ClassifierKind::svm_mm;
  if (name == "nc-mm") return ClassifierKind::nc_mm;
  throw ConfigError("unknown classifier '" + name + "'");
}

SpdNonlin parse_nonlin(const std::string& name) {
  if (name == "tgreeig") return SpdNonlin::tgreeig;
  if (name == "reeig") return SpdNonlin::reeig;
  throw ConfigError("unknown nonlinearity '" + name + "'");
}

const char* arch_name(Arch a) {
  switch (a) {
    case Arch::gcn: return "gcn";
    case Arch::gat: return "gat";
    case Arch::cheb: return "cheb";
    case Arch::sgc: return "sgc";
    case Arch::gin: return "gin";
  }
  return "?";
}

const char* classifier_name(ClassifierKind c) {
  switch (c) {
    case ClassifierKind::linear_xe: return "linear-xe";
    case ClassifierKind::svm_mm: return "svm-mm";
    case ClassifierKind::nc_mm: return "nc-mm";
  }
  return "?";
}

const char* nonlin_name(SpdNonlin n) {
  return n == SpdNonlin::tgreeig ? "tgreeig" : "reeig";
}

void ModelConfig::validate() const {
  if (in_dim < 1) throw ConfigError("in_dim must be positive");
  if (num_classes < 2) throw ConfigError("need at least two classes");
  if (num_layers < 1) throw ConfigError("num_layers must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(reeig_eps > 0.0)) throw ConfigError("reeig_eps must be positive");
  if (margin_reg < 0.0) throw NegativeLambdaError("margin regularizer weight must be >= 0");
  if (classifier == ClassifierKind::svm_mm && geometry.kind != GeomKind::spd)
    throw ConfigError("svm-mm scores trace products of symmetric matrices; it requires spd geometry");
}

int ParamStore::add(const std::string& name, Matrix v) {
  if (index(name) >= 0) throw ConfigError("duplicate parameter '" + name + "'");
  names.push_back(name);
  values.push_back(std::move(v));
  return static_cast<int>(values.size()) - 1;
}

int ParamStore::index(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  return -1;
}

Matrix& ParamStore::at(const std::string& name) {
  int i = index(name);
  if (i < 0) throw ConfigError("no parameter named '" + name + "'");
  return values[static_cast<size_t>(i)];
}

const Matrix& ParamStore::at(const std::string& name) const {
  int i = index(name);
  if (i < 0) throw ConfigError("no parameter named '" + name + "'");
  return values[static_cast<size_t>(i)];
}

ad::Var gat_attention(ad::Tape& t, ad::Var att, ad::Var rows, const Graph::EdgeSet& es) {
  (void)t;
  ad::Var cat = ad::concat(ad::gather_rows(rows, es.dst), ad::gather_rows(rows, es.src), 1);
  ad::Var logits = ad::leaky_relu(ad::matmul(cat, ad::transpose(att)), 0.2);
  return ad::segment_softmax(logits, es.offsets);
}

GnnModel::GnnModel(const ModelConfig& cfg, unsigned long long seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const int amb = cfg_.geometry.ambient();
  const int side = cfg_.geometry.dim;  // spd n / product m
  const int k = cfg_.num_classes;
  const GeomKind gk = cfg_.geometry.kind;

  if (gk == GeomKind::spd) {
    params_.add("in.w", uniform_init(rng, amb, cfg_.in_dim));
  } else if (gk == GeomKind::product) {
    params_.add("in.wh", uniform_init(rng, side, cfg_.in_dim));
    params_.add("in.we", uniform_init(rng, side, cfg_.in_dim));
  }

  const int layers = cfg_.arch == Arch::sgc ? 1 : cfg_.num_layers;
  for (int l = 0; l < layers; ++l) {
    const std::string base = "l" + std::to_string(l);
    auto add_transform = [&](const std::string& which, int out, int in) {
      if (gk == GeomKind::product) {
        for (const char* blk : {"11", "12", "21", "22"})
          params_.add(base + "." + which + blk, uniform_init(rng, side, side));
      } else {
        params_.add(base + "." + which, uniform_init(rng, out, in));
      }
    };
    // Curved-with-input-map geometries are square everywhere; euclidean and
    // hyperbolic layers absorb the feature dimension in their first transform.
    const bool square = gk == GeomKind::spd || gk == GeomKind::product;
    const int in0 = square ? side : (l == 0 ? cfg_.in_dim : amb);
    const int out0 = square ? side : amb;
    switch (cfg_.arch) {
      case Arch::gcn:
      case Arch::gat:
      case Arch::sgc:
        add_transform("w", out0, in0);
        break;
      case Arch::cheb:
        add_transform("w", out0, in0);
        add_transform("u", out0, in0);
        break;
      case Arch::gin:
        add_transform("w", out0, in0);
        add_transform("u", out0, out0);
        break;
    }
    if (cfg_.arch == Arch::gat) params_.add(base + ".a", uniform_init(rng, 1, 2 * amb));
    if (cfg_.arch == Arch::gin) params_.add(base + ".eps", Matrix::Zero(1, 1));
    if (gk == GeomKind::spd) {
      params_.add(base + ".b", Matrix::Zero(side, side));
    } else if (gk == GeomKind::product) {
      params_.add(base + ".bh", Matrix::Zero(1, side));
      params_.add(base + ".be", Matrix::Zero(1, side));
    } else {
      params_.add(base + ".b", Matrix::Zero(1, amb));
    }
  }

  switch (cfg_.classifier) {
    case ClassifierKind::linear_xe:
      params_.add("clf.w", uniform_init(rng, k, amb));
      break;
    case ClassifierKind::svm_mm:
      for (int c = 0; c < k; ++c) params_.add("clf.w" + std::to_string(c), Matrix::Zero(side, side));
      break;
    case ClassifierKind::nc_mm:
      params_.add("clf.mu", uniform_init(rng, k, amb));
      for (int c = 0; c < k; ++c) params_.add("clf.p" + std::to_string(c), Matrix::Zero(amb, amb));
      params_.add("clf.b", Matrix::Zero(k, 1));
      break;
  }
}

std::vector<ad::Var> GnnModel::register_params(ad::Tape& t) const {
  std::vector<ad::Var> pv;
  pv.reserve(params_.size());
  for (const Matrix& v : params_.values) pv.push_back(t.param(v));
  return pv;
}

ad::Var GnnModel::pvar(const std::vector<ad::Var>& pv, const std::string& name) const {
  int i = params_.index(name);
  if (i < 0 || static_cast<size_t>(i) >= pv.size())
    throw ConfigError("parameter '" + name + "' is not registered");
  return pv[static_cast<size_t>(i)];
}

GnnModel::States GnnModel::input_states(ad::Tape& t, const std::vector<ad::Var>& pv,
                                        const Graph& g) const {
  if (g.feature_dim() != cfg_.in_dim)
    throw ConfigError("graph features have dim " + std::to_string(g.feature_dim()) +
                      ", model expects " + std::to_string(cfg_.in_dim));
  ad::Var x = t.constant(g.features);
  States s;
  switch (cfg_.geometry.kind) {
    case GeomKind::euclidean:
      s.dense = x;
      break;
    case GeomKind::hyperbolic:
      for (int i = 0; i < g.num_nodes; ++i)
        s.p.push_back(diff::expmap0(ad::gather_rows(x, {i})));
      break;
    case GeomKind::spd: {
      const int n = cfg_.geometry.dim;
      ad::Var rows = ad::matmul(x, ad::transpose(pvar(pv, "in.w")));
      // The symmetrized fill doubles diagonal entries of the raw vector.
      ad::Var adj =
          ad::add(rows, ad::hadamard(rows, t.constant(diag_positions(n).replicate(g.num_nodes, 1))));
      for (int i = 0; i < g.num_nodes; ++i)
        s.p.push_back(diff::spd_exp(ad::upper_tri_unvec(ad::gather_rows(adj, {i}), n)));
      break;
    }
    case GeomKind::product: {
      ad::Var rh = ad::matmul(x, ad::transpose(pvar(pv, "in.wh")));
      ad::Var re = ad::matmul(x, ad::transpose(pvar(pv, "in.we")));
      for (int i = 0; i < g.num_nodes; ++i) {
        s.p.push_back(diff::expmap0(ad::gather_rows(rh, {i})));
        s.e.push_back(ad::gather_rows(re, {i}));
      }
      break;
    }
  }
  return s;
}

ad::Var GnnModel::tangent_rows(ad::Tape& t, const States& s) const {
  (void)t;
  switch (cfg_.geometry.kind) {
    case GeomKind::euclidean:
      return s.dense;
    case GeomKind::hyperbolic: {
      std::vector<ad::Var> rows;
      rows.reserve(s.p.size());
      for (const ad::Var& p : s.p) rows.push_back(diff::logmap0(p));
      return ad::stack_rows(rows);
    }
    case GeomKind::spd: {
      std::vector<ad::Var> rows;
      rows.reserve(s.p.size());
      for (const ad::Var& p : s.p) rows.push_back(ad::upper_tri_vec(diff::spd_log(p)));
      return ad::stack_rows(rows);
    }
    case GeomKind::product: {
      std::vector<ad::Var> rows;
      rows.reserve(s.p.size());
      for (size_t i = 0; i < s.p.size(); ++i)
        rows.push_back(ad::concat(diff::logmap0(s.p[i]), s.e[i], 1));
      return ad::stack_rows(rows);
    }
  }
  throw ConfigError("unreachable geometry kind");
}

GnnModel::States GnnModel::states_from_tangent_rows(ad::Tape& t, ad::Var rows) const {
  States s;
  const int n_rows = static_cast<int>(t.value(rows).rows());
  switch (cfg_.geometry.kind) {
    case GeomKind::euclidean:
      s.dense = rows;
      break;
    case GeomKind::hyperbolic:
      for (int i = 0; i < n_rows; ++i)
        s.p.push_back(diff::expmap0(ad::gather_rows(rows, {i})));
      break;
    case GeomKind::spd: {
      const int n = cfg_.geometry.dim;
      for (int i = 0; i < n_rows; ++i)
        s.p.push_back(diff::spd_exp(ad::upper_tri_unvec(ad::gather_rows(rows, {i}), n)));
      break;
    }
    case GeomKind::product: {
      const int m = cfg_.geometry.dim;
      for (int i = 0; i < n_rows; ++i) {
        ad::Var r = ad::gather_rows(rows, {i});
        s.p.push_back(diff::expmap0(ad::slice_cols(r, 0, m)));
        s.e.push_back(ad::slice_cols(r, m, m));
      }
      break;
    }
  }
  return s;
}

GnnModel::States GnnModel::transform(ad::Tape& t, const std::vector<ad::Var>& pv, const States& s,
                                     const std::string& base) const {
  (void)t;
  States out;
  switch (cfg_.geometry.kind) {
    case GeomKind::euclidean:
      out.dense = ad::matmul(s.dense, ad::transpose(pvar(pv, base)));
      break;
    case GeomKind::hyperbolic: {
      ad::Var wt = ad::transpose(pvar(pv, base));
      for (const ad::Var& p : s.p)
        out.p.push_back(diff::expmap0(ad::matmul(diff::logmap0(p), wt)));
      break;
    }
    case GeomKind::spd: {
      ad::Var q = diff::orthogonalize(pvar(pv, base));
      ad::Var qt = ad::transpose(q);
      for (const ad::Var& p : s.p)
        out.p.push_back(ad::sym(ad::matmul(ad::matmul(q, p), qt)));
      break;
    }
    case GeomKind::product: {
      ad::Var w11t = ad::transpose(pvar(pv, base + "11"));
      ad::Var w12t = ad::transpose(pvar(pv, base + "12"));
      ad::Var w21t = ad::transpose(pvar(pv, base + "21"));
      ad::Var w22t = ad::transpose(pvar(pv, base + "22"));
      for (size_t i = 0; i < s.p.size(); ++i) {
        ad::Var th = diff::logmap0(s.p[i]);
        out.p.push_back(diff::mobius_add(diff::expmap0(ad::matmul(th, w11t)),
                                         diff::expmap0(ad::matmul(s.e[i], w12t))));
        out.e.push_back(ad::add(ad::matmul(th, w21t), ad::matmul(s.e[i], w22t)));
      }
      break;
    }
  }
  return out;
}

GnnModel::States GnnModel::bias_nonlin(ad::Tape& t, const std::vector<ad::Var>& pv,
                                       const States& s, int layer) const {
  const std::string base = "l" + std::to_string(layer);
  States out;
  switch (cfg_.geometry.kind) {
    case GeomKind::euclidean:
      out.dense = ad::relu(ad::add_rowvec(s.dense, pvar(pv, base + ".b")));
      break;
    case GeomKind::hyperbolic: {
      ad::Var bpt = diff::expmap0(pvar(pv, base + ".b"));
      for (const ad::Var& p : s.p) out.p.push_back(diff::hyp_bias_nonlin(p, bpt));
      break;
    }
    case GeomKind::spd: {
      ad::Var bias = diff::spd_exp(ad::sym(pvar(pv, base + ".b")));
      for (const ad::Var& p : s.p) {
        ad::Var z = diff::gyro_add(p, bias);
        out.p.push_back(cfg_.nonlin == SpdNonlin::tgreeig ? diff::tgreeig(z)
                                                          : diff::reeig(z, cfg_.reeig_eps));
      }
      break;
    }
    case GeomKind::product: {
      ad::Var bh = diff::expmap0(pvar(pv, base + ".bh"));
      ad::Var be = pvar(pv, base + ".be");
      for (size_t i = 0; i < s.p.size(); ++i) {
        out.p.push_back(diff::hyp_bias_nonlin(s.p[i], bh));
        out.e.push_back(ad::relu(ad::add(s.e[i], be)));
      }
      break;
    }
  }
  (void)t;
  return out;
}

GnnModel::States GnnModel::nonlin_only(ad::Tape& t, const States& s) const {
  (void)t;
  States out;
  switch (cfg_.geometry.kind) {
    case GeomKind::euclidean:
      out.dense = ad::relu(s.dense);
      break;
    case GeomKind::hyperbolic:
      for (const ad::Var& p : s.p)
        out.p.push_back(diff::expmap0(ad::relu(diff::logmap0(p))));
      break;
    case GeomKind::spd:
      for (const ad::Var& p : s.p)
        out.p.push_back(cfg_.nonlin == SpdNonlin::tgreeig ? diff::tgreeig(p)
                                                          : diff::reeig(p, cfg_.reeig_eps));
      break;
    case GeomKind::product:
      for (size_t i = 0; i < s.p.size(); ++i) {
        out.p.push_back(diff::expmap0(ad::relu(diff::logmap0(s.p[i]))));
        out.e.push_back(ad::relu(s.e[i]));
      }
      break;
  }
  return out;
}

double GnnModel::min_state_eig(ad::Tape& t, const States& s) const {
  if (cfg_.geometry.kind != GeomKind::spd) return std::numeric_limits<double>::quiet_NaN();
  double m = std::numeric_limits<double>::infinity();
  for (const ad::Var& p : s.p)
    m = std::min(m, detail::jacobi_eig(t.value(p)).lambda.minCoeff());
  return m;
}

GnnModel::States GnnModel::run_layers(ad::Tape& t, const std::vector<ad::Var>& pv, const Graph& g,
                                      States s, std::mt19937_64& rng, bool train,
                                      double* min_eig) const {
  auto track = [&](const States& st) {
    if (min_eig) *min_eig = std::min(*min_eig, min_state_eig(t, st));
  };
  const Graph::EdgeSet es = g.edges_with_self();
  const int n_nodes = g.num_nodes;
  switch (cfg_.arch) {
    case Arch::gcn:
    case Arch::gat: {
      const std::vector<double> kw = g.gcn_weights();
      for (int l = 0; l < cfg_.num_layers; ++l) {
        const std::string base = "l" + std::to_string(l);
        s = transform(t, pv, s, base + ".w");
        ad::Var rows = ad::dropout(tangent_rows(t, s), cfg_.dropout, rng, train);
        ad::Var agg;
        if (cfg_.arch == Arch::gat) {
          ad::Var alpha = gat_attention(t, pvar(pv, base + ".a"), rows, es);
          agg = ad::spmm_var(es.dst, es.src, alpha, rows, n_nodes);
        } else {
          agg = ad::spmm(es.dst, es.src, kw, rows, n_nodes);
        }
        s = bias_nonlin(t, pv, states_from_tangent_rows(t, agg), l);
        track(s);
      }
      break;
    }
    case Arch::cheb: {
      const std::vector<double> lw = g.cheb_weights();
      for (int l = 0; l < cfg_.num_layers; ++l) {
        const std::string base = "l" + std::to_string(l);
        States s0 = transform(t, pv, s, base + ".w");
        States s1 = transform(t, pv, s, base + ".u");
        ad::Var r0 = ad::dropout(tangent_rows(t, s0), cfg_.dropout, rng, train);
        ad::Var r1 = ad::dropout(tangent_rows(t, s1), cfg_.dropout, rng, train);
        ad::Var agg = ad::add(r0, ad::spmm(es.dst, es.src, lw, r1, n_nodes));
        s = bias_nonlin(t, pv, states_from_tangent_rows(t, agg), l);
        track(s);
      }
      break;
    }
    case Arch::sgc: {
      const std::vector<double> kw = g.gcn_weights();
      ad::Var rows = ad::dropout(tangent_rows(t, s), cfg_.dropout, rng, train);
      for (int l = 0; l < cfg_.num_layers; ++l)
        rows = ad::spmm(es.dst, es.src, kw, rows, n_nodes);
      s = transform(t, pv, states_from_tangent_rows(t, rows), "l0.w");
      s = bias_nonlin(t, pv, s, 0);
      track(s);
      break;
    }
    case Arch::gin: {
      const Graph::EdgeSet ns = g.edges_without_self();
      const std::vector<double> ones(ns.dst.size(), 1.0);
      for (int l = 0; l < cfg_.num_layers; ++l) {
        const std::string base = "l" + std::to_string(l);
        ad::Var rows = ad::dropout(tangent_rows(t, s), cfg_.dropout, rng, train);
        ad::Var self_scaled = ad::mul_scalar(rows, ad::add_const(pvar(pv, base + ".eps"), 1.0));
        ad::Var agg = ad::add(self_scaled, ad::spmm(ns.dst, ns.src, ones, rows, n_nodes));
        s = states_from_tangent_rows(t, agg);
        s = nonlin_only(t, transform(t, pv, s, base + ".w"));
        s = transform(t, pv, s, base + ".u");
        s = bias_nonlin(t, pv, s, l);
        track(s);
      }
      break;
    }
  }
  return s;
}

GnnModel::Forward GnnModel::node_embeddings(ad::Tape& t, const std::vector<ad::Var>& pv,
                                            const Graph& g, std::mt19937_64& rng, bool train,
                                            bool track_spectrum) const {
  double min_eig = std::numeric_limits<double>::infinity();
  double* mp = track_spectrum && cfg_.geometry.kind == GeomKind::spd ? &min_eig : nullptr;
  States s = input_states(t, pv, g);
  if (mp) *mp = std::min(*mp, min_state_eig(t, s));
  s = run_layers(t, pv, g, std::move(s), rng, train, mp);
  Forward f;
  f.emb = tangent_rows(t, s);
  if (mp) f.min_stage_eig = min_eig;
  return f;
}

GnnModel::Forward GnnModel::graph_embedding(ad::Tape& t, const std::vector<ad::Var>& pv,
                                            const Graph& g, std::mt19937_64& rng, bool train,
                                            bool track_spectrum) const {
  double min_eig = std::numeric_limits<double>::infinity();
  double* mp = track_spectrum && cfg_.geometry.kind == GeomKind::spd ? &min_eig : nullptr;
  States s = input_states(t, pv, g);
  if (mp) *mp = std::min(*mp, min_state_eig(t, s));
  s = run_layers(t, pv, g, std::move(s), rng, train, mp);

  const int n = g.num_nodes;
  ad::Var mean_row = t.constant(Matrix::Constant(1, n, 1.0 / static_cast<double>(n)));
  Forward f;
  switch (cfg_.geometry.kind) {
    case GeomKind::euclidean:
      f.emb = ad::matmul(mean_row, s.dense);
      break;
    case GeomKind::hyperbolic: {
      std::vector<ad::Var> rows;
      rows.reserve(s.p.size());
      for (const ad::Var& p : s.p) rows.push_back(diff::logmap0(p));
      ad::Var pt = diff::expmap0(ad::matmul(mean_row, ad::stack_rows(rows)));
      f.emb = diff::logmap0(pt);
      break;
    }
    case GeomKind::spd: {
      const std::vector<double> w(s.p.size(), 1.0 / static_cast<double>(n));
      ad::Var zbar = ad::weighted_sum(s.p, w);
      if (mp) {
        States tmp;
        tmp.p.push_back(zbar);
        *mp = std::min(*mp, min_state_eig(t, tmp));
      }
      f.emb = ad::upper_tri_vec(diff::spd_log(zbar));
      break;
    }
    case GeomKind::product: {
      std::vector<ad::Var> hrows;
      hrows.reserve(s.p.size());
      for (const ad::Var& p : s.p) hrows.push_back(diff::logmap0(p));
      ad::Var hpt = diff::expmap0(ad::matmul(mean_row, ad::stack_rows(hrows)));
      ad::Var ebar = ad::matmul(mean_row, ad::stack_rows(s.e));
      f.emb = ad::concat(diff::logmap0(hpt), ebar, 1);
      break;
    }
  }
  if (mp) f.min_stage_eig = min_eig;
  return f;
}

ad::Var GnnModel::scores(ad::Tape& t, const std::vector<ad::Var>& pv, ad::Var emb_rows) const {
  (void)t;
  switch (cfg_.classifier) {
    case ClassifierKind::linear_xe:
      return linear_scores(pvar(pv, "clf.w"), emb_rows);
    case ClassifierKind::svm_mm: {
      std::vector<ad::Var> wk;
      for (int c = 0; c < cfg_.num_classes; ++c) wk.push_back(pvar(pv, "clf.w" + std::to_string(c)));
      return svmmm_scores(wk, emb_rows, cfg_.geometry.dim);
    }
    case ClassifierKind::nc_mm: {
      std::vector<ad::Var> pk;
      for (int c = 0; c < cfg_.num_classes; ++c) pk.push_back(pvar(pv, "clf.p" + std::to_string(c)));
      return ncmm_scores(pvar(pv, "clf.mu"), pk, pvar(pv, "clf.b"), emb_rows);
    }
  }
  throw ConfigError("unreachable classifier kind");
}

ad::Var GnnModel::loss(ad::Tape& t, const std::vector<ad::Var>& pv, ad::Var emb_rows,
                       const std::vector<int>& labels) const {
  ad::Var sc = scores(t, pv, emb_rows);
  switch (cfg_.classifier) {
    case ClassifierKind::linear_xe:
      return mean_cross_entropy(sc, labels);
    case ClassifierKind::nc_mm:
      return mean_multi_margin(sc, labels);
    case ClassifierKind::svm_mm: {
      ad::Var hinge = mean_multi_margin(sc, labels);
      if (cfg_.margin_reg == 0.0) return hinge;
      std::vector<ad::Var> wk;
      for (int c = 0; c < cfg_.num_classes; ++c) wk.push_back(pvar(pv, "clf.w" + std::to_string(c)));
      return ad::add(hinge, ad::scale(svmmm_regularizer(wk, emb_rows, cfg_.geometry.dim),
                                      cfg_.margin_reg));
    }
  }
  throw ConfigError("unreachable classifier kind");
}

}  // namespace spdgnn
