#pragma once

#include <random>
#include <string>
#include <vector>

#include "spdgnn/autodiff.hpp"
#include "spdgnn/graph.hpp"
#include "spdgnn/manifolds.hpp"

namespace spdgnn {

enum class Arch { gcn, gat, cheb, sgc, gin };
enum class ClassifierKind { linear_xe, svm_mm, nc_mm };
enum class SpdNonlin { tgreeig, reeig };

Arch parse_arch(const std::string& name);
ClassifierKind parse_classifier(const std::string& name);
SpdNonlin parse_nonlin(const std::string& name);
const char* arch_name(Arch a);
const char* classifier_name(ClassifierKind c);
const char* nonlin_name(SpdNonlin n);

struct ModelConfig {
  Arch arch = Arch::gcn;
  GeometryContext geometry = GeometryContext::euclidean(6);
  int num_layers = 2;
  int in_dim = 0;
  int num_classes = 2;
  ClassifierKind classifier = ClassifierKind::linear_xe;
  SpdNonlin nonlin = SpdNonlin::tgreeig;
  double reeig_eps = 0.5;
  double dropout = 0.0;
  double margin_reg = 0.05;  // trace regularizer weight for svm-mm

  void validate() const;  // throws ConfigError / NegativeLambdaError
};

/// Flat named parameter list. Registration order is fixed by the model so a
/// seed reproduces the exact same initial values.
struct ParamStore {
  std::vector<std::string> names;
  std::vector<Matrix> values;

  int add(const std::string& name, Matrix v);
  int index(const std::string& name) const;  // -1 when absent
  Matrix& at(const std::string& name);
  const Matrix& at(const std::string& name) const;
  size_t size() const { return values.size(); }
};

/// Attention weights for destination-major edges: softmax over each node's
/// incoming segment of LeakyReLU(a^T [t_dst || t_src]) logits. Rows is the
/// N x ambient matrix of tangent vectorizations. Result is E x 1.
ad::Var gat_attention(ad::Tape& t, ad::Var att, ad::Var rows, const Graph::EdgeSet& es);

class GnnModel {
 public:
  GnnModel(const ModelConfig& cfg, unsigned long long seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Registers every parameter on a fresh tape, in store order.
  std::vector<ad::Var> register_params(ad::Tape& t) const;

  struct Forward {
    ad::Var emb;  // node tangent rows (N x ambient) or a readout row (1 x ambient)
    // Smallest eigenvalue across every stage output when spectrum tracking is
    // on and the geometry is spd; NaN otherwise.
    double min_stage_eig = std::numeric_limits<double>::quiet_NaN();
  };

  Forward node_embeddings(ad::Tape& t, const std::vector<ad::Var>& pv, const Graph& g,
                          std::mt19937_64& rng, bool train, bool track_spectrum = false) const;
  Forward graph_embedding(ad::Tape& t, const std::vector<ad::Var>& pv, const Graph& g,
                          std::mt19937_64& rng, bool train, bool track_spectrum = false) const;

  /// Classifier scores, rows x num_classes.
  ad::Var scores(ad::Tape& t, const std::vector<ad::Var>& pv, ad::Var emb_rows) const;

  /// Mean training loss over the given embedding rows; labels align with rows.
  ad::Var loss(ad::Tape& t, const std::vector<ad::Var>& pv, ad::Var emb_rows,
               const std::vector<int>& labels) const;

 private:
  struct States {
    ad::Var dense;           // euclidean: N x d
    std::vector<ad::Var> p;  // spd: n x n, hyperbolic: 1 x d, product: 1 x m ball point
    std::vector<ad::Var> e;  // product euclidean block: 1 x m
  };

  ad::Var pvar(const std::vector<ad::Var>& pv, const std::string& name) const;
  States input_states(ad::Tape& t, const std::vector<ad::Var>& pv, const Graph& g) const;
  ad::Var tangent_rows(ad::Tape& t, const States& s) const;
  States states_from_tangent_rows(ad::Tape& t, ad::Var rows) const;
  States transform(ad::Tape& t, const std::vector<ad::Var>& pv, const States& s,
                   const std::string& prefix) const;
  States bias_nonlin(ad::Tape& t, const std::vector<ad::Var>& pv, const States& s,
                     int layer) const;
  States nonlin_only(ad::Tape& t, const States& s) const;
  States run_layers(ad::Tape& t, const std::vector<ad::Var>& pv, const Graph& g, States s,
                    std::mt19937_64& rng, bool train, double* min_eig) const;
  double min_state_eig(ad::Tape& t, const States& s) const;

  ModelConfig cfg_;
  ParamStore params_;
};

}  // namespace spdgnn
