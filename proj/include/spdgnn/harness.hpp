#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "spdgnn/data.hpp"
#include "spdgnn/gnn.hpp"

namespace spdgnn {

/// Everything a single training run depends on. in_dim / num_classes of the
/// model block are filled in from the dataset, not the config file.
struct TrainConfig {
  ModelConfig model;
  double lr = 0.01;
  double weight_decay = 0.0;
  double clip_norm = 5.0;  // global gradient norm ceiling; <= 0 disables
  int max_epochs = 500;
  int patience = 200;  // epochs without a dev-loss improvement before stopping
  int batch_size = 32;  // graph-level task only
  unsigned long long seed = 0;
  std::string dataset;  // tag carried into reports

  void validate() const;  // throws ConfigError
};

GeometryContext parse_geometry(const std::string& name, int dim);

TrainConfig config_from_json(const std::string& text);
std::string config_to_json(const TrainConfig& cfg);

/// FNV-1a of the canonical JSON form; names the run directory.
unsigned long long config_hash(const TrainConfig& cfg);

struct AdamState {
  std::vector<Matrix> m, v;
  long long t = 0;
};

/// One Adam update (beta1 0.9, beta2 0.999, eps 1e-8). Weight decay is added
/// to the gradient, so w=1, g=2, lr=0.1 moves to 0.9 on the first step.
void adam_step(ParamStore& params, const std::vector<Matrix>& grads, AdamState& st, double lr,
               double weight_decay);

/// Scales the gradients so their global norm is at most max_norm (no-op when
/// max_norm <= 0 or the norm is already below it). Returns the pre-clip norm.
double clip_gradients(std::vector<Matrix>& grads, double max_norm);

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double dev_loss = 0.0;
  double dev_acc = 0.0;
  double min_eig;  // smallest stage eigenvalue; NaN unless tracked
};

struct TrainResult {
  ParamStore params;  // parameters at the best dev-loss epoch
  int best_epoch = 0;
  double best_dev_loss = 0.0;
  double train_acc = 0.0;  // final metrics under the restored parameters
  double dev_acc = 0.0;
  double test_acc = 0.0;
  std::vector<EpochStats> history;
};

/// Full-batch training on one node-labelled graph with early stopping on dev
/// loss. Throws DivergedTrainingError when the loss stops being finite.
TrainResult train_node_model(const TrainConfig& cfg, const Graph& g, bool track_spectrum = false,
                             std::ostream* log = nullptr);

/// Mini-batch training for graph classification over the given split.
TrainResult train_graph_model(const TrainConfig& cfg, const GraphDataset& ds,
                              const GraphSplit& split, std::ostream* log = nullptr);

struct GridEntry {
  TrainConfig config;
  unsigned long long hash = 0;
  double dev_acc = 0.0;
  double test_acc = 0.0;
  int best_epoch = 0;
};

/// Hyper-parameter grid around `base`: lr {0.1, 0.01, 0.001} x dropout
/// {0, 0.5} x weight decay {0, 0.005, 0.0005}, plus the nonlinearity for spd
/// geometry and the regularizer weight {0.5, 0.05, 0.005, 0.0005} for margin
/// classifiers.
std::vector<TrainConfig> make_grid(const TrainConfig& base);

/// Trains every grid point, resuming any <run_dir>/<hash>/result.json found on
/// disk, and writes record.jsonl / result.json per run plus leaderboard.csv.
/// Entries come back sorted: dev accuracy descending, ties by lower lr, then
/// by canonical JSON. `threads` > 1 trains points concurrently.
std::vector<GridEntry> grid_search(const TrainConfig& base, const Graph& g,
                                   const std::string& run_dir, int threads);

struct SummaryRow {
  TrainConfig config;
  int seeds = 0;
  double mean_acc = 0.0;  // test accuracy in percent
  double std_acc = 0.0;   // population standard deviation
};

/// Trains cfg with seeds cfg.seed .. cfg.seed + seeds - 1.
SummaryRow evaluate_seeds(const TrainConfig& cfg, const Graph& g, int seeds);

/// Deterministic summary table; no timestamps or machine state, so equal
/// inputs produce byte-identical files.
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

/// Shortest decimal that round-trips the double, locale-independent.
std::string format_double(double v);

/// CSV of final node embeddings (tangent coordinates) under the given trained
/// parameters: node id, label, then ambient() coordinates.
void export_embeddings(const TrainConfig& cfg, const ParamStore& trained, const Graph& g,
                       std::ostream& out);

}  // namespace spdgnn
