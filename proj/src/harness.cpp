#include "spdgnn/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "spdgnn/classifiers.hpp"
#include "spdgnn/errors.hpp"

namespace spdgnn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<int> labels_at(const std::vector<int>& labels, const std::vector<int>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(labels[static_cast<size_t>(i)]);
  return out;
}

Matrix rows_at(const Matrix& m, const std::vector<int>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(idx[k]);
  return out;
}

double subset_accuracy(const Matrix& scores, const std::vector<int>& labels,
                       const std::vector<int>& idx) {
  if (idx.empty()) return 0.0;
  return accuracy(rows_at(scores, idx), labels_at(labels, idx));
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (max_epochs < 1) throw ConfigError("max_epochs must be positive");
  if (patience < 1 || patience > max_epochs)
    throw ConfigError("patience must lie in [1, max_epochs]");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (model.in_dim > 0) model.validate();
}

GeometryContext parse_geometry(const std::string& name, int dim) {
  if (name == "euclidean") return GeometryContext::euclidean(dim);
  if (name == "hyperbolic") return GeometryContext::hyperbolic(dim);
  if (name == "spd") return GeometryContext::spd(dim);
  if (name == "product") return GeometryContext::product(dim);
  throw ConfigError("unknown geometry '" + name + "'");
}

TrainConfig config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");

  TrainConfig cfg;
  std::string geometry = cfg.model.geometry.name();
  int dim = cfg.model.geometry.dim;
  try {
    for (const auto& [key, val] : j.items()) {
      if (key == "arch")
        cfg.model.arch = parse_arch(val.get<std::string>());
      else if (key == "geometry")
        geometry = val.get<std::string>();
      else if (key == "dim")
        dim = val.get<int>();
      else if (key == "layers")
        cfg.model.num_layers = val.get<int>();
      else if (key == "classifier")
        cfg.model.classifier = parse_classifier(val.get<std::string>());
      else if (key == "nonlin")
        cfg.model.nonlin = parse_nonlin(val.get<std::string>());
      else if (key == "reeig_eps")
        cfg.model.reeig_eps = val.get<double>();
      else if (key == "dropout")
        cfg.model.dropout = val.get<double>();
      else if (key == "margin_reg")
        cfg.model.margin_reg = val.get<double>();
      else if (key == "lr")
        cfg.lr = val.get<double>();
      else if (key == "weight_decay")
        cfg.weight_decay = val.get<double>();
      else if (key == "clip_norm")
        cfg.clip_norm = val.get<double>();
      else if (key == "max_epochs")
        cfg.max_epochs = val.get<int>();
      else if (key == "patience")
        cfg.patience = val.get<int>();
      else if (key == "batch_size")
        cfg.batch_size = val.get<int>();
      else if (key == "seed")
        cfg.seed = val.get<unsigned long long>();
      else if (key == "dataset")
        cfg.dataset = val.get<std::string>();
      else
        throw ConfigError("config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.model.geometry = parse_geometry(geometry, dim);
  cfg.validate();
  return cfg;
}

std::string config_to_json(const TrainConfig& cfg) {
  nlohmann::json j;
  j["arch"] = arch_name(cfg.model.arch);
  j["batch_size"] = cfg.batch_size;
  j["classifier"] = classifier_name(cfg.model.classifier);
  j["clip_norm"] = cfg.clip_norm;
  j["dataset"] = cfg.dataset;
  j["dim"] = cfg.model.geometry.dim;
  j["dropout"] = cfg.model.dropout;
  j["geometry"] = cfg.model.geometry.name();
  j["layers"] = cfg.model.num_layers;
  j["lr"] = cfg.lr;
  j["margin_reg"] = cfg.model.margin_reg;
  j["max_epochs"] = cfg.max_epochs;
  j["nonlin"] = nonlin_name(cfg.model.nonlin);
  j["patience"] = cfg.patience;
  j["reeig_eps"] = cfg.model.reeig_eps;
  j["seed"] = cfg.seed;
  j["weight_decay"] = cfg.weight_decay;
  return j.dump();
}

unsigned long long config_hash(const TrainConfig& cfg) {
  const std::string s = config_to_json(cfg);
  unsigned long long h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void adam_step(ParamStore& params, const std::vector<Matrix>& grads, AdamState& st, double lr,
               double weight_decay) {
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const size_t n = params.values.size();
  if (grads.size() != n) throw ShapeMismatchError("adam_step: gradient count mismatch");
  if (st.m.empty()) {
    st.m.resize(n);
    st.v.resize(n);
    for (size_t i = 0; i < n; ++i) {
      st.m[i] = Matrix::Zero(params.values[i].rows(), params.values[i].cols());
      st.v[i] = st.m[i];
    }
  }
  ++st.t;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(st.t));
  for (size_t i = 0; i < n; ++i) {
    Matrix g = grads[i];
    if (weight_decay != 0.0) g += weight_decay * params.values[i];
    st.m[i] = b1 * st.m[i] + (1.0 - b1) * g;
    st.v[i] = b2 * st.v[i] + (1.0 - b2) * g.cwiseProduct(g);
    params.values[i].array() -=
        lr * (st.m[i].array() / c1) / ((st.v[i].array() / c2).sqrt() + eps);
  }
}

double clip_gradients(std::vector<Matrix>& grads, double max_norm) {
  double sq = 0.0;
  for (const Matrix& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (Matrix& g : grads) g *= scale;
  }
  return norm;
}

namespace {

[[noreturn]] void diverged(int epoch, const char* what) {
  throw DivergedTrainingError("training diverged at epoch " + std::to_string(epoch) + ": " + what);
}

void log_epoch(std::ostream* log, const EpochStats& s) {
  if (!log) return;
  (*log) << "epoch " << s.epoch << " train_loss " << s.train_loss << " dev_loss " << s.dev_loss
         << " dev_acc " << s.dev_acc << '\n';
}

}  // namespace

TrainResult train_node_model(const TrainConfig& cfg, const Graph& g, bool track_spectrum,
                             std::ostream* log) {
  TrainConfig c = cfg;
  c.model.in_dim = g.feature_dim();
  c.model.num_classes = g.num_classes();
  c.validate();
  if (g.train_idx.empty() || g.val_idx.empty())
    throw ConfigError("dataset needs non-empty train and val masks");

  GnnModel model(c.model, c.seed);
  AdamState adam;
  std::mt19937_64 rng(c.seed ^ 0x9e3779b97f4a7c15ULL);

  TrainResult res;
  res.params = model.params();
  res.best_dev_loss = kInf;
  int since_best = 0;

  const std::vector<int> train_labels = labels_at(g.labels, g.train_idx);
  const std::vector<int> val_labels = labels_at(g.labels, g.val_idx);

  for (int epoch = 1; epoch <= c.max_epochs; ++epoch) {
    EpochStats st;
    st.epoch = epoch;
    st.min_eig = std::numeric_limits<double>::quiet_NaN();
    try {
      {
        ad::Tape t;
        auto pv = model.register_params(t);
        auto fw = model.node_embeddings(t, pv, g, rng, true, track_spectrum);
        st.min_eig = fw.min_stage_eig;
        ad::Var loss = model.loss(t, pv, ad::gather_rows(fw.emb, g.train_idx), train_labels);
        st.train_loss = t.value(loss)(0, 0);
        if (!std::isfinite(st.train_loss)) diverged(epoch, "non-finite training loss");
        t.backward(loss);
        std::vector<Matrix> grads;
        grads.reserve(pv.size());
        for (ad::Var p : pv) grads.push_back(t.grad(p));
        clip_gradients(grads, c.clip_norm);
        adam_step(model.params(), grads, adam, c.lr, c.weight_decay);
      }
      {
        ad::Tape t;
        auto pv = model.register_params(t);
        auto fw = model.node_embeddings(t, pv, g, rng, false, track_spectrum);
        st.min_eig = std::fmin(st.min_eig, fw.min_stage_eig);
        Matrix scores = t.value(model.scores(t, pv, fw.emb));
        st.train_acc = subset_accuracy(scores, g.labels, g.train_idx);
        st.dev_acc = subset_accuracy(scores, g.labels, g.val_idx);
        st.dev_loss =
            t.value(model.loss(t, pv, ad::gather_rows(fw.emb, g.val_idx), val_labels))(0, 0);
        if (!std::isfinite(st.dev_loss)) diverged(epoch, "non-finite dev loss");
      }
    } catch (const OverflowError& e) {
      diverged(epoch, e.what());
    } catch (const NonFiniteError& e) {
      diverged(epoch, e.what());
    }

    res.history.push_back(st);
    log_epoch(log, st);

    if (st.dev_loss < res.best_dev_loss) {
      res.best_dev_loss = st.dev_loss;
      res.best_epoch = epoch;
      res.params = model.params();
      since_best = 0;
    } else if (++since_best >= c.patience) {
      break;
    }
  }

  model.params() = res.params;
  ad::Tape t;
  auto pv = model.register_params(t);
  auto fw = model.node_embeddings(t, pv, g, rng, false, false);
  Matrix scores = t.value(model.scores(t, pv, fw.emb));
  res.train_acc = subset_accuracy(scores, g.labels, g.train_idx);
  res.dev_acc = subset_accuracy(scores, g.labels, g.val_idx);
  res.test_acc = subset_accuracy(scores, g.labels, g.test_idx);
  return res;
}

namespace {

ad::Var stacked_graph_emb(GnnModel& model, ad::Tape& t, const std::vector<ad::Var>& pv,
                          const GraphDataset& ds, const std::vector<int>& idx,
                          std::mt19937_64& rng, bool train) {
  std::vector<ad::Var> rows;
  rows.reserve(idx.size());
  for (int i : idx)
    rows.push_back(model.graph_embedding(t, pv, ds.graphs[static_cast<size_t>(i)], rng, train).emb);
  return ad::stack_rows(rows);
}

}  // namespace

TrainResult train_graph_model(const TrainConfig& cfg, const GraphDataset& ds,
                              const GraphSplit& split, std::ostream* log) {
  TrainConfig c = cfg;
  c.model.in_dim = ds.feature_dim;
  c.model.num_classes = ds.num_classes;
  c.validate();
  if (split.train.empty() || split.dev.empty())
    throw ConfigError("split needs non-empty train and dev sets");

  GnnModel model(c.model, c.seed);
  AdamState adam;
  std::mt19937_64 rng(c.seed ^ 0x9e3779b97f4a7c15ULL);

  TrainResult res;
  res.params = model.params();
  res.best_dev_loss = kInf;
  int since_best = 0;

  std::vector<int> order = split.train;
  const std::vector<int> dev_labels = labels_at(ds.labels, split.dev);

  auto eval_acc = [&](const std::vector<int>& idx, double* loss_out) {
    if (idx.empty()) {
      if (loss_out) *loss_out = 0.0;
      return 0.0;
    }
    ad::Tape t;
    auto pv = model.register_params(t);
    ad::Var emb = stacked_graph_emb(model, t, pv, ds, idx, rng, false);
    Matrix scores = t.value(model.scores(t, pv, emb));
    if (loss_out) *loss_out = t.value(model.loss(t, pv, emb, labels_at(ds.labels, idx)))(0, 0);
    return accuracy(scores, labels_at(ds.labels, idx));
  };

  for (int epoch = 1; epoch <= c.max_epochs; ++epoch) {
    EpochStats st;
    st.epoch = epoch;
    st.min_eig = std::numeric_limits<double>::quiet_NaN();
    try {
      std::shuffle(order.begin(), order.end(), rng);
      double loss_sum = 0.0;
      for (size_t start = 0; start < order.size(); start += static_cast<size_t>(c.batch_size)) {
        const size_t stop = std::min(order.size(), start + static_cast<size_t>(c.batch_size));
        std::vector<int> batch(order.begin() + static_cast<long>(start),
                               order.begin() + static_cast<long>(stop));
        ad::Tape t;
        auto pv = model.register_params(t);
        ad::Var emb = stacked_graph_emb(model, t, pv, ds, batch, rng, true);
        ad::Var loss = model.loss(t, pv, emb, labels_at(ds.labels, batch));
        const double lv = t.value(loss)(0, 0);
        if (!std::isfinite(lv)) diverged(epoch, "non-finite training loss");
        loss_sum += lv * static_cast<double>(batch.size());
        t.backward(loss);
        std::vector<Matrix> grads;
        grads.reserve(pv.size());
        for (ad::Var p : pv) grads.push_back(t.grad(p));
        clip_gradients(grads, c.clip_norm);
        adam_step(model.params(), grads, adam, c.lr, c.weight_decay);
      }
      st.train_loss = loss_sum / static_cast<double>(order.size());
      st.train_acc = eval_acc(split.train, nullptr);
      st.dev_acc = eval_acc(split.dev, &st.dev_loss);
      if (!std::isfinite(st.dev_loss)) diverged(epoch, "non-finite dev loss");
    } catch (const OverflowError& e) {
      diverged(epoch, e.what());
    } catch (const NonFiniteError& e) {
      diverged(epoch, e.what());
    }

    res.history.push_back(st);
    log_epoch(log, st);

    if (st.dev_loss < res.best_dev_loss) {
      res.best_dev_loss = st.dev_loss;
      res.best_epoch = epoch;
      res.params = model.params();
      since_best = 0;
    } else if (++since_best >= c.patience) {
      break;
    }
  }

  model.params() = res.params;
  res.train_acc = eval_acc(split.train, nullptr);
  res.dev_acc = eval_acc(split.dev, nullptr);
  res.test_acc = eval_acc(split.test, nullptr);
  return res;
}

std::vector<TrainConfig> make_grid(const TrainConfig& base) {
  const bool spd = base.model.geometry.kind == GeomKind::spd;
  const bool margin = base.model.classifier != ClassifierKind::linear_xe;
  const std::vector<double> lrs = {0.1, 0.01, 0.001};
  const std::vector<double> dropouts = {0.0, 0.5};
  const std::vector<double> wds = {0.0, 0.005, 0.0005};
  const std::vector<SpdNonlin> nonlins =
      spd ? std::vector<SpdNonlin>{SpdNonlin::tgreeig, SpdNonlin::reeig}
          : std::vector<SpdNonlin>{base.model.nonlin};
  const std::vector<double> regs =
      margin ? std::vector<double>{0.5, 0.05, 0.005, 0.0005} : std::vector<double>{base.model.margin_reg};

  std::vector<TrainConfig> grid;
  for (double lr : lrs)
    for (double dp : dropouts)
      for (double wd : wds)
        for (SpdNonlin nl : nonlins)
          for (double reg : regs) {
            TrainConfig c = base;
            c.lr = lr;
            c.model.dropout = dp;
            c.weight_decay = wd;
            c.model.nonlin = nl;
            c.model.margin_reg = reg;
            grid.push_back(c);
          }
  return grid;
}

namespace {

std::string hash_hex(unsigned long long h) {
  char buf[17];
  for (int i = 15; i >= 0; --i) {
    buf[i] = "0123456789abcdef"[h & 0xf];
    h >>= 4;
  }
  buf[16] = '\0';
  return std::string(buf);
}

GridEntry run_grid_point(const TrainConfig& cfg, const Graph& g, const std::string& run_dir) {
  GridEntry e;
  e.config = cfg;
  e.hash = config_hash(cfg);
  const std::filesystem::path dir = std::filesystem::path(run_dir) / hash_hex(e.hash);
  const std::filesystem::path result_path = dir / "result.json";

  if (std::filesystem::exists(result_path)) {
    std::ifstream in(result_path);
    nlohmann::json j;
    try {
      in >> j;
      e.dev_acc = j.at("dev_acc").get<double>();
      e.test_acc = j.at("test_acc").get<double>();
      e.best_epoch = j.at("best_epoch").get<int>();
      return e;
    } catch (const nlohmann::json::exception&) {
      // unreadable result: fall through and retrain
    }
  }

  std::filesystem::create_directories(dir);
  bool diverged_run = false;
  TrainResult r;
  try {
    r = train_node_model(cfg, g);
  } catch (const DivergedTrainingError&) {
    diverged_run = true;
  }

  {
    std::ofstream rec(dir / "record.jsonl");
    for (const EpochStats& s : r.history) {
      nlohmann::json j;
      j["epoch"] = s.epoch;
      j["train_loss"] = s.train_loss;
      j["train_acc"] = s.train_acc;
      j["dev_loss"] = s.dev_loss;
      j["dev_acc"] = s.dev_acc;
      rec << j.dump() << '\n';
    }
  }
  e.dev_acc = diverged_run ? 0.0 : r.dev_acc;
  e.test_acc = diverged_run ? 0.0 : r.test_acc;
  e.best_epoch = diverged_run ? 0 : r.best_epoch;
  {
    nlohmann::json j;
    j["config"] = nlohmann::json::parse(config_to_json(cfg));
    j["dev_acc"] = e.dev_acc;
    j["test_acc"] = e.test_acc;
    j["best_epoch"] = e.best_epoch;
    j["diverged"] = diverged_run;
    std::ofstream out(result_path);
    out << j.dump(2) << '\n';
  }
  return e;
}

}  // namespace

std::vector<GridEntry> grid_search(const TrainConfig& base, const Graph& g,
                                   const std::string& run_dir, int threads) {
  const std::vector<TrainConfig> grid = make_grid(base);
  std::filesystem::create_directories(run_dir);
  std::vector<GridEntry> entries(grid.size());

  std::atomic<size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= grid.size()) break;
      try {
        entries[i] = run_grid_point(grid[i], g, run_dir);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        break;
      }
    }
  };
  const int nthreads = std::max(1, threads);
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  std::sort(entries.begin(), entries.end(), [](const GridEntry& a, const GridEntry& b) {
    if (a.dev_acc != b.dev_acc) return a.dev_acc > b.dev_acc;
    if (a.config.lr != b.config.lr) return a.config.lr < b.config.lr;
    return config_to_json(a.config) < config_to_json(b.config);
  });

  std::ofstream lb(std::filesystem::path(run_dir) / "leaderboard.csv");
  lb << "hash,dev_acc,test_acc,best_epoch,lr,dropout,weight_decay,nonlin,margin_reg\n";
  for (const GridEntry& e : entries)
    lb << hash_hex(e.hash) << ',' << format_double(e.dev_acc) << ',' << format_double(e.test_acc)
       << ',' << e.best_epoch << ',' << format_double(e.config.lr) << ','
       << format_double(e.config.model.dropout) << ',' << format_double(e.config.weight_decay)
       << ',' << nonlin_name(e.config.model.nonlin) << ','
       << format_double(e.config.model.margin_reg) << '\n';
  return entries;
}

SummaryRow evaluate_seeds(const TrainConfig& cfg, const Graph& g, int seeds) {
  if (seeds < 1) throw ConfigError("need at least one seed");
  SummaryRow row;
  row.config = cfg;
  row.seeds = seeds;
  std::vector<double> accs;
  for (int s = 0; s < seeds; ++s) {
    TrainConfig c = cfg;
    c.seed = cfg.seed + static_cast<unsigned long long>(s);
    accs.push_back(train_node_model(c, g).test_acc * 100.0);
  }
  double mean = 0.0;
  for (double a : accs) mean += a;
  mean /= static_cast<double>(accs.size());
  double var = 0.0;
  for (double a : accs) var += (a - mean) * (a - mean);
  var /= static_cast<double>(accs.size());
  row.mean_acc = mean;
  row.std_acc = std::sqrt(var);
  return row;
}

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "dataset,arch,geometry,dim,classifier,nonlin,layers,lr,dropout,weight_decay,margin_reg,"
         "seeds,mean_test_acc,std_test_acc\n";
  for (const SummaryRow& r : rows) {
    const TrainConfig& c = r.config;
    out << c.dataset << ',' << arch_name(c.model.arch) << ',' << c.model.geometry.name() << ','
        << c.model.geometry.dim << ',' << classifier_name(c.model.classifier) << ','
        << nonlin_name(c.model.nonlin) << ',' << c.model.num_layers << ',' << format_double(c.lr)
        << ',' << format_double(c.model.dropout) << ',' << format_double(c.weight_decay) << ','
        << format_double(c.model.margin_reg) << ',' << r.seeds << ',' << format_double(r.mean_acc)
        << ',' << format_double(r.std_acc) << '\n';
  }
}

void export_embeddings(const TrainConfig& cfg, const ParamStore& trained, const Graph& g,
                       std::ostream& out) {
  TrainConfig c = cfg;
  c.model.in_dim = g.feature_dim();
  c.model.num_classes = g.num_classes();
  c.validate();
  GnnModel model(c.model, c.seed);
  if (trained.names != model.params().names)
    throw ConfigError("trained parameters do not match the model");
  for (size_t i = 0; i < trained.values.size(); ++i) {
    const Matrix& want = model.params().values[i];
    if (trained.values[i].rows() != want.rows() || trained.values[i].cols() != want.cols())
      throw ConfigError("trained parameter '" + trained.names[i] + "' has the wrong shape");
  }
  model.params() = trained;

  std::mt19937_64 rng(c.seed);
  ad::Tape t;
  auto pv = model.register_params(t);
  Matrix emb = t.value(model.node_embeddings(t, pv, g, rng, false).emb);

  out << "node,label";
  for (int j = 0; j < emb.cols(); ++j) out << ",c" << j;
  out << '\n';
  for (int i = 0; i < emb.rows(); ++i) {
    out << i << ',' << (i < static_cast<int>(g.labels.size()) ? g.labels[static_cast<size_t>(i)] : -1);
    for (int j = 0; j < emb.cols(); ++j) out << ',' << format_double(emb(i, j));
    out << '\n';
  }
}

}  // namespace spdgnn
