#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "spdgnn/data.hpp"
#include "spdgnn/errors.hpp"
#include "spdgnn/harness.hpp"

namespace {

using namespace spdgnn;

struct CommonOpts {
  std::string config_path;
  std::string dataset_dir;
  std::string arch, geometry, classifier, nonlin;
  int dim = 0;
  int layers = 0;
  double lr = 0.0, dropout = -1.0, weight_decay = -1.0, margin_reg = -1.0, clip_norm = -1.0;
  int max_epochs = 0, patience = 0, batch_size = 0;
  unsigned long long seed = 0;
  bool seed_set = false;
};

void add_config_flags(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "JSON config file");
  cmd->add_option("--arch", o.arch, "gcn | gat | cheb | sgc | gin");
  cmd->add_option("--geometry", o.geometry, "euclidean | hyperbolic | spd | product");
  cmd->add_option("--dim", o.dim, "geometry dimension (matrix side for spd, block size for product)");
  cmd->add_option("--classifier", o.classifier, "linear-xe | svm-mm | nc-mm");
  cmd->add_option("--nonlin", o.nonlin, "tgreeig | reeig (spd only)");
  cmd->add_option("--layers", o.layers, "number of layers");
  cmd->add_option("--lr", o.lr, "learning rate");
  cmd->add_option("--dropout", o.dropout, "dropout probability");
  cmd->add_option("--weight-decay", o.weight_decay, "L2 weight decay");
  cmd->add_option("--margin-reg", o.margin_reg, "svm-mm trace regularizer weight");
  cmd->add_option("--clip-norm", o.clip_norm, "gradient norm ceiling (0 disables)");
  cmd->add_option("--max-epochs", o.max_epochs, "epoch cap");
  cmd->add_option("--patience", o.patience, "early-stopping patience");
  cmd->add_option("--batch-size", o.batch_size, "graph-task minibatch size");
  cmd->add_option("--seed", o.seed, "rng seed")->each([&o](const std::string&) { o.seed_set = true; });
}

TrainConfig resolve_config(const CommonOpts& o) {
  TrainConfig cfg;
  if (!o.config_path.empty()) {
    std::ifstream f(o.config_path);
    if (!f) throw ConfigError("cannot open config file " + o.config_path);
    std::stringstream ss;
    ss << f.rdbuf();
    cfg = config_from_json(ss.str());
  }
  if (!o.geometry.empty() || o.dim > 0) {
    const std::string name = o.geometry.empty() ? cfg.model.geometry.name() : o.geometry;
    const int dim = o.dim > 0 ? o.dim : cfg.model.geometry.dim;
    cfg.model.geometry = parse_geometry(name, dim);
  }
  if (!o.arch.empty()) cfg.model.arch = parse_arch(o.arch);
  if (!o.classifier.empty()) cfg.model.classifier = parse_classifier(o.classifier);
  if (!o.nonlin.empty()) cfg.model.nonlin = parse_nonlin(o.nonlin);
  if (o.layers > 0) cfg.model.num_layers = o.layers;
  if (o.lr > 0.0) cfg.lr = o.lr;
  if (o.dropout >= 0.0) cfg.model.dropout = o.dropout;
  if (o.weight_decay >= 0.0) cfg.weight_decay = o.weight_decay;
  if (o.margin_reg >= 0.0) cfg.model.margin_reg = o.margin_reg;
  if (o.clip_norm >= 0.0) cfg.clip_norm = o.clip_norm;
  if (o.max_epochs > 0) cfg.max_epochs = o.max_epochs;
  if (o.patience > 0) cfg.patience = o.patience;
  if (o.batch_size > 0) cfg.batch_size = o.batch_size;
  if (o.seed_set) cfg.seed = o.seed;
  if (cfg.dataset.empty() && !o.dataset_dir.empty())
    cfg.dataset = std::filesystem::path(o.dataset_dir).filename().string();
  cfg.validate();
  return cfg;
}

void write_run_artifacts(const std::string& out_dir, const TrainConfig& cfg,
                         const TrainResult& r) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream rec(std::filesystem::path(out_dir) / "record.jsonl");
    for (const EpochStats& s : r.history) {
      nlohmann::json j;
      j["epoch"] = s.epoch;
      j["train_loss"] = s.train_loss;
      j["train_acc"] = s.train_acc;
      j["dev_loss"] = s.dev_loss;
      j["dev_acc"] = s.dev_acc;
      if (!std::isnan(s.min_eig)) j["min_eig"] = s.min_eig;
      rec << j.dump() << '\n';
    }
  }
  nlohmann::json j;
  j["config"] = nlohmann::json::parse(config_to_json(cfg));
  j["best_epoch"] = r.best_epoch;
  j["best_dev_loss"] = r.best_dev_loss;
  j["train_acc"] = r.train_acc;
  j["dev_acc"] = r.dev_acc;
  j["test_acc"] = r.test_acc;
  std::ofstream res(std::filesystem::path(out_dir) / "result.json");
  res << j.dump(2) << '\n';
}

void print_result(const TrainResult& r) {
  std::cout << "best_epoch " << r.best_epoch << " train_acc " << format_double(r.train_acc)
            << " dev_acc " << format_double(r.dev_acc) << " test_acc "
            << format_double(r.test_acc) << '\n';
}

int run(int argc, char** argv) {
  CLI::App app{"Graph neural networks with symmetric positive definite node embeddings"};
  app.require_subcommand(1);

  CommonOpts opt;
  std::string out;
  std::string tu_name;
  bool zscore = false;
  bool track_spectrum = false;
  int threads = 1;
  int seeds = 10;
  long long samples = 0;
  std::vector<int> tree_spec, grid_spec;
  int branching = 2, height = 3, grid_w = 3, grid_h = 3, feature_dim = 8;

  CLI::App* train = app.add_subcommand("train", "train one model and report accuracy");
  add_config_flags(train, opt);
  train->add_option("--dataset-dir", opt.dataset_dir, "dataset directory")->required();
  train->add_option("--tu-name", tu_name, "treat dataset-dir as a graph-task bundle of this name");
  train->add_flag("--zscore", zscore, "standardise node attributes (graph task)");
  train->add_flag("--track-spectrum", track_spectrum, "record the smallest stage eigenvalue");
  train->add_option("--out", out, "directory for record.jsonl / result.json");

  CLI::App* grid = app.add_subcommand("gridsearch", "sweep the hyper-parameter grid");
  add_config_flags(grid, opt);
  grid->add_option("--dataset-dir", opt.dataset_dir, "dataset directory")->required();
  grid->add_option("--out", out, "run directory (resumable)")->required();
  grid->add_option("--threads", threads, "concurrent trainings");

  CLI::App* eval = app.add_subcommand("evaluate", "train over several seeds, write summary.csv");
  add_config_flags(eval, opt);
  eval->add_option("--dataset-dir", opt.dataset_dir, "dataset directory")->required();
  eval->add_option("--seeds", seeds, "number of seeds");
  eval->add_option("--out", out, "summary csv path (default stdout)");

  CLI::App* expo = app.add_subcommand("export-embeddings", "train, then dump node embeddings");
  add_config_flags(expo, opt);
  expo->add_option("--dataset-dir", opt.dataset_dir, "dataset directory")->required();
  expo->add_option("--out", out, "csv path (default stdout)");

  CLI::App* hyp = app.add_subcommand("hyperbolicity", "four-point delta of a graph");
  hyp->add_option("--dataset-dir", opt.dataset_dir, "node dataset directory");
  hyp->add_option("--tree", tree_spec, "branching height")->expected(2);
  hyp->add_option("--grid", grid_spec, "width height")->expected(2);
  hyp->add_option("--samples", samples, "quadruple samples (0 = exact)");
  hyp->add_option("--seed", opt.seed, "sampling seed");

  CLI::App* synth = app.add_subcommand("synth", "write a tree-of-grids node dataset");
  synth->add_option("--branching", branching, "tree branching factor");
  synth->add_option("--height", height, "tree height");
  synth->add_option("--grid-w", grid_w, "grid width");
  synth->add_option("--grid-h", grid_h, "grid height");
  synth->add_option("--feature-dim", feature_dim, "feature dimension");
  synth->add_option("--seed", opt.seed, "generation seed");
  synth->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the message
    return code == 0 ? 0 : 2;     // bad flags are configuration errors
  }

  if (train->parsed()) {
    TrainConfig cfg = resolve_config(opt);
    TrainResult r;
    if (!tu_name.empty()) {
      GraphDataset ds = load_tudataset(opt.dataset_dir, tu_name, zscore);
      GraphSplit split = split_tudataset(ds, cfg.seed);
      r = train_graph_model(cfg, ds, split, &std::cerr);
    } else {
      Graph g = load_node_dataset(opt.dataset_dir);
      r = train_node_model(cfg, g, track_spectrum, &std::cerr);
    }
    if (!out.empty()) write_run_artifacts(out, cfg, r);
    print_result(r);
    return 0;
  }

  if (grid->parsed()) {
    TrainConfig cfg = resolve_config(opt);
    Graph g = load_node_dataset(opt.dataset_dir);
    auto entries = grid_search(cfg, g, out, threads);
    std::cout << "hash,dev_acc,test_acc,lr,dropout,weight_decay\n";
    for (size_t i = 0; i < entries.size() && i < 5; ++i) {
      const GridEntry& e = entries[i];
      std::cout << std::hex << e.hash << std::dec << ',' << format_double(e.dev_acc) << ','
                << format_double(e.test_acc) << ',' << format_double(e.config.lr) << ','
                << format_double(e.config.model.dropout) << ','
                << format_double(e.config.weight_decay) << '\n';
    }
    return 0;
  }

  if (eval->parsed()) {
    TrainConfig cfg = resolve_config(opt);
    Graph g = load_node_dataset(opt.dataset_dir);
    SummaryRow row = evaluate_seeds(cfg, g, seeds);
    if (out.empty()) {
      write_summary_csv(std::cout, {row});
    } else {
      std::ofstream f(out);
      if (!f) throw ConfigError("cannot open " + out);
      write_summary_csv(f, {row});
      std::cout << "mean_test_acc " << format_double(row.mean_acc) << " std "
                << format_double(row.std_acc) << '\n';
    }
    return 0;
  }

  if (expo->parsed()) {
    TrainConfig cfg = resolve_config(opt);
    Graph g = load_node_dataset(opt.dataset_dir);
    TrainResult r = train_node_model(cfg, g);
    if (out.empty()) {
      export_embeddings(cfg, r.params, g, std::cout);
    } else {
      std::ofstream f(out);
      if (!f) throw ConfigError("cannot open " + out);
      export_embeddings(cfg, r.params, g, f);
    }
    return 0;
  }

  if (hyp->parsed()) {
    Graph g = Graph::from_edges(1, {});
    if (!opt.dataset_dir.empty())
      g = load_node_dataset(opt.dataset_dir);
    else if (!tree_spec.empty())
      g = synth_tree(tree_spec[0], tree_spec[1]);
    else if (!grid_spec.empty())
      g = synth_grid(grid_spec[0], grid_spec[1]);
    else
      throw ConfigError("hyperbolicity needs --dataset-dir, --tree or --grid");
    const double delta = samples > 0 ? delta_hyperbolicity_sampled(g, samples, opt.seed)
                                     : delta_hyperbolicity_exact(g);
    std::cout << format_double(delta) << '\n';
    return 0;
  }

  if (synth->parsed()) {
    Graph g = synth_tree_of_grids(branching, height, grid_w, grid_h, feature_dim, opt.seed);
    std::filesystem::create_directories(out);
    {
      std::ofstream f(std::filesystem::path(out) / "graph.edges");
      for (int i = 0; i < g.num_nodes; ++i)
        for (int e = g.row_offsets[i]; e < g.row_offsets[i + 1]; ++e)
          if (g.col_indices[e] > i) f << i << ' ' << g.col_indices[e] << '\n';
    }
    {
      std::ofstream f(std::filesystem::path(out) / "features.csv");
      for (int i = 0; i < g.num_nodes; ++i) {
        for (int j = 0; j < g.feature_dim(); ++j)
          f << (j ? "," : "") << format_double(g.features(i, j));
        f << '\n';
      }
    }
    {
      std::ofstream f(std::filesystem::path(out) / "labels.csv");
      for (int l : g.labels) f << l << '\n';
    }
    {
      nlohmann::json j;
      j["train"] = g.train_idx;
      j["val"] = g.val_idx;
      j["test"] = g.test_idx;
      std::ofstream f(std::filesystem::path(out) / "split.json");
      f << j.dump() << '\n';
    }
    std::cout << "nodes " << g.num_nodes << " edges " << g.num_edges() << '\n';
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const DivergedTrainingError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const DatasetError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const DisconnectedError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const TooLargeForExactError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
