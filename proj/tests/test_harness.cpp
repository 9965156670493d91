#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "spdgnn/errors.hpp"
#include "spdgnn/harness.hpp"

using namespace spdgnn;

namespace {

// Two feature clusters joined into cluster-pure path components.
Graph toy_node_graph() {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i + 1 < 5; ++i) edges.emplace_back(i, i + 1);
  for (int i = 5; i + 1 < 10; ++i) edges.emplace_back(i, i + 1);
  Graph g = Graph::from_edges(10, edges);
  g.features = Matrix::Zero(10, 2);
  g.labels.resize(10);
  for (int i = 0; i < 10; ++i) {
    const bool second = i >= 5;
    g.features(i, second ? 1 : 0) = 1.0 + 0.01 * i;
    g.features(i, second ? 0 : 1) = 0.25;  // overlap keeps every relu channel fed
    g.labels[i] = second ? 1 : 0;
  }
  g.train_idx = {0, 1, 5, 6};
  g.val_idx = {2, 7};
  g.test_idx = {3, 4, 8, 9};
  return g;
}

TrainConfig toy_config() {
  TrainConfig cfg;
  cfg.model.arch = Arch::gcn;
  cfg.model.geometry = GeometryContext::euclidean(8);
  cfg.model.num_layers = 2;
  cfg.lr = 0.05;
  cfg.max_epochs = 60;
  cfg.patience = 60;
  cfg.seed = 1;
  cfg.dataset = "toy";
  return cfg;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("spdgnn_harness_" + std::to_string(counter++) + "_" +
            std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace

TEST_CASE("adam first step moves 1.0 to 0.9 under lr 0.1") {
  ParamStore p;
  p.add("w", Matrix::Constant(1, 1, 1.0));
  AdamState st;
  adam_step(p, {Matrix::Constant(1, 1, 2.0)}, st, 0.1, 0.0);
  CHECK(p.at("w")(0, 0) == doctest::Approx(0.9).epsilon(1e-7));
  CHECK(st.t == 1);
}

TEST_CASE("adam leaves zero-gradient weights untouched and decays with wd") {
  ParamStore p;
  p.add("w", Matrix::Constant(1, 1, 1.0));
  AdamState st;
  adam_step(p, {Matrix::Zero(1, 1)}, st, 0.1, 0.0);
  CHECK(p.at("w")(0, 0) == 1.0);

  ParamStore q;
  q.add("w", Matrix::Constant(1, 1, 1.0));
  AdamState st2;
  adam_step(q, {Matrix::Zero(1, 1)}, st2, 0.1, 0.01);
  CHECK(q.at("w")(0, 0) < 1.0);  // decay enters through the gradient
}

TEST_CASE("gradient clipping scales to the ceiling and reports the raw norm") {
  std::vector<Matrix> g = {Matrix::Constant(1, 1, 3.0), Matrix::Constant(1, 1, 4.0)};
  CHECK(clip_gradients(g, 2.5) == doctest::Approx(5.0));
  CHECK(std::sqrt(g[0].squaredNorm() + g[1].squaredNorm()) == doctest::Approx(2.5));

  std::vector<Matrix> h = {Matrix::Constant(1, 1, 0.6)};
  CHECK(clip_gradients(h, 5.0) == doctest::Approx(0.6));
  CHECK(h[0](0, 0) == 0.6);

  std::vector<Matrix> k = {Matrix::Constant(1, 1, 100.0)};
  clip_gradients(k, 0.0);  // disabled
  CHECK(k[0](0, 0) == 100.0);
}

TEST_CASE("config json round-trips and hashes configuration content") {
  TrainConfig cfg = toy_config();
  cfg.model.geometry = GeometryContext::spd(3);
  cfg.model.classifier = ClassifierKind::nc_mm;
  cfg.model.dropout = 0.5;
  cfg.weight_decay = 0.0005;
  cfg.seed = 42;

  TrainConfig back = config_from_json(config_to_json(cfg));
  CHECK(back.model.arch == cfg.model.arch);
  CHECK(back.model.geometry.kind == cfg.model.geometry.kind);
  CHECK(back.model.geometry.dim == cfg.model.geometry.dim);
  CHECK(back.model.classifier == cfg.model.classifier);
  CHECK(back.model.dropout == cfg.model.dropout);
  CHECK(back.lr == cfg.lr);
  CHECK(back.weight_decay == cfg.weight_decay);
  CHECK(back.seed == cfg.seed);
  CHECK(back.dataset == cfg.dataset);
  CHECK(config_hash(back) == config_hash(cfg));

  TrainConfig other = cfg;
  other.lr = 0.07;
  CHECK(config_hash(other) != config_hash(cfg));

  CHECK_THROWS_AS(config_from_json("{\"learning_rate\": 0.1}"), ConfigError);
  CHECK_THROWS_AS(config_from_json("{\"lr\": \"fast\"}"), ConfigError);
  CHECK_THROWS_AS(config_from_json("[1,2]"), ConfigError);
  CHECK_THROWS_AS(config_from_json("{\"lr\""), ConfigError);
}

TEST_CASE("train config validation") {
  TrainConfig cfg = toy_config();
  cfg.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = toy_config();
  cfg.patience = cfg.max_epochs + 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = toy_config();
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(parse_geometry("flat", 4), ConfigError);
}

TEST_CASE("node training separates the toy clusters and is seed-deterministic") {
  Graph g = toy_node_graph();
  TrainConfig cfg = toy_config();
  TrainResult r = train_node_model(cfg, g);
  CHECK(r.train_acc == 1.0);
  CHECK(r.test_acc == 1.0);
  CHECK(r.best_epoch >= 1);
  CHECK(std::isfinite(r.best_dev_loss));
  CHECK(!r.history.empty());
  CHECK(r.history.front().train_loss > r.history.back().train_loss);
  for (const EpochStats& s : r.history) CHECK(std::isnan(s.min_eig));

  TrainResult again = train_node_model(cfg, g);
  REQUIRE(again.history.size() == r.history.size());
  for (size_t i = 0; i < r.history.size(); ++i)
    CHECK(again.history[i].train_loss == r.history[i].train_loss);
  CHECK(again.test_acc == r.test_acc);

  TrainConfig reseeded = cfg;
  reseeded.seed = 2;
  TrainResult other = train_node_model(reseeded, g);
  CHECK(other.history.front().train_loss != r.history.front().train_loss);
}

TEST_CASE("margin loss reaches exact zero and patience then stops the run") {
  Graph g = toy_node_graph();
  TrainConfig cfg = toy_config();
  cfg.model.classifier = ClassifierKind::nc_mm;
  cfg.model.num_layers = 1;  // a deep relu stack can die entirely at this scale
  cfg.max_epochs = 400;
  cfg.patience = 5;
  TrainResult r = train_node_model(cfg, g);
  CHECK(r.history.size() < 400);
  CHECK(r.best_dev_loss == 0.0);
  CHECK(r.history.back().dev_loss == 0.0);
}

TEST_CASE("spd node training tracks a positive spectrum on the toy graph") {
  Graph g = toy_node_graph();
  TrainConfig cfg = toy_config();
  cfg.model.geometry = GeometryContext::spd(2);
  cfg.lr = 0.01;
  cfg.max_epochs = 5;
  cfg.patience = 5;
  TrainResult r = train_node_model(cfg, g, true);
  REQUIRE(r.history.size() == 5);
  for (const EpochStats& s : r.history) {
    CHECK(std::isfinite(s.min_eig));
    CHECK(s.min_eig > 0.0);
  }
}

TEST_CASE("runaway step size on a curved geometry raises DivergedTrainingError") {
  Graph g = toy_node_graph();
  TrainConfig cfg = toy_config();
  cfg.model.geometry = GeometryContext::spd(2);
  cfg.lr = 1e6;
  cfg.clip_norm = 0.0;
  cfg.max_epochs = 50;
  cfg.patience = 50;
  CHECK_THROWS_AS(train_node_model(cfg, g), DivergedTrainingError);
}

TEST_CASE("graph-level training classifies triangles versus paths") {
  GraphDataset ds;
  ds.feature_dim = 2;
  ds.num_classes = 2;
  for (int k = 0; k < 12; ++k) {
    const bool tri = k % 2 == 0;
    Graph g = tri ? Graph::from_edges(3, {{0, 1}, {1, 2}, {0, 2}})
                  : Graph::from_edges(3, {{0, 1}, {1, 2}});
    g.features = Matrix::Constant(3, 2, 1.0);
    g.features.col(1).setConstant(tri ? 1.0 : 0.25);
    ds.graphs.push_back(std::move(g));
    ds.labels.push_back(tri ? 0 : 1);
  }
  GraphSplit split;
  split.train = {0, 1, 2, 3, 4, 5, 6, 7};
  split.dev = {8, 9};
  split.test = {10, 11};

  TrainConfig cfg = toy_config();
  cfg.model.num_layers = 1;
  cfg.max_epochs = 40;
  cfg.patience = 40;
  cfg.batch_size = 3;
  TrainResult r = train_graph_model(cfg, ds, split);
  CHECK(r.test_acc == 1.0);
  CHECK(r.train_acc == 1.0);

  TrainResult again = train_graph_model(cfg, ds, split);
  CHECK(again.history.front().train_loss == r.history.front().train_loss);
}

TEST_CASE("grid sizes follow geometry and classifier") {
  TrainConfig base = toy_config();
  CHECK(make_grid(base).size() == 18);  // 3 lr x 2 dropout x 3 wd
  base.model.geometry = GeometryContext::spd(3);
  CHECK(make_grid(base).size() == 36);
  base.model.classifier = ClassifierKind::svm_mm;
  CHECK(make_grid(base).size() == 144);
  base.model.geometry = GeometryContext::euclidean(4);
  base.model.classifier = ClassifierKind::nc_mm;
  CHECK(make_grid(base).size() == 72);
}

TEST_CASE("grid search ranks by dev accuracy and resumes finished runs") {
  Graph g = toy_node_graph();
  TrainConfig base = toy_config();
  base.max_epochs = 8;
  base.patience = 8;
  TempDir dir;

  auto entries = grid_search(base, g, dir.path.string(), 2);
  REQUIRE(entries.size() == 18);
  for (size_t i = 1; i < entries.size(); ++i) CHECK(entries[i - 1].dev_acc >= entries[i].dev_acc);
  CHECK(std::filesystem::exists(dir.path / "leaderboard.csv"));

  // Every run left its artefacts behind.
  size_t result_files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir.path))
    if (e.path().filename() == "result.json") ++result_files;
  CHECK(result_files == 18);

  // A second pass must reuse results instead of retraining: drop the epoch
  // records and confirm they are not rewritten.
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir.path))
    if (e.path().filename() == "record.jsonl") std::filesystem::remove(e.path());
  auto resumed = grid_search(base, g, dir.path.string(), 1);
  REQUIRE(resumed.size() == entries.size());
  for (size_t i = 0; i < entries.size(); ++i) {
    CHECK(resumed[i].hash == entries[i].hash);
    CHECK(resumed[i].dev_acc == entries[i].dev_acc);
  }
  size_t records = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir.path))
    if (e.path().filename() == "record.jsonl") ++records;
  CHECK(records == 0);
}

TEST_CASE("seed evaluation summarises accuracy and the csv is byte-stable") {
  Graph g = toy_node_graph();
  TrainConfig cfg = toy_config();
  cfg.max_epochs = 15;
  cfg.patience = 15;
  SummaryRow row = evaluate_seeds(cfg, g, 3);
  CHECK(row.seeds == 3);
  CHECK(row.mean_acc >= 0.0);
  CHECK(row.mean_acc <= 100.0);
  CHECK(row.std_acc >= 0.0);

  std::ostringstream a, b;
  write_summary_csv(a, {row});
  SummaryRow row2 = evaluate_seeds(cfg, g, 3);
  write_summary_csv(b, {row2});
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("dataset,arch,geometry,dim", 0) == 0);
  CHECK_THROWS_AS(evaluate_seeds(cfg, g, 0), ConfigError);
}

TEST_CASE("format_double is shortest round-trip text") {
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-2.25) == "-2.25");
  for (double v : {1.0 / 3.0, 0.1, 96.9, 1e-9, 123456.789}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("embedding export is reproducible and shaped by the geometry") {
  Graph g = toy_node_graph();
  TrainConfig cfg = toy_config();
  cfg.model.geometry = GeometryContext::euclidean(4);
  cfg.max_epochs = 10;
  cfg.patience = 10;
  TrainResult r = train_node_model(cfg, g);

  std::ostringstream a, b;
  export_embeddings(cfg, r.params, g, a);
  export_embeddings(cfg, r.params, g, b);
  CHECK(a.str() == b.str());

  std::istringstream lines(a.str());
  std::string header;
  std::getline(lines, header);
  CHECK(header == "node,label,c0,c1,c2,c3");
  int rows = 0;
  for (std::string line; std::getline(lines, line);) ++rows;
  CHECK(rows == g.num_nodes);

  TrainConfig other = cfg;
  other.model.geometry = GeometryContext::spd(3);
  std::ostringstream c;
  CHECK_THROWS_AS(export_embeddings(other, r.params, g, c), ConfigError);
}