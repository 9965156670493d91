#include "spdgnn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <queue>
#include <random>
#include <sstream>

#include <json.hpp>

#include "spdgnn/errors.hpp"

namespace spdgnn {

namespace {

std::string at(const std::string& file, size_t line) {
  return file + ":" + std::to_string(line);
}

bool read_lines(const std::string& path, std::vector<std::string>& out) {
  std::ifstream f(path);
  if (!f) return false;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return true;
}

std::vector<std::string> require_lines(const std::string& path) {
  std::vector<std::string> out;
  if (!read_lines(path, out)) throw ParseError("cannot open " + path);
  return out;
}

bool blank(const std::string& s) {
  return s.find_first_not_of(" \t") == std::string::npos;
}

double parse_double(const std::string& tok, const std::string& where) {
  const char* b = tok.data();
  const char* e = tok.data() + tok.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  while (e > b && (*(e - 1) == ' ' || *(e - 1) == '\t')) --e;
  double v = 0.0;
  auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc() || r.ptr != e)
    throw ParseError(where + ": expected a number, got '" + tok + "'");
  return v;
}

long parse_long(const std::string& tok, const std::string& where) {
  const char* b = tok.data();
  const char* e = tok.data() + tok.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  while (e > b && (*(e - 1) == ' ' || *(e - 1) == '\t')) --e;
  long v = 0;
  auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc() || r.ptr != e)
    throw ParseError(where + ": expected an integer, got '" + tok + "'");
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  return out;
}

}  // namespace

Graph load_node_dataset(const std::string& dir) {
  const std::string feat_path = dir + "/features.csv";
  std::vector<std::string> feat_lines = require_lines(feat_path);
  while (!feat_lines.empty() && blank(feat_lines.back())) feat_lines.pop_back();
  if (feat_lines.empty()) throw ParseError(feat_path + ": no feature rows");

  const int n = static_cast<int>(feat_lines.size());
  int dim = -1;
  Matrix features;
  for (int i = 0; i < n; ++i) {
    auto toks = split_csv(feat_lines[static_cast<size_t>(i)]);
    if (dim < 0) {
      dim = static_cast<int>(toks.size());
      features.resize(n, dim);
    }
    if (static_cast<int>(toks.size()) != dim)
      throw ParseError(at(feat_path, static_cast<size_t>(i) + 1) + ": expected " +
                       std::to_string(dim) + " columns, got " + std::to_string(toks.size()));
    for (int j = 0; j < dim; ++j)
      features(i, j) =
          parse_double(toks[static_cast<size_t>(j)], at(feat_path, static_cast<size_t>(i) + 1));
  }

  const std::string label_path = dir + "/labels.csv";
  std::vector<std::string> label_lines = require_lines(label_path);
  while (!label_lines.empty() && blank(label_lines.back())) label_lines.pop_back();
  if (static_cast<int>(label_lines.size()) != n)
    throw InconsistentCountsError(label_path + ": " + std::to_string(label_lines.size()) +
                                  " labels for " + std::to_string(n) + " feature rows");
  std::vector<int> labels(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    long v = parse_long(label_lines[static_cast<size_t>(i)], at(label_path, static_cast<size_t>(i) + 1));
    if (v < 0) throw ParseError(at(label_path, static_cast<size_t>(i) + 1) + ": negative label");
    labels[static_cast<size_t>(i)] = static_cast<int>(v);
  }

  const std::string edge_path = dir + "/graph.edges";
  std::vector<std::string> edge_lines = require_lines(edge_path);
  std::vector<std::pair<int, int>> edges;
  for (size_t li = 0; li < edge_lines.size(); ++li) {
    if (blank(edge_lines[li])) continue;
    std::stringstream ss(edge_lines[li]);
    long u = 0, v = 0;
    if (!(ss >> u >> v))
      throw ParseError(at(edge_path, li + 1) + ": expected 'u v'");
    std::string rest;
    if (ss >> rest) throw ParseError(at(edge_path, li + 1) + ": trailing content '" + rest + "'");
    if (u < 0 || u >= n || v < 0 || v >= n)
      throw IndexOutOfRangeError(at(edge_path, li + 1) + ": node id outside [0, " +
                                 std::to_string(n) + ")");
    edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
  }

  Graph g = Graph::from_edges(n, edges);
  g.features = std::move(features);
  g.labels = std::move(labels);

  const std::string split_path = dir + "/split.json";
  std::ifstream sf(split_path);
  if (!sf) throw ParseError("cannot open " + split_path);
  nlohmann::json j;
  try {
    sf >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(split_path + ": " + e.what());
  }
  auto read_mask = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_array())
      throw ParseError(split_path + ": missing array '" + std::string(key) + "'");
    std::vector<int> out;
    for (const auto& v : j[key]) {
      if (!v.is_number_integer()) throw ParseError(split_path + ": non-integer node id in '" + key + "'");
      long id = v.get<long>();
      if (id < 0 || id >= n)
        throw IndexOutOfRangeError(split_path + ": node id " + std::to_string(id) +
                                   " outside [0, " + std::to_string(n) + ")");
      out.push_back(static_cast<int>(id));
    }
    return out;
  };
  g.train_idx = read_mask("train");
  g.val_idx = read_mask("val");
  g.test_idx = read_mask("test");
  return g;
}

GraphDataset load_tudataset(const std::string& dir, const std::string& name, bool zscore) {
  const std::string base = dir + "/" + name + "_";

  std::vector<std::string> ind_lines = require_lines(base + "graph_indicator.txt");
  while (!ind_lines.empty() && blank(ind_lines.back())) ind_lines.pop_back();
  const int n = static_cast<int>(ind_lines.size());
  if (n == 0) throw ParseError(base + "graph_indicator.txt: empty");
  std::vector<int> indicator(static_cast<size_t>(n));
  int num_graphs = 0;
  for (int i = 0; i < n; ++i) {
    long v = parse_long(ind_lines[static_cast<size_t>(i)],
                        at(base + "graph_indicator.txt", static_cast<size_t>(i) + 1));
    if (v < 1) throw ParseError(at(base + "graph_indicator.txt", static_cast<size_t>(i) + 1) +
                                ": graph ids are 1-indexed");
    if (i == 0 && v != 1)
      throw InconsistentCountsError(base + "graph_indicator.txt: first graph id must be 1");
    if (i > 0 && v < indicator[static_cast<size_t>(i) - 1] + 1)
      throw InconsistentCountsError(base + "graph_indicator.txt: graph ids must be non-decreasing");
    if (i > 0 && v > indicator[static_cast<size_t>(i) - 1] + 2)
      throw InconsistentCountsError(base + "graph_indicator.txt: graph ids must not skip values");
    indicator[static_cast<size_t>(i)] = static_cast<int>(v) - 1;
    num_graphs = std::max(num_graphs, static_cast<int>(v));
  }

  std::vector<std::string> glab_lines = require_lines(base + "graph_labels.txt");
  while (!glab_lines.empty() && blank(glab_lines.back())) glab_lines.pop_back();
  if (static_cast<int>(glab_lines.size()) != num_graphs)
    throw InconsistentCountsError(base + "graph_labels.txt: " + std::to_string(glab_lines.size()) +
                                  " labels for " + std::to_string(num_graphs) + " graphs");
  std::vector<long> raw_glabels(static_cast<size_t>(num_graphs));
  for (int i = 0; i < num_graphs; ++i)
    raw_glabels[static_cast<size_t>(i)] = parse_long(
        glab_lines[static_cast<size_t>(i)], at(base + "graph_labels.txt", static_cast<size_t>(i) + 1));
  std::vector<long> uniq = raw_glabels;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::map<long, int> glabel_of;
  for (size_t i = 0; i < uniq.size(); ++i) glabel_of[uniq[i]] = static_cast<int>(i);

  std::vector<std::string> nlab_lines;
  bool have_nlab = read_lines(base + "node_labels.txt", nlab_lines);
  while (!nlab_lines.empty() && blank(nlab_lines.back())) nlab_lines.pop_back();
  std::vector<std::string> attr_lines;
  bool have_attr = read_lines(base + "node_attributes.txt", attr_lines);
  while (!attr_lines.empty() && blank(attr_lines.back())) attr_lines.pop_back();
  if (!have_nlab && !have_attr)
    throw InconsistentCountsError(base + "node_labels.txt / node_attributes.txt: need at least one");
  if (have_nlab && static_cast<int>(nlab_lines.size()) != n)
    throw InconsistentCountsError(base + "node_labels.txt: " + std::to_string(nlab_lines.size()) +
                                  " rows for " + std::to_string(n) + " nodes");
  if (have_attr && static_cast<int>(attr_lines.size()) != n)
    throw InconsistentCountsError(base + "node_attributes.txt: " + std::to_string(attr_lines.size()) +
                                  " rows for " + std::to_string(n) + " nodes");

  std::vector<int> nlab;
  int onehot_dim = 0;
  if (have_nlab) {
    std::vector<long> raw(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
      raw[static_cast<size_t>(i)] = parse_long(
          nlab_lines[static_cast<size_t>(i)], at(base + "node_labels.txt", static_cast<size_t>(i) + 1));
    std::vector<long> u = raw;
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    std::map<long, int> of;
    for (size_t i = 0; i < u.size(); ++i) of[u[i]] = static_cast<int>(i);
    nlab.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) nlab[static_cast<size_t>(i)] = of[raw[static_cast<size_t>(i)]];
    onehot_dim = static_cast<int>(u.size());
  }

  int attr_dim = 0;
  Matrix attrs;
  if (have_attr) {
    for (int i = 0; i < n; ++i) {
      auto toks = split_csv(attr_lines[static_cast<size_t>(i)]);
      if (attr_dim == 0) {
        attr_dim = static_cast<int>(toks.size());
        attrs.resize(n, attr_dim);
      }
      if (static_cast<int>(toks.size()) != attr_dim)
        throw ParseError(at(base + "node_attributes.txt", static_cast<size_t>(i) + 1) +
                         ": ragged attribute row");
      for (int j = 0; j < attr_dim; ++j)
        attrs(i, j) = parse_double(toks[static_cast<size_t>(j)],
                                   at(base + "node_attributes.txt", static_cast<size_t>(i) + 1));
    }
    if (zscore) {
      for (int j = 0; j < attr_dim; ++j) {
        double mean = attrs.col(j).mean();
        double var = (attrs.col(j).array() - mean).square().mean();
        double sd = std::sqrt(var);
        if (sd > 0.0)
          attrs.col(j) = (attrs.col(j).array() - mean) / sd;
        else
          attrs.col(j).setZero();
      }
    }
  }

  std::vector<std::string> a_lines = require_lines(base + "A.txt");
  std::vector<std::vector<std::pair<int, int>>> edges(static_cast<size_t>(num_graphs));
  std::vector<int> first_node(static_cast<size_t>(num_graphs), -1);
  std::vector<int> graph_size(static_cast<size_t>(num_graphs), 0);
  for (int i = 0; i < n; ++i) {
    int gi = indicator[static_cast<size_t>(i)];
    if (first_node[static_cast<size_t>(gi)] < 0) first_node[static_cast<size_t>(gi)] = i;
    ++graph_size[static_cast<size_t>(gi)];
  }
  for (size_t li = 0; li < a_lines.size(); ++li) {
    if (blank(a_lines[li])) continue;
    auto toks = split_csv(a_lines[li]);
    if (toks.size() != 2) throw ParseError(at(base + "A.txt", li + 1) + ": expected 'i, j'");
    long u = parse_long(toks[0], at(base + "A.txt", li + 1));
    long v = parse_long(toks[1], at(base + "A.txt", li + 1));
    if (u < 1 || u > n || v < 1 || v > n)
      throw IndexOutOfRangeError(at(base + "A.txt", li + 1) + ": node id outside [1, " +
                                 std::to_string(n) + "]");
    int ui = static_cast<int>(u) - 1, vi = static_cast<int>(v) - 1;
    int gi = indicator[static_cast<size_t>(ui)];
    if (gi != indicator[static_cast<size_t>(vi)])
      throw InconsistentCountsError(at(base + "A.txt", li + 1) + ": edge crosses graphs");
    edges[static_cast<size_t>(gi)].emplace_back(ui - first_node[static_cast<size_t>(gi)],
                                                vi - first_node[static_cast<size_t>(gi)]);
  }

  GraphDataset ds;
  ds.feature_dim = onehot_dim + attr_dim;
  ds.num_classes = static_cast<int>(uniq.size());
  ds.labels.resize(static_cast<size_t>(num_graphs));
  for (int gi = 0; gi < num_graphs; ++gi) {
    ds.labels[static_cast<size_t>(gi)] = glabel_of[raw_glabels[static_cast<size_t>(gi)]];
    Graph g = Graph::from_edges(graph_size[static_cast<size_t>(gi)], edges[static_cast<size_t>(gi)]);
    g.features = Matrix::Zero(g.num_nodes, ds.feature_dim);
    for (int i = 0; i < g.num_nodes; ++i) {
      int node = first_node[static_cast<size_t>(gi)] + i;
      if (have_nlab) g.features(i, nlab[static_cast<size_t>(node)]) = 1.0;
      if (have_attr) g.features.row(i).tail(attr_dim) = attrs.row(node);
    }
    ds.graphs.push_back(std::move(g));
  }
  return ds;
}

GraphSplit split_tudataset(const GraphDataset& ds, unsigned long long seed) {
  const int num_classes = ds.num_classes;
  std::mt19937_64 rng(seed);
  std::vector<std::vector<int>> members(static_cast<size_t>(num_classes));
  for (size_t i = 0; i < ds.labels.size(); ++i)
    members[static_cast<size_t>(ds.labels[i])].push_back(static_cast<int>(i));

  GraphSplit sp;
  std::vector<std::vector<int>> remaining(static_cast<size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    auto& m = members[static_cast<size_t>(c)];
    std::shuffle(m.begin(), m.end(), rng);
    for (size_t k = 0; k < m.size(); ++k) {
      if (k % 10 == 0)
        sp.test.push_back(m[k]);
      else
        remaining[static_cast<size_t>(c)].push_back(m[k]);
    }
  }
  size_t n_rem = 0;
  for (const auto& r : remaining) n_rem += r.size();
  const size_t dev_total = n_rem / 10;
  std::vector<size_t> quota(static_cast<size_t>(num_classes), 0);
  std::vector<std::pair<double, int>> frac;
  size_t assigned = 0;
  for (int c = 0; c < num_classes; ++c) {
    double share = n_rem == 0 ? 0.0
                              : static_cast<double>(dev_total) *
                                    static_cast<double>(remaining[static_cast<size_t>(c)].size()) /
                                    static_cast<double>(n_rem);
    quota[static_cast<size_t>(c)] = static_cast<size_t>(share);
    assigned += quota[static_cast<size_t>(c)];
    frac.emplace_back(share - std::floor(share), c);
  }
  std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (size_t i = 0; assigned < dev_total && i < frac.size(); ++i) {
    size_t c = static_cast<size_t>(frac[i].second);
    if (quota[c] < remaining[c].size()) {
      ++quota[c];
      ++assigned;
    }
  }
  for (int c = 0; c < num_classes; ++c) {
    const auto& r = remaining[static_cast<size_t>(c)];
    for (size_t k = 0; k < r.size(); ++k) {
      if (k < quota[static_cast<size_t>(c)])
        sp.dev.push_back(r[k]);
      else
        sp.train.push_back(r[k]);
    }
  }
  std::sort(sp.train.begin(), sp.train.end());
  std::sort(sp.dev.begin(), sp.dev.end());
  std::sort(sp.test.begin(), sp.test.end());
  return sp;
}

Graph synth_tree(int branching, int height) {
  if (branching < 1 || height < 0) throw ConfigError("tree needs branching >= 1 and height >= 0");
  std::vector<std::pair<int, int>> edges;
  int next = 1;
  std::vector<int> level = {0};
  for (int h = 0; h < height; ++h) {
    std::vector<int> child_level;
    for (int p : level)
      for (int c = 0; c < branching; ++c) {
        edges.emplace_back(p, next);
        child_level.push_back(next++);
      }
    level = std::move(child_level);
  }
  return Graph::from_edges(next, edges);
}

Graph synth_grid(int w, int h) {
  if (w < 1 || h < 1) throw ConfigError("grid needs positive sides");
  std::vector<std::pair<int, int>> edges;
  auto id = [w](int r, int c) { return r * w + c; };
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      if (c + 1 < w) edges.emplace_back(id(r, c), id(r, c + 1));
      if (r + 1 < h) edges.emplace_back(id(r, c), id(r + 1, c));
    }
  return Graph::from_edges(w * h, edges);
}

Graph synth_tree_of_grids(int branching, int height, int grid_w, int grid_h, int feature_dim,
                          unsigned long long seed) {
  if (feature_dim < 1) throw ConfigError("feature_dim must be positive");
  Graph tree = synth_tree(branching, height);
  Graph grid = synth_grid(grid_w, grid_h);

  // Leaves are the deepest level of the node ordering produced by synth_tree.
  int leaves = 1;
  for (int h = 0; h < height; ++h) leaves *= branching;
  const int first_leaf = tree.num_nodes - leaves;
  const int gn = grid.num_nodes;

  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < tree.num_nodes; ++i)
    for (int e = tree.row_offsets[static_cast<size_t>(i)]; e < tree.row_offsets[static_cast<size_t>(i) + 1]; ++e) {
      int j = tree.col_indices[static_cast<size_t>(e)];
      if (j > i) edges.emplace_back(i, j);
    }
  int total = tree.num_nodes;
  for (int l = 0; l < leaves; ++l) {
    int offset = total;
    for (int i = 0; i < gn; ++i)
      for (int e = grid.row_offsets[static_cast<size_t>(i)]; e < grid.row_offsets[static_cast<size_t>(i) + 1]; ++e) {
        int j = grid.col_indices[static_cast<size_t>(e)];
        if (j > i) edges.emplace_back(offset + i, offset + j);
      }
    edges.emplace_back(first_leaf + l, offset);  // graft the grid corner onto the leaf
    total += gn;
  }

  Graph g = Graph::from_edges(total, edges);
  g.labels.resize(static_cast<size_t>(total));
  for (int i = 0; i < total; ++i) {
    if (i < first_leaf)
      g.labels[static_cast<size_t>(i)] = 0;  // tree interior
    else if (i < tree.num_nodes)
      g.labels[static_cast<size_t>(i)] = 2;  // junction
    else
      g.labels[static_cast<size_t>(i)] = 1;  // grid
  }

  std::mt19937_64 rng(seed);
  int max_deg = 0;
  for (int i = 0; i < total; ++i) max_deg = std::max(max_deg, g.degree(i) - 1);
  Matrix proj(feature_dim, max_deg + 1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < feature_dim; ++i)
    for (int j = 0; j <= max_deg; ++j) proj(i, j) = u(rng);
  g.features.resize(total, feature_dim);
  for (int i = 0; i < total; ++i) g.features.row(i) = proj.col(g.degree(i) - 1).transpose();

  for (int c = 0; c < 3; ++c) {
    std::vector<int> idx;
    for (int i = 0; i < total; ++i)
      if (g.labels[static_cast<size_t>(i)] == c) idx.push_back(i);
    std::shuffle(idx.begin(), idx.end(), rng);
    size_t n_tr = static_cast<size_t>(std::lround(0.6 * static_cast<double>(idx.size())));
    n_tr = std::max<size_t>(n_tr, 1);
    size_t n_dev = static_cast<size_t>(std::lround(0.2 * static_cast<double>(idx.size())));
    n_dev = std::min(n_dev, idx.size() - n_tr);
    for (size_t k = 0; k < idx.size(); ++k) {
      if (k < n_tr)
        g.train_idx.push_back(idx[k]);
      else if (k < n_tr + n_dev)
        g.val_idx.push_back(idx[k]);
      else
        g.test_idx.push_back(idx[k]);
    }
  }
  std::sort(g.train_idx.begin(), g.train_idx.end());
  std::sort(g.val_idx.begin(), g.val_idx.end());
  std::sort(g.test_idx.begin(), g.test_idx.end());
  return g;
}

std::vector<std::vector<int>> bfs_all_pairs(const Graph& g) {
  const int n = g.num_nodes;
  std::vector<std::vector<int>> dist(static_cast<size_t>(n), std::vector<int>(static_cast<size_t>(n), -1));
  std::vector<int> queue(static_cast<size_t>(n));
  for (int s = 0; s < n; ++s) {
    auto& d = dist[static_cast<size_t>(s)];
    d[static_cast<size_t>(s)] = 0;
    int head = 0, tail = 0;
    queue[static_cast<size_t>(tail++)] = s;
    while (head < tail) {
      int v = queue[static_cast<size_t>(head++)];
      for (int e = g.row_offsets[static_cast<size_t>(v)]; e < g.row_offsets[static_cast<size_t>(v) + 1]; ++e) {
        int w = g.col_indices[static_cast<size_t>(e)];
        if (d[static_cast<size_t>(w)] < 0) {
          d[static_cast<size_t>(w)] = d[static_cast<size_t>(v)] + 1;
          queue[static_cast<size_t>(tail++)] = w;
        }
      }
    }
    if (tail != n) throw DisconnectedError("graph is disconnected; shortest paths are undefined");
  }
  return dist;
}

namespace {

// (largest - middle) of the three pairwise distance sums of a quadruple.
inline int four_point_defect(const std::vector<std::vector<int>>& d, int x, int y, int u, int v) {
  const int s1 = d[static_cast<size_t>(x)][static_cast<size_t>(y)] + d[static_cast<size_t>(u)][static_cast<size_t>(v)];
  const int s2 = d[static_cast<size_t>(x)][static_cast<size_t>(u)] + d[static_cast<size_t>(y)][static_cast<size_t>(v)];
  const int s3 = d[static_cast<size_t>(x)][static_cast<size_t>(v)] + d[static_cast<size_t>(y)][static_cast<size_t>(u)];
  int hi = s1, mid = s2, lo = s3;
  if (hi < mid) std::swap(hi, mid);
  if (mid < lo) std::swap(mid, lo);
  if (hi < mid) std::swap(hi, mid);
  return hi - mid;
}

}  // namespace

double delta_hyperbolicity_exact(const Graph& g) {
  if (g.num_nodes > 300)
    throw TooLargeForExactError("exact hyperbolicity is quartic; use the sampled bound above 300 nodes");
  if (g.num_nodes < 4) return 0.0;
  auto d = bfs_all_pairs(g);
  int best = 0;
  const int n = g.num_nodes;
  for (int x = 0; x < n; ++x)
    for (int y = x + 1; y < n; ++y)
      for (int u = y + 1; u < n; ++u)
        for (int v = u + 1; v < n; ++v) best = std::max(best, four_point_defect(d, x, y, u, v));
  return static_cast<double>(best) / 2.0;
}

double delta_hyperbolicity_sampled(const Graph& g, long long quadruples, unsigned long long seed) {
  if (quadruples < 1) throw ConfigError("need at least one quadruple");
  if (g.num_nodes < 4) return 0.0;
  auto d = bfs_all_pairs(g);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, g.num_nodes - 1);
  int best = 0;
  for (long long q = 0; q < quadruples; ++q) {
    int x = pick(rng), y = pick(rng), u = pick(rng), v = pick(rng);
    if (x == y || x == u || x == v || y == u || y == v || u == v) continue;
    best = std::max(best, four_point_defect(d, x, y, u, v));
  }
  return static_cast<double>(best) / 2.0;
}

}  // namespace spdgnn
