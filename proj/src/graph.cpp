#include "spdgnn/graph.hpp"

#include <algorithm>
#include <cmath>

#include "spdgnn/errors.hpp"

namespace spdgnn {

Graph Graph::from_edges(int num_nodes, const std::vector<std::pair<int, int>>& edges) {
  if (num_nodes <= 0) throw EmptyGraphError("graph needs at least one node");
  std::vector<std::vector<int>> adj(static_cast<size_t>(num_nodes));
  for (const auto& [u, v] : edges) {
    if (u < 0 || u >= num_nodes || v < 0 || v >= num_nodes)
      throw IndexOutOfRangeError("edge endpoint " + std::to_string(u < 0 || u >= num_nodes ? u : v) +
                                 " outside [0, " + std::to_string(num_nodes) + ")");
    adj[static_cast<size_t>(u)].push_back(v);
    adj[static_cast<size_t>(v)].push_back(u);
  }
  Graph g;
  g.num_nodes = num_nodes;
  g.row_offsets.resize(static_cast<size_t>(num_nodes) + 1, 0);
  for (int i = 0; i < num_nodes; ++i) {
    auto& row = adj[static_cast<size_t>(i)];
    row.push_back(i);
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    g.row_offsets[static_cast<size_t>(i) + 1] =
        g.row_offsets[static_cast<size_t>(i)] + static_cast<int>(row.size());
    g.col_indices.insert(g.col_indices.end(), row.begin(), row.end());
  }
  return g;
}

int Graph::num_classes() const {
  int m = 0;
  for (int y : labels) m = std::max(m, y + 1);
  return m;
}

Graph::EdgeSet Graph::edges_with_self() const {
  EdgeSet es;
  es.dst.reserve(col_indices.size());
  es.src = col_indices;
  es.offsets = row_offsets;
  for (int i = 0; i < num_nodes; ++i)
    for (int e = row_offsets[static_cast<size_t>(i)]; e < row_offsets[static_cast<size_t>(i) + 1]; ++e)
      es.dst.push_back(i);
  return es;
}

Graph::EdgeSet Graph::edges_without_self() const {
  EdgeSet es;
  es.offsets.resize(static_cast<size_t>(num_nodes) + 1, 0);
  for (int i = 0; i < num_nodes; ++i) {
    for (int e = row_offsets[static_cast<size_t>(i)]; e < row_offsets[static_cast<size_t>(i) + 1]; ++e) {
      int j = col_indices[static_cast<size_t>(e)];
      if (j == i) continue;
      es.dst.push_back(i);
      es.src.push_back(j);
    }
    es.offsets[static_cast<size_t>(i) + 1] = static_cast<int>(es.dst.size());
  }
  return es;
}

std::vector<double> Graph::gcn_weights() const {
  std::vector<double> w;
  w.reserve(col_indices.size());
  for (int i = 0; i < num_nodes; ++i) {
    double ci = static_cast<double>(degree(i));
    for (int e = row_offsets[static_cast<size_t>(i)]; e < row_offsets[static_cast<size_t>(i) + 1]; ++e) {
      double cj = static_cast<double>(degree(col_indices[static_cast<size_t>(e)]));
      w.push_back(1.0 / std::sqrt(ci * cj));
    }
  }
  return w;
}

std::vector<double> Graph::cheb_weights() const {
  std::vector<double> w = gcn_weights();
  size_t e = 0;
  for (int i = 0; i < num_nodes; ++i)
    for (int r = row_offsets[static_cast<size_t>(i)]; r < row_offsets[static_cast<size_t>(i) + 1]; ++r, ++e)
      w[e] = (col_indices[static_cast<size_t>(r)] == i ? 1.0 : 0.0) - w[e];
  return w;
}

Graph permute_graph(const Graph& g, const std::vector<int>& pi) {
  if (static_cast<int>(pi.size()) != g.num_nodes)
    throw DimensionMismatchError("permutation size does not match node count");
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < g.num_nodes; ++i)
    for (int e = g.row_offsets[static_cast<size_t>(i)]; e < g.row_offsets[static_cast<size_t>(i) + 1]; ++e) {
      int j = g.col_indices[static_cast<size_t>(e)];
      if (j > i) edges.emplace_back(pi[static_cast<size_t>(i)], pi[static_cast<size_t>(j)]);
    }
  Graph out = Graph::from_edges(g.num_nodes, edges);
  if (g.features.size() > 0) {
    out.features.resize(g.num_nodes, g.features.cols());
    for (int i = 0; i < g.num_nodes; ++i) out.features.row(pi[static_cast<size_t>(i)]) = g.features.row(i);
  }
  if (!g.labels.empty()) {
    out.labels.resize(static_cast<size_t>(g.num_nodes));
    for (int i = 0; i < g.num_nodes; ++i) out.labels[static_cast<size_t>(pi[static_cast<size_t>(i)])] =
        g.labels[static_cast<size_t>(i)];
  }
  auto map_idx = [&pi](const std::vector<int>& v) {
    std::vector<int> out_idx;
    out_idx.reserve(v.size());
    for (int i : v) out_idx.push_back(pi[static_cast<size_t>(i)]);
    return out_idx;
  };
  out.train_idx = map_idx(g.train_idx);
  out.val_idx = map_idx(g.val_idx);
  out.test_idx = map_idx(g.test_idx);
  return out;
}

}  // namespace spdgnn
