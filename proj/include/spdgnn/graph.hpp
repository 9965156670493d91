#pragma once

#include <utility>
#include <vector>

#include "spdgnn/symcore.hpp"

namespace spdgnn {

/// Undirected graph in CSR form. Edges are symmetrized and deduplicated, and
/// every node carries a self-loop, so N(i) always contains i and the degree
/// c_i = |N(i)| is at least 1.
struct Graph {
  int num_nodes = 0;
  std::vector<int> row_offsets;  // size num_nodes + 1
  std::vector<int> col_indices;  // ascending within each row, self included

  Matrix features;  // num_nodes x d
  std::vector<int> labels;
  std::vector<int> train_idx, val_idx, test_idx;

  static Graph from_edges(int num_nodes, const std::vector<std::pair<int, int>>& edges);

  int degree(int i) const { return row_offsets[i + 1] - row_offsets[i]; }
  // Undirected edges, the mandatory self loops excluded.
  int num_edges() const { return (static_cast<int>(col_indices.size()) - num_nodes) / 2; }
  int feature_dim() const { return static_cast<int>(features.cols()); }
  int num_classes() const;

  /// Destination-major triplets: edge e points src[e] -> dst[e], grouped by
  /// dst with offsets[i]..offsets[i+1] covering node i (ready for a segment
  /// softmax). With self loops this is exactly the CSR layout.
  struct EdgeSet {
    std::vector<int> dst, src;
    std::vector<int> offsets;
  };
  EdgeSet edges_with_self() const;
  EdgeSet edges_without_self() const;

  /// k_ij = 1/sqrt(c_i c_j), aligned with edges_with_self().
  std::vector<double> gcn_weights() const;
  /// Rescaled normalized Laplacian entries delta_ij - k_ij, same alignment.
  std::vector<double> cheb_weights() const;
};

/// Relabels nodes by node i -> pi[i]. Features, labels and masks follow.
Graph permute_graph(const Graph& g, const std::vector<int>& pi);

}  // namespace spdgnn
