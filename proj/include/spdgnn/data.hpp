#pragma once

#include <string>
#include <vector>

#include "spdgnn/graph.hpp"

namespace spdgnn {

/// Loads a node-classification dataset from a directory containing
///   graph.edges    whitespace-separated "u v" pairs, 0-indexed
///   features.csv   one comma-separated row of doubles per node
///   labels.csv     one integer per node
///   split.json     {"train": [...], "val": [...], "test": [...]}
/// The node count is the number of feature rows; an empty edge file yields
/// isolated self-looped nodes.
Graph load_node_dataset(const std::string& dir);

/// Graph-classification dataset in the common txt bundle layout:
/// <name>_A.txt (1-indexed "i, j" edges), <name>_graph_indicator.txt,
/// <name>_graph_labels.txt, <name>_node_labels.txt (optional),
/// <name>_node_attributes.txt (optional). Node features are the one-hot node
/// label concatenated with the attributes; labels are remapped to 0..K-1 by
/// sorted value.
struct GraphDataset {
  std::vector<Graph> graphs;
  std::vector<int> labels;
  int feature_dim = 0;
  int num_classes = 0;
};
GraphDataset load_tudataset(const std::string& dir, const std::string& name, bool zscore = false);

/// Stratified split: members of each class are shuffled by `seed` and dealt
/// round-robin into 10 folds; fold 0 is the test set, a tenth of the rest
/// (largest-remainder allocation per class) is dev, the remainder trains.
/// 100 balanced graphs give 10 / 9 / 81.
struct GraphSplit {
  std::vector<int> train, dev, test;
};
GraphSplit split_tudataset(const GraphDataset& ds, unsigned long long seed);

/// Complete b-ary tree with `height` levels below the root:
/// synth_tree(2, 3) has 15 nodes and 14 edges.
Graph synth_tree(int branching, int height);

/// w x h grid: synth_grid(3, 3) has 9 nodes and 12 edges.
Graph synth_grid(int w, int h);

/// A tree whose every leaf is joined to the corner of its own grid. Labels:
/// 0 = tree interior, 1 = grid node, 2 = junction (former leaf). Features are
/// a seeded random projection of the one-hot degree; masks are a stratified
/// 60/20/20 split.
Graph synth_tree_of_grids(int branching, int height, int grid_w, int grid_h, int feature_dim,
                          unsigned long long seed);

/// Gromov four-point hyperbolicity: max over distinct quadruples of
/// (largest - middle) / 2 of the three pairwise distance sums. Exact
/// enumeration; throws TooLargeForExact above 300 nodes and Disconnected
/// when shortest paths are undefined. Trees give exactly 0.
double delta_hyperbolicity_exact(const Graph& g);

/// Seeded random-quadruple lower bound on the same quantity.
double delta_hyperbolicity_sampled(const Graph& g, long long quadruples,
                                   unsigned long long seed);

/// All-pairs BFS distances over the self-loop-free adjacency.
/// Throws Disconnected when any pair is unreachable.
std::vector<std::vector<int>> bfs_all_pairs(const Graph& g);

}  // namespace spdgnn
