#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "topolidar/num/tensor.hpp"

namespace topolidar::graph {

using Anchor = std::array<std::size_t, 2>;  // (row, col) on the patch grid
using NeighborLists = std::vector<std::vector<std::size_t>>;

/// Node features over a patch grid plus the k-NN edges of the current layer.
/// Node i sits at anchors[i]; nodes are laid out row-major over the grid.
struct LatentGraph {
  num::Tensor nodes;  // N x D
  NeighborLists edges;
  std::vector<Anchor> anchors;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  int layer_index = 0;

  std::size_t size() const { return anchors.size(); }
  std::size_t feature_dim() const { return nodes.dim(1); }
};

/// Row-major anchors of a grid_h x grid_w grid.
std::vector<Anchor> grid_anchors(std::size_t grid_h, std::size_t grid_w);

/// Node features reshaped to grid_h x grid_w x D.
num::Tensor to_grid(const LatentGraph& g);

/// Edge list CSV: node_id,neighbor_id,layer_index.
void write_edges_csv(std::ostream& os, std::span<const LatentGraph> layers, bool header = true);
/// Node CSV: id,anchor_row,anchor_col,feature_norm.
void write_nodes_csv(std::ostream& os, const LatentGraph& g);

}  // namespace topolidar::graph
