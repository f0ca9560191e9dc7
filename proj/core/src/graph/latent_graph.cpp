#include "topolidar/graph/latent_graph.hpp"

#include <cmath>
#include <ostream>

#include "topolidar/common/error.hpp"
#include "topolidar/num/ops.hpp"

namespace topolidar::graph {

std::vector<Anchor> grid_anchors(std::size_t grid_h, std::size_t grid_w) {
  std::vector<Anchor> a;
  a.reserve(grid_h * grid_w);
  for (std::size_t r = 0; r < grid_h; ++r)
    for (std::size_t c = 0; c < grid_w; ++c) a.push_back({r, c});
  return a;
}

num::Tensor to_grid(const LatentGraph& g) {
  if (g.size() != g.grid_h * g.grid_w)
    throw ShapeError("to_grid: " + std::to_string(g.size()) + " nodes do not fill a " + std::to_string(g.grid_h) + "x" +
                     std::to_string(g.grid_w) + " grid");
  return num::reshape(g.nodes, {g.grid_h, g.grid_w, g.feature_dim()});
}

void write_edges_csv(std::ostream& os, std::span<const LatentGraph> layers, bool header) {
  if (header) os << "node_id,neighbor_id,layer_index\n";
  for (const auto& g : layers)
    for (std::size_t v = 0; v < g.edges.size(); ++v)
      for (auto u : g.edges[v]) os << v << ',' << u << ',' << g.layer_index << '\n';
}

void write_nodes_csv(std::ostream& os, const LatentGraph& g) {
  const auto prec = os.precision(17);
  os << "id,anchor_row,anchor_col,feature_norm\n";
  const std::size_t d = g.feature_dim();
  auto x = g.nodes.data();
  for (std::size_t i = 0; i < g.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += x[i * d + j] * x[i * d + j];
    os << i << ',' << g.anchors[i][0] << ',' << g.anchors[i][1] << ',' << std::sqrt(s) << '\n';
  }
  os.precision(prec);
}

}  // namespace topolidar::graph
