#include "topolidar/graph/layers.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "topolidar/common/error.hpp"
#include "topolidar/num/init.hpp"
#include "topolidar/num/ops.hpp"

namespace topolidar::graph {

using num::Tensor;

LatentGraph patch_embed(const Tensor& image, const PatchEmbedParams& params) {
  if (image.rank() != 3) throw ShapeError("patch_embed: expected H x W x C image, got " + num::to_string(image.shape()));
  const std::size_t H = image.dim(0), W = image.dim(1);
  const std::size_t ph = params.patch_h, pw = params.patch_w;
  if (ph == 0 || pw == 0 || H % ph != 0 || W % pw != 0)
    throw ShapeError("patch_embed: image " + std::to_string(H) + "x" + std::to_string(W) + " is not divisible into " +
                     std::to_string(ph) + "x" + std::to_string(pw) + " patches");
  Tensor x = image;
  for (const auto& c : params.convs) x = num::leaky_relu(num::conv2d_circular(x, c.weight, c.bias), params.slope);
  const std::size_t C = x.dim(2);
  const std::size_t gh = H / ph, gw = W / pw;

  // Pixel order: patches row-major over the grid, pixels row-major inside.
  std::vector<std::size_t> order;
  order.reserve(H * W);
  for (std::size_t gr = 0; gr < gh; ++gr)
    for (std::size_t gc = 0; gc < gw; ++gc)
      for (std::size_t dy = 0; dy < ph; ++dy)
        for (std::size_t dx = 0; dx < pw; ++dx) order.push_back((gr * ph + dy) * W + gc * pw + dx);
  Tensor pixels = num::gather_rows(num::reshape(x, {H * W, C}), order);
  Tensor patches = num::reshape(pixels, {gh * gw, ph * pw * C});
  if (params.proj_weight.dim(0) != ph * pw * C)
    throw ShapeError("patch_embed: projection expects " + std::to_string(params.proj_weight.dim(0)) +
                     " inputs per patch, got " + std::to_string(ph * pw * C));

  LatentGraph g;
  g.nodes = num::linear(patches, params.proj_weight, params.proj_bias);
  g.anchors = grid_anchors(gh, gw);
  g.grid_h = gh;
  g.grid_w = gw;
  return g;
}

Tensor positional_encoding(std::span<const Anchor> anchors, std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) throw ConfigError("positional encoding needs an even feature dimension, got " + std::to_string(dim));
  const std::size_t half = dim / 2;
  std::vector<double> e(anchors.size() * dim);
  for (std::size_t i = 0; i < anchors.size(); ++i)
    for (std::size_t axis = 0; axis < 2; ++axis) {
      const double p = static_cast<double>(anchors[i][axis]);
      for (std::size_t m = 0; m < half; ++m) {
        const std::size_t j = m / 2;
        const double w = std::pow(10000.0, -2.0 * static_cast<double>(j) / static_cast<double>(half));
        e[i * dim + axis * half + m] = (m % 2 == 0) ? std::sin(p * w) : std::cos(p * w);
      }
    }
  return Tensor::from({anchors.size(), dim}, std::move(e));
}

LatentGraph add_positional_encoding(const LatentGraph& g) {
  LatentGraph out = g;
  out.nodes = num::add(g.nodes, positional_encoding(g.anchors, g.feature_dim()));
  return out;
}

NeighborLists knn(std::span<const double> coords, std::size_t n, std::size_t dim, std::size_t k) {
  if (k == 0) throw ConfigError("knn: k must be positive");
  if (n <= k) throw ConfigError("knn: need more than k=" + std::to_string(k) + " nodes, got " + std::to_string(n));
  NeighborLists out(n);
  std::vector<std::pair<double, std::size_t>> cand;
  cand.reserve(n - 1);
  for (std::size_t v = 0; v < n; ++v) {
    cand.clear();
    for (std::size_t u = 0; u < n; ++u) {
      if (u == v) continue;
      double s = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double d = coords[v * dim + j] - coords[u * dim + j];
        s += d * d;
      }
      cand.emplace_back(s, u);
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    out[v].reserve(k);
    for (std::size_t i = 0; i < k; ++i) out[v].push_back(cand[i].second);
  }
  return out;
}

LatentGraph knn_edges(const LatentGraph& g, std::size_t k, KnnSpace space) {
  LatentGraph out = g;
  if (space == KnnSpace::Anchors) {
    std::vector<double> c;
    c.reserve(g.size() * 2);
    for (const auto& a : g.anchors) {
      c.push_back(static_cast<double>(a[0]));
      c.push_back(static_cast<double>(a[1]));
    }
    out.edges = knn(c, g.size(), 2, k);
  } else {
    out.edges = knn(g.nodes.data(), g.size(), g.feature_dim(), k);
  }
  return out;
}

LatentGraph graph_layer(const LatentGraph& g, const GraphLayerParams& params) {
  const std::size_t n = g.size();
  if (g.edges.size() != n) throw Error("graph_layer: edges not populated for every node");
  const std::size_t k = g.edges.empty() ? 0 : g.edges[0].size();
  for (std::size_t v = 0; v < n; ++v) {
    if (g.edges[v].empty()) throw Error("graph_layer: node " + std::to_string(v) + " has an empty neighbour list");
    if (g.edges[v].size() != k) throw Error("graph_layer: neighbour lists differ in length");
  }
  const std::size_t din = g.feature_dim();
  if (params.w_conv.dim(0) != 2 * din)
    throw ShapeError("graph_layer: W_conv expects " + std::to_string(params.w_conv.dim(0) / 2) +
                     "-dim nodes, got " + std::to_string(din));
  const std::size_t dout = params.out_dim();

  std::vector<std::size_t> nbr, center;
  nbr.reserve(n * k);
  center.reserve(n * k);
  for (std::size_t v = 0; v < n; ++v)
    for (auto u : g.edges[v]) {
      nbr.push_back(u);
      center.push_back(v);
    }
  Tensor hu = num::gather_rows(g.nodes, nbr);     // (N k) x D
  Tensor hv = num::gather_rows(g.nodes, center);  // (N k) x D
  const Tensor parts[2] = {hv, num::sub(hu, hv)};
  Tensor pre = num::matmul(num::concat(parts, 1), params.w_conv);  // (N k) x Dout
  if (params.w_sum.defined()) {
    Tensor agg = num::sum(num::reshape(hu, {n, k, din}), 1);  // N x D
    Tensor msg = num::matmul(agg, params.w_sum);             // N x Dout
    pre = num::add(pre, num::gather_rows(msg, center));
  }
  if (params.bias.defined()) pre = num::add(pre, params.bias);
  Tensor act = num::leaky_relu(pre, params.slope);

  LatentGraph out;
  out.nodes = num::max(num::reshape(act, {n, k, dout}), 1);
  out.anchors = g.anchors;
  out.grid_h = g.grid_h;
  out.grid_w = g.grid_w;
  out.layer_index = g.layer_index + 1;
  return out;
}

PatchEmbedParams make_patch_embed(std::size_t patch_h, std::size_t patch_w, std::size_t in_channels,
                                  std::span<const std::size_t> conv_channels, std::size_t dim, double slope, Rng& rng) {
  PatchEmbedParams p;
  p.patch_h = patch_h;
  p.patch_w = patch_w;
  p.slope = slope;
  const double gain = std::sqrt(2.0 / (1.0 + slope * slope));
  std::size_t cin = in_channels;
  for (auto cout : conv_channels) {
    p.convs.push_back({num::init_normal({3, 3, cin, cout}, 9 * cin, rng, gain), num::init_zeros({cout})});
    cin = cout;
  }
  p.proj_weight = num::init_normal({patch_h * patch_w * cin, dim}, patch_h * patch_w * cin, rng);
  p.proj_bias = num::init_zeros({dim});
  return p;
}

GraphLayerParams make_graph_layer(std::size_t in_dim, std::size_t out_dim, bool sum_branch, double slope, Rng& rng) {
  GraphLayerParams p;
  p.slope = slope;
  const double gain = std::sqrt(2.0 / (1.0 + slope * slope));
  p.w_conv = num::init_normal({2 * in_dim, out_dim}, 2 * in_dim, rng, gain);
  // The aggregate sums k neighbours; keep its initial scale comparable.
  if (sum_branch) p.w_sum = num::init_normal({in_dim, out_dim}, in_dim, rng, 0.1 * gain);
  p.bias = num::init_zeros({out_dim});
  return p;
}

}  // namespace topolidar::graph
