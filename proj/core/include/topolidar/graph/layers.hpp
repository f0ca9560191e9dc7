#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "topolidar/common/rng.hpp"
#include "topolidar/graph/latent_graph.hpp"
#include "topolidar/num/tensor.hpp"

namespace topolidar::graph {

struct ConvLayer {
  num::Tensor weight;  // kh x kw x Cin x Cout
  num::Tensor bias;    // Cout
};

/// Circular-convolution stack applied to the whole image, then each
/// patch_h x patch_w patch is flattened and projected to D features.
struct PatchEmbedParams {
  std::size_t patch_h = 4;
  std::size_t patch_w = 8;
  std::vector<ConvLayer> convs;
  num::Tensor proj_weight;  // (patch_h * patch_w * C) x D
  num::Tensor proj_bias;    // D
  double slope = 0.2;

  std::size_t out_dim() const { return proj_weight.dim(1); }
};

/// One max-pooled edge-convolution layer. For node v with neighbours N_v,
///   c_u = LeakyReLU(W_conv [h_v ; h_u - h_v] + W_sum * sum_{w in N_v} h_w + b)
///   h_v' = max_{u in N_v} c_u    (elementwise)
/// w_sum is optional; leaving it undefined disables the aggregate branch.
struct GraphLayerParams {
  num::Tensor w_conv;  // 2*Din x Dout
  num::Tensor w_sum;   // Din x Dout, or undefined
  num::Tensor bias;    // Dout
  double slope = 0.2;

  std::size_t in_dim() const { return w_conv.dim(0) / 2; }
  std::size_t out_dim() const { return w_conv.dim(1); }
};

enum class KnnSpace { Anchors, Features };

/// Embeds an H x W x C image into a graph with one node per patch.
LatentGraph patch_embed(const num::Tensor& image, const PatchEmbedParams& params);

/// 2-D sinusoidal encoding: the first D/2 entries encode the anchor row, the
/// last D/2 the column. Entry m of an axis block is sin(p * w_j) for even m
/// and cos(p * w_j) for odd m, with j = m / 2 and w_j = 10000^(-2j / (D/2)).
num::Tensor positional_encoding(std::span<const Anchor> anchors, std::size_t dim);
LatentGraph add_positional_encoding(const LatentGraph& g);

/// Exact k nearest neighbours (Euclidean) of each of n points, excluding the
/// point itself; ties go to the smaller index.
NeighborLists knn(std::span<const double> coords, std::size_t n, std::size_t dim, std::size_t k);
LatentGraph knn_edges(const LatentGraph& g, std::size_t k, KnnSpace space);

/// Applies one graph layer. The result carries no edges and layer_index + 1.
LatentGraph graph_layer(const LatentGraph& g, const GraphLayerParams& params);

PatchEmbedParams make_patch_embed(std::size_t patch_h, std::size_t patch_w, std::size_t in_channels,
                                  std::span<const std::size_t> conv_channels, std::size_t dim, double slope, Rng& rng);
GraphLayerParams make_graph_layer(std::size_t in_dim, std::size_t out_dim, bool sum_branch, double slope, Rng& rng);

}  // namespace topolidar::graph
