#pragma once

#include <cstddef>
#include <vector>

#include "topolidar/graph/layers.hpp"

namespace topolidar::graph {

struct EncoderParams {
  PatchEmbedParams embed;
  std::vector<GraphLayerParams> layers;
  std::size_t k = 20;
};

struct EncodeResult {
  LatentGraph output;               // after the last layer (no edges)
  std::vector<num::Tensor> layer_outputs;  // node features after each layer
  std::vector<LatentGraph> layer_inputs;   // graphs with edges, when traced

  /// Node embeddings after layer `layer` (1-based), if it exists.
  const num::Tensor* tap(std::size_t layer) const;
};

/// patch_embed -> positional encoding -> L x {k-NN, graph_layer}. Layer 1
/// connects nodes by anchor distance; later layers rebuild the graph in
/// feature space from the previous layer's output.
EncodeResult encode(const num::Tensor& image, const EncoderParams& params, bool trace = false);

}  // namespace topolidar::graph
