#include "topolidar/graph/encoder.hpp"

#include "topolidar/common/error.hpp"

namespace topolidar::graph {

const num::Tensor* EncodeResult::tap(std::size_t layer) const {
  if (layer == 0 || layer > layer_outputs.size()) return nullptr;
  return &layer_outputs[layer - 1];
}

EncodeResult encode(const num::Tensor& image, const EncoderParams& params, bool trace) {
  if (params.layers.empty()) throw ConfigError("encode: need at least one graph layer");
  EncodeResult res;
  LatentGraph g = add_positional_encoding(patch_embed(image, params.embed));
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const KnnSpace space = l == 0 ? KnnSpace::Anchors : KnnSpace::Features;
    // A single node has no neighbours; the layer then acts on the node alone.
    if (g.size() == 1) {
      g.edges = {{0}};
    } else {
      g = knn_edges(g, params.k, space);
    }
    if (trace) res.layer_inputs.push_back(g);
    g = graph_layer(g, params.layers[l]);
    res.layer_outputs.push_back(g.nodes);
  }
  res.output = std::move(g);
  return res;
}

}  // namespace topolidar::graph
