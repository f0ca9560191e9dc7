#pragma once

#include <cstddef>
#include <vector>

#include "topolidar/common/rng.hpp"
#include "topolidar/graph/encoder.hpp"
#include "topolidar/num/checkpoint.hpp"
#include "topolidar/num/tensor.hpp"
#include "topolidar/ph/topo_loss.hpp"
#include "topolidar/range/projection.hpp"

namespace topolidar::vae {

struct VaeConfig {
  std::size_t height = 64;
  std::size_t width = 1024;
  std::size_t f_v = 4;  // vertical downsampling = patch height
  std::size_t f_h = 8;  // horizontal downsampling = patch width
  std::vector<std::size_t> embed_channels{8};
  std::size_t node_dim = 32;
  std::size_t graph_layers = 4;
  std::size_t k = 20;
  std::size_t latent_dim = 16;
  std::size_t decoder_channels = 16;
  double slope = 0.2;
  bool sum_branch = true;
  bool stochastic = true;

  void validate() const;
  std::size_t latent_h() const { return height / f_v; }
  std::size_t latent_w() const { return width / f_h; }
};

enum class Mode { Train, Eval };

struct Encoded {
  num::Tensor z0;      // h x w x d
  num::Tensor mean;    // h x w x d
  num::Tensor logvar;  // h x w x d
  num::Tensor tap2;    // node embeddings after graph layer 2 (undefined if L < 2)
  num::Tensor tap4;    // after layer 4 (undefined if L < 4)
};

/// Graph encoder to an h x w x d Gaussian latent, and a circular-convolution
/// decoder with nearest-neighbour upsampling back to H x W x 1.
class VaeModel {
 public:
  static VaeModel create(const VaeConfig& cfg, Rng& rng);
  static VaeModel from_bundle(const num::TensorBundle& bundle);

  const VaeConfig& config() const { return cfg_; }

  /// Reparameterised z0 = mean + exp(logvar / 2) * eps in Train mode when
  /// the model is stochastic; z0 = mean otherwise. `rng` may be null in Eval.
  Encoded encode(const num::Tensor& image, Mode mode, Rng* rng) const;
  num::Tensor decode(const num::Tensor& z) const;

  std::vector<num::NamedTensor> named_params() const;
  std::vector<num::Tensor> params() const;
  /// Parameters plus a "vae.config" record.
  num::TensorBundle to_bundle() const;
  /// FNV-1a over all parameter bytes, in named_params() order.
  std::uint64_t param_hash() const;

 private:
  VaeConfig cfg_;
  graph::EncoderParams encoder_;
  num::Tensor mu_w_, mu_b_, lv_w_, lv_b_;
  graph::ConvLayer dec_in_;
  std::vector<graph::ConvLayer> dec_stages_;
  std::vector<std::pair<std::size_t, std::size_t>> stage_factors_;
  graph::ConvLayer dec_out_;
};

/// Latent dims (h, w, d) recorded in a VAE bundle.
std::array<std::size_t, 3> latent_shape_of(const num::TensorBundle& bundle);

}  // namespace topolidar::vae
