#pragma once

#include <cstddef>
#include <vector>

#include "topolidar/common/rng.hpp"
#include "topolidar/graph/layers.hpp"
#include "topolidar/num/checkpoint.hpp"
#include "topolidar/num/tensor.hpp"

namespace topolidar::ldm {

struct DenoiserConfig {
  std::size_t channels = 16;               // latent channels c
  std::vector<std::size_t> widths{32, 48, 64};  // per resolution level; depth = widths.size() - 1
  std::size_t time_dim = 64;
  std::size_t cond_dim = 32;
  double slope = 0.2;

  std::size_t depth() const { return widths.size() - 1; }
  void validate() const;
};

/// Sinusoidal embedding of an integer timestep (sin block then cos block).
num::Tensor timestep_embedding(std::size_t t, std::size_t dim);

/// U-shaped circular-convolution network predicting the noise in an
/// h x w x c latent. Every level adds a projection of the time embedding;
/// the optional condition vector is projected (no bias) and added at the
/// bottleneck. h and w must be divisible by 2^depth.
class Denoiser {
 public:
  static Denoiser create(const DenoiserConfig& cfg, Rng& rng);
  static Denoiser from_bundle(const num::TensorBundle& bundle);

  num::Tensor forward(const num::Tensor& z_t, std::size_t t, const num::Tensor* cond = nullptr) const;

  const DenoiserConfig& config() const { return cfg_; }
  std::vector<num::NamedTensor> named_params() const;
  std::vector<num::Tensor> params() const;
  num::TensorBundle to_bundle() const;

 private:
  struct Level {
    graph::ConvLayer conv;   // width -> width
    num::Tensor time_w;      // time_dim x width
    graph::ConvLayer down;   // stride 2, width -> next width (not on the last level)
    graph::ConvLayer up;     // (next + width) -> width (not on the last level)
  };

  DenoiserConfig cfg_;
  num::Tensor t_w1_, t_b1_, t_w2_, t_b2_;
  graph::ConvLayer in_;
  std::vector<Level> levels_;
  graph::ConvLayer mid_;
  num::Tensor cond_w_;  // cond_dim x bottleneck width
  graph::ConvLayer out_;
};

}  // namespace topolidar::ldm
