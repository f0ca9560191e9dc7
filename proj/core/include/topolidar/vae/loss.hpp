#pragma once

#include <cstddef>

#include "topolidar/common/rng.hpp"
#include "topolidar/ph/topo_loss.hpp"
#include "topolidar/range/projection.hpp"
#include "topolidar/vae/model.hpp"

namespace topolidar::vae {

struct LossWeights {
  double topo = 0.01;
  double kl = 1e-6;
  std::size_t sample_cap = 512;
  ph::TopoSign sign = ph::TopoSign::Persistence;
  bool masked_recon = true;  // L1 over occupied target pixels only
};

struct LossBreakdown {
  num::Tensor total;
  double recon = 0.0;
  double topo_image = 0.0;
  double topo_l2 = 0.0;
  double topo_l4 = 0.0;
  double kl = 0.0;
  bool topo_degenerate = false;
  num::Tensor reconstruction;  // H x W x 1
};

/// L1 reconstruction + weights.topo * (topo(decoded) + topo(layer 2) +
/// topo(layer 4)) + weights.kl * KL(q || N(0, I)). The KL term is averaged
/// per latent element; the image topo term uses the target's occupancy.
/// Each topo term is divided by the number of points it was computed on; the
/// image term measures distances in metres.
LossBreakdown vae_loss(const VaeModel& model, const range::RangeImage& target, const LossWeights& weights, Mode mode,
                       Rng* rng);

/// Mean over elements of 0.5 * (mean^2 + exp(logvar) - 1 - logvar).
num::Tensor kl_divergence(const num::Tensor& mean, const num::Tensor& logvar);

/// Mean |a - b| over pixels where mask > 0 (over all pixels when mask is
/// empty). Zero when no pixel qualifies.
num::Tensor masked_l1(const num::Tensor& a, const num::Tensor& b, std::span<const double> mask);

}  // namespace topolidar::vae
