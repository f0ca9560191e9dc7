#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "topolidar/num/tensor.hpp"
#include "topolidar/range/projection.hpp"

namespace topolidar::ph {

enum class TopoSign {
  Persistence,  // sum of (death - birth): >= 0, minimised by a single component
  Literal,      // sum of (birth - death), the negated form, kept for ablations
};

/// Total finite persistence of an N x D point tensor as a differentiable
/// scalar. The gradient of each MST edge length moves its two endpoints
/// along the edge direction; zero-length edges contribute nothing. With
/// fewer than two points the loss is 0.
num::Tensor topo_loss(const num::Tensor& points, TopoSign sign = TopoSign::Persistence);

/// `cap` indices spread evenly over [0, n): floor((i + 0.5) * n / cap).
/// Returns all of [0, n) when n <= cap.
std::vector<std::size_t> stratified_indices(std::size_t n, std::size_t cap);

/// Row-subsampled topo_loss for large node sets.
num::Tensor topo_loss_sampled(const num::Tensor& points, std::size_t cap, TopoSign sign = TopoSign::Persistence);

struct ImageTopoLoss {
  num::Tensor loss;
  std::size_t points = 0;
  bool degenerate = false;  // fewer than two occupied pixels; loss is 0
};

/// topo_loss over the point cloud of an H x W x 1 range image, keeping the
/// pixel values differentiable. Occupied pixels are those with a positive
/// value, or, when `mask` is given, those where mask > 0. At most
/// `sample_cap` occupied pixels are used, chosen by stratified_indices over
/// their row-major order. Point coordinates are in metres.
ImageTopoLoss topo_loss_on_image(const num::Tensor& image, const range::ProjectionConfig& cfg, std::size_t sample_cap,
                                 std::optional<std::span<const double>> mask = std::nullopt,
                                 TopoSign sign = TopoSign::Persistence);

}  // namespace topolidar::ph
