#include "topolidar/ph/topo_loss.hpp"

#include "topolidar/common/error.hpp"
#include "topolidar/num/ops.hpp"
#include "topolidar/ph/persistence.hpp"

namespace topolidar::ph {

using num::Tensor;

Tensor topo_loss(const Tensor& points, TopoSign sign) {
  if (points.rank() != 2) throw ShapeError("topo_loss: expected N x D points, got " + num::to_string(points.shape()));
  const std::size_t n = points.dim(0), dim = points.dim(1);
  const double s = sign == TopoSign::Persistence ? 1.0 : -1.0;
  if (n < 2) return num::detail::make_result("topo_loss", {}, {0.0}, {points}, [](num::detail::Node&) {});

  const auto diagram = persistence_0d(points.data(), n, dim);
  double value = 0.0;
  for (const auto& p : diagram.pairs)
    if (!p.essential()) value += p.death - p.birth;
  std::vector<PersistencePair> edges(diagram.pairs.begin() + 1, diagram.pairs.end());

  return num::detail::make_result("topo_loss", {}, {s * value}, {points},
                                  [edges = std::move(edges), dim, s](num::detail::Node& self) {
                                    auto& in = *self.inputs[0];
                                    const double g = s * self.grad[0];
                                    for (const auto& e : edges) {
                                      if (e.death <= 0.0) continue;
                                      for (std::size_t k = 0; k < dim; ++k) {
                                        const double d = (in.data[e.u * dim + k] - in.data[e.v * dim + k]) / e.death;
                                        in.grad[e.u * dim + k] += g * d;
                                        in.grad[e.v * dim + k] -= g * d;
                                      }
                                    }
                                  });
}

std::vector<std::size_t> stratified_indices(std::size_t n, std::size_t cap) {
  std::vector<std::size_t> idx;
  if (n <= cap) {
    idx.resize(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
  }
  idx.reserve(cap);
  for (std::size_t i = 0; i < cap; ++i)
    idx.push_back(static_cast<std::size_t>((static_cast<double>(i) + 0.5) * static_cast<double>(n) /
                                           static_cast<double>(cap)));
  return idx;
}

Tensor topo_loss_sampled(const Tensor& points, std::size_t cap, TopoSign sign) {
  if (points.rank() != 2) throw ShapeError("topo_loss_sampled: expected N x D points");
  if (points.dim(0) <= cap) return topo_loss(points, sign);
  const auto idx = stratified_indices(points.dim(0), cap);
  return topo_loss(num::gather_rows(points, idx), sign);
}

ImageTopoLoss topo_loss_on_image(const Tensor& image, const range::ProjectionConfig& cfg, std::size_t sample_cap,
                                 std::optional<std::span<const double>> mask, TopoSign sign) {
  if (image.rank() != 3 || image.dim(2) != 1)
    throw ShapeError("topo_loss_on_image: expected H x W x 1, got " + num::to_string(image.shape()));
  const std::size_t hw = image.dim(0) * image.dim(1);
  if (mask && mask->size() != hw) throw ShapeError("topo_loss_on_image: mask size does not match image");
  auto v = image.data();
  std::vector<std::size_t> occupied;
  for (std::size_t p = 0; p < hw; ++p)
    if (mask ? (*mask)[p] > 0.0 : v[p] > 0.0) occupied.push_back(p);

  ImageTopoLoss out;
  if (occupied.size() < 2) {
    out.loss = num::mul_scalar(num::sum(image), 0.0);
    out.degenerate = true;
    out.points = occupied.size();
    return out;
  }
  std::vector<std::size_t> chosen;
  for (auto i : stratified_indices(occupied.size(), sample_cap)) chosen.push_back(occupied[i]);
  out.points = chosen.size();
  out.loss = topo_loss(range::unproject_pixels(image, cfg, chosen), sign);
  return out;
}

}  // namespace topolidar::ph
