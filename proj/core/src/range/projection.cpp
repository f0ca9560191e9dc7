#include "topolidar/range/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "topolidar/common/error.hpp"
#include "topolidar/num/ops.hpp"

namespace topolidar::range {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double quantize(double v) { return std::round(v / kRangeQuantum) * kRangeQuantum; }

}  // namespace

void ProjectionConfig::validate() const {
  if (!(fov_down_deg < fov_up_deg))
    throw ConfigError("projection: fov_down (" + std::to_string(fov_down_deg) + ") must be below fov_up (" +
                      std::to_string(fov_up_deg) + ")");
  if (!(r_min > 0.0 && r_min < r_max))
    throw ConfigError("projection: need 0 < r_min < r_max, got r_min=" + std::to_string(r_min) +
                      " r_max=" + std::to_string(r_max));
}

RangeImage RangeImage::zeros(std::size_t h, std::size_t w, const ProjectionConfig& cfg, std::size_t c) {
  return RangeImage{h, w, c, num::Tensor::zeros({h, w, c}), cfg};
}

double normalize_range(double r, const ProjectionConfig& cfg) {
  double v = cfg.log_scale ? (std::log(r) - std::log(cfg.r_min)) / (std::log(cfg.r_max) - std::log(cfg.r_min))
                           : (r - cfg.r_min) / (cfg.r_max - cfg.r_min);
  v = quantize(std::clamp(v, 0.0, 1.0));
  return std::max(v, kRangeQuantum);
}

double denormalize_range(double v, const ProjectionConfig& cfg) {
  if (cfg.log_scale) return std::exp(std::log(cfg.r_min) + v * (std::log(cfg.r_max) - std::log(cfg.r_min)));
  return cfg.r_min + v * (cfg.r_max - cfg.r_min);
}

Point3 ray_direction(const ProjectionConfig& cfg, std::size_t height, std::size_t width, std::size_t row,
                     std::size_t col) {
  const double az = -std::numbers::pi + (static_cast<double>(col) + 0.5) * 2.0 * std::numbers::pi /
                                            static_cast<double>(width);
  const double span = (cfg.fov_up_deg - cfg.fov_down_deg) * kDeg;
  const double incl = cfg.fov_up_deg * kDeg - (static_cast<double>(row) + 0.5) * span / static_cast<double>(height);
  const double c = std::cos(incl);
  return {c * std::cos(az), c * std::sin(az), std::sin(incl)};
}

BinIndex bin_of(const Point3& p, const ProjectionConfig& cfg, std::size_t height, std::size_t width) {
  const double r = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
  const double az = std::atan2(p[1], p[0]);
  auto col = static_cast<std::size_t>(std::floor((az + std::numbers::pi) / (2.0 * std::numbers::pi) *
                                                 static_cast<double>(width)));
  col %= width;
  const double incl = std::asin(std::clamp(p[2] / r, -1.0, 1.0));
  const double span = (cfg.fov_up_deg - cfg.fov_down_deg) * kDeg;
  const double t = std::floor((cfg.fov_up_deg * kDeg - incl) / span * static_cast<double>(height));
  const double clamped = std::clamp(t, 0.0, static_cast<double>(height - 1));
  return {static_cast<std::size_t>(clamped), col};
}

RangeImage project(const PointCloud& pc, const ProjectionConfig& cfg, std::size_t height, std::size_t width) {
  cfg.validate();
  if (height == 0 || width == 0) throw ShapeError("project: image dimensions must be positive");
  std::vector<double> best(height * width, std::numeric_limits<double>::infinity());
  std::size_t kept = 0;
  for (const auto& p : pc.points) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2]))
      throw NumericalError("project: non-finite point coordinate");
    const double r = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    if (r < cfg.r_min || r > cfg.r_max) continue;
    const auto b = bin_of(p, cfg, height, width);
    double& slot = best[b.row * width + b.col];
    if (r < slot) slot = r;
    ++kept;
  }
  if (kept == 0) throw EmptyInputError("project: no points within [r_min, r_max]");
  std::vector<double> values(height * width, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i)
    if (std::isfinite(best[i])) values[i] = normalize_range(best[i], cfg);
  return RangeImage{height, width, 1, num::Tensor::from({height, width, 1}, std::move(values)), cfg};
}

PointCloud unproject(const RangeImage& img) {
  PointCloud pc;
  auto v = img.values.data();
  for (std::size_t row = 0; row < img.height; ++row)
    for (std::size_t col = 0; col < img.width; ++col) {
      const double x = v[(row * img.width + col) * img.channels];
      if (x <= 0.0) continue;
      const double r = denormalize_range(x, img.meta);
      const auto d = ray_direction(img.meta, img.height, img.width, row, col);
      pc.points.push_back({r * d[0], r * d[1], r * d[2]});
    }
  return pc;
}

num::Tensor unproject_pixels(const num::Tensor& image, const ProjectionConfig& cfg,
                             std::span<const std::size_t> pixels) {
  if (image.rank() != 3 || image.dim(2) != 1)
    throw ShapeError("unproject_pixels: expected H x W x 1, got " + num::to_string(image.shape()));
  const std::size_t H = image.dim(0), W = image.dim(1);
  std::vector<double> dirs;
  dirs.reserve(pixels.size() * 3);
  for (auto p : pixels) {
    if (p >= H * W) throw ShapeError("unproject_pixels: pixel index out of range");
    const auto d = ray_direction(cfg, H, W, p / W, p % W);
    dirs.insert(dirs.end(), d.begin(), d.end());
  }
  num::Tensor flat = num::reshape(image, {H * W, 1});
  num::Tensor v = num::gather_rows(flat, pixels);
  num::Tensor r;
  if (cfg.log_scale) {
    const double a = std::log(cfg.r_min);
    const double s = std::log(cfg.r_max) - a;
    r = num::exp(num::add_scalar(num::mul_scalar(v, s), a));
  } else {
    r = num::add_scalar(num::mul_scalar(v, cfg.r_max - cfg.r_min), cfg.r_min);
  }
  const num::Tensor parts[3] = {r, r, r};
  num::Tensor r3 = num::concat(parts, 1);
  return num::mul(r3, num::Tensor::from({pixels.size(), 3}, std::move(dirs)));
}

}  // namespace topolidar::range
