#pragma once

#include <cstddef>
#include <span>

#include "topolidar/num/tensor.hpp"
#include "topolidar/range/point_cloud.hpp"

namespace topolidar::range {

struct ProjectionConfig {
  double fov_down_deg = -25.0;
  double fov_up_deg = 3.0;
  double r_min = 1.0;
  double r_max = 80.0;
  bool log_scale = true;

  void validate() const;  // ConfigError on violated bounds
};

/// H x W x C grid of normalized ranges in [0, 1]; 0 marks "no return".
struct RangeImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  num::Tensor values;  // H x W x C
  ProjectionConfig meta;

  static RangeImage zeros(std::size_t h, std::size_t w, const ProjectionConfig& cfg, std::size_t c = 1);
  double at(std::size_t row, std::size_t col, std::size_t ch = 0) const {
    return values.data()[(row * width + col) * channels + ch];
  }
};

/// Normalized values are stored on a 2^-36 grid; the first grid step is the
/// value used for a return at exactly r_min.
inline constexpr double kRangeQuantum = 1.0 / 68719476736.0;

double normalize_range(double r, const ProjectionConfig& cfg);
double denormalize_range(double v, const ProjectionConfig& cfg);

/// Unit vector through the centre of bin (row, col).
Point3 ray_direction(const ProjectionConfig& cfg, std::size_t height, std::size_t width, std::size_t row,
                     std::size_t col);

struct BinIndex {
  std::size_t row;
  std::size_t col;
};

/// Bin of a direction. Columns bin atan2(y, x) uniformly over [-pi, pi);
/// rows bin asin(z / r) over the vertical field of view, row 0 at the top.
/// Inclinations outside the field of view clamp to the first/last row.
BinIndex bin_of(const Point3& p, const ProjectionConfig& cfg, std::size_t height, std::size_t width);

/// Spherical projection keeping the nearest return per bin. Points outside
/// [r_min, r_max] are filtered; EmptyInputError if nothing remains.
RangeImage project(const PointCloud& pc, const ProjectionConfig& cfg, std::size_t height, std::size_t width);

/// One point per nonzero pixel (channel 0), on its bin-centre ray.
PointCloud unproject(const RangeImage& img);

/// Differentiable counterpart of unproject for selected pixels of a
/// single-channel H x W x 1 image: returns an S x 3 tensor whose rows are
/// denormalize(value) * ray_direction. `pixels` index row-major into H x W.
num::Tensor unproject_pixels(const num::Tensor& image, const ProjectionConfig& cfg, std::span<const std::size_t> pixels);

}  // namespace topolidar::range
