#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "topolidar/range/point_cloud.hpp"
#include "topolidar/range/projection.hpp"

namespace topolidar::range {

struct Interval {
  double lo;
  double hi;
};

/// Primitive inventory and pose ranges for a synthetic street scene. The
/// sensor sits at the origin; all objects stand on the ground plane.
struct SceneSpec {
  std::optional<double> ground_z = -2.0;  // nullopt: no ground plane

  std::size_t min_boxes = 0;
  std::size_t max_boxes = 0;
  Interval box_length{3.6, 4.8};
  Interval box_width{1.6, 2.0};
  Interval box_height{1.4, 1.8};
  Interval box_distance{5.0, 30.0};

  std::size_t min_poles = 0;
  std::size_t max_poles = 0;
  Interval pole_radius{0.1, 0.3};
  Interval pole_height{3.0, 8.0};
  Interval pole_distance{3.0, 30.0};
};

struct Box {
  Point3 center;  // base centre at ground level
  double length, width, height, yaw;
};

struct Pole {
  double x, y, radius, height;
};

struct Scene {
  std::optional<double> ground_z;
  std::vector<Box> boxes;
  std::vector<Pole> poles;
};

/// Draws primitive poses; deterministic in `seed`.
Scene sample_scene(std::uint64_t seed, const SceneSpec& spec);

/// Distance along a unit ray from the origin to the nearest surface, if any.
std::optional<double> cast_ray(const Scene& scene, const Point3& dir);

/// Casts the H x W bin-centre ray grid against the scene and keeps the
/// nearest hit per ray that falls within [r_min, r_max].
PointCloud render_scene(const Scene& scene, const ProjectionConfig& cfg, std::size_t height, std::size_t width);

PointCloud synth_scene(std::uint64_t seed, const SceneSpec& spec, const ProjectionConfig& cfg, std::size_t height,
                       std::size_t width);

}  // namespace topolidar::range
