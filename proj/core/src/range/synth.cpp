#include "topolidar/range/synth.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "topolidar/common/rng.hpp"

namespace topolidar::range {

namespace {

double draw(Rng& rng, Interval iv) { return std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng); }

std::size_t draw_count(Rng& rng, std::size_t lo, std::size_t hi) {
  if (hi <= lo) return lo;
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

constexpr double kEps = 1e-12;

std::optional<double> hit_box(const Box& b, const Point3& d) {
  // Ray in the box frame: rotate by -yaw about z around the base centre.
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double ox = -b.center[0], oy = -b.center[1], oz = -b.center[2];
  const Point3 o{c * ox + s * oy, -s * ox + c * oy, oz};
  const Point3 v{c * d[0] + s * d[1], -s * d[0] + c * d[1], d[2]};
  const double lo[3] = {-b.length / 2, -b.width / 2, 0.0};
  const double hi[3] = {b.length / 2, b.width / 2, b.height};
  double tn = -std::numeric_limits<double>::infinity();
  double tf = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::fabs(v[a]) < kEps) {
      if (o[a] < lo[a] || o[a] > hi[a]) return std::nullopt;
      continue;
    }
    double t1 = (lo[a] - o[a]) / v[a], t2 = (hi[a] - o[a]) / v[a];
    if (t1 > t2) std::swap(t1, t2);
    tn = std::max(tn, t1);
    tf = std::min(tf, t2);
  }
  if (tn > tf || tf <= 0.0) return std::nullopt;
  return tn > 0.0 ? tn : tf;
}

std::optional<double> hit_pole(const Pole& p, double ground_z, const Point3& d) {
  std::optional<double> best;
  const double a = d[0] * d[0] + d[1] * d[1];
  if (a > kEps) {
    // |t*d_xy - c|^2 = r^2
    const double bq = -2.0 * (d[0] * p.x + d[1] * p.y);
    const double cq = p.x * p.x + p.y * p.y - p.radius * p.radius;
    const double disc = bq * bq - 4.0 * a * cq;
    if (disc >= 0.0) {
      const double t = (-bq - std::sqrt(disc)) / (2.0 * a);
      const double z = t * d[2];
      if (t > 0.0 && z >= ground_z && z <= ground_z + p.height) best = t;
    }
  }
  if (std::fabs(d[2]) > kEps) {
    const double t = (ground_z + p.height) / d[2];
    if (t > 0.0) {
      const double x = t * d[0] - p.x, y = t * d[1] - p.y;
      if (x * x + y * y <= p.radius * p.radius && (!best || t < *best)) best = t;
    }
  }
  return best;
}

}  // namespace

Scene sample_scene(std::uint64_t seed, const SceneSpec& spec) {
  Rng rng = make_stream(seed, "synth-scene");
  Scene scene;
  scene.ground_z = spec.ground_z;
  const double base = spec.ground_z.value_or(-2.0);
  const std::size_t nb = draw_count(rng, spec.min_boxes, spec.max_boxes);
  for (std::size_t i = 0; i < nb; ++i) {
    const double az = draw(rng, {-std::numbers::pi, std::numbers::pi});
    const double dist = draw(rng, spec.box_distance);
    Box b{};
    b.center = {dist * std::cos(az), dist * std::sin(az), base};
    b.length = draw(rng, spec.box_length);
    b.width = draw(rng, spec.box_width);
    b.height = draw(rng, spec.box_height);
    b.yaw = draw(rng, {-std::numbers::pi, std::numbers::pi});
    scene.boxes.push_back(b);
  }
  const std::size_t np = draw_count(rng, spec.min_poles, spec.max_poles);
  for (std::size_t i = 0; i < np; ++i) {
    const double az = draw(rng, {-std::numbers::pi, std::numbers::pi});
    const double dist = draw(rng, spec.pole_distance);
    scene.poles.push_back({dist * std::cos(az), dist * std::sin(az), draw(rng, spec.pole_radius),
                           draw(rng, spec.pole_height)});
  }
  return scene;
}

std::optional<double> cast_ray(const Scene& scene, const Point3& dir) {
  std::optional<double> best;
  auto consider = [&](std::optional<double> t) {
    if (t && *t > 0.0 && (!best || *t < *best)) best = t;
  };
  if (scene.ground_z && dir[2] < -kEps) consider(*scene.ground_z / dir[2]);
  for (const auto& b : scene.boxes) consider(hit_box(b, dir));
  const double base = scene.ground_z.value_or(-2.0);
  for (const auto& p : scene.poles) consider(hit_pole(p, base, dir));
  return best;
}

PointCloud render_scene(const Scene& scene, const ProjectionConfig& cfg, std::size_t height, std::size_t width) {
  PointCloud pc;
  for (std::size_t row = 0; row < height; ++row)
    for (std::size_t col = 0; col < width; ++col) {
      const auto d = ray_direction(cfg, height, width, row, col);
      const auto t = cast_ray(scene, d);
      if (!t || *t < cfg.r_min || *t > cfg.r_max) continue;
      pc.points.push_back({*t * d[0], *t * d[1], *t * d[2]});
      pc.intensity.push_back(0.0);
    }
  return pc;
}

PointCloud synth_scene(std::uint64_t seed, const SceneSpec& spec, const ProjectionConfig& cfg, std::size_t height,
                       std::size_t width) {
  return render_scene(sample_scene(seed, spec), cfg, height, width);
}

}  // namespace topolidar::range
