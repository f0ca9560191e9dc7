#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "topolidar/common/error.hpp"
#include "topolidar/num/ops.hpp"
#include "topolidar/range/io.hpp"
#include "topolidar/range/projection.hpp"
#include "topolidar/range/synth.hpp"

using namespace topolidar;
using range::Point3;
using range::PointCloud;
using range::ProjectionConfig;

namespace {

std::size_t nonzero(const range::RangeImage& img) {
  std::size_t n = 0;
  for (double v : img.values.data()) n += v > 0.0;
  return n;
}

std::filesystem::path tmp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "topolidar_unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("point at r_min lands on the first quantisation step at azimuth zero") {
  ProjectionConfig cfg;
  auto img = range::project(PointCloud{{{1.0, 0.0, 0.0}}, {}}, cfg, 64, 1024);
  CHECK(nonzero(img) == 1);
  // column of azimuth 0: floor((0 + pi) / 2pi * W) = W / 2
  std::size_t hits = 0;
  for (std::size_t r = 0; r < 64; ++r)
    if (img.at(r, 512) > 0) {
      CHECK(img.at(r, 512) == range::kRangeQuantum);
      ++hits;
    }
  CHECK(hits == 1);
}

TEST_CASE("point at r_max maps to 1") {
  ProjectionConfig cfg;
  auto img = range::project(PointCloud{{{0.0, 80.0, 0.0}}, {}}, cfg, 16, 64);
  double mx = 0;
  for (double v : img.values.data()) mx = std::max(mx, v);
  CHECK(mx == 1.0);
}

TEST_CASE("nearest return wins a bin") {
  ProjectionConfig cfg;
  PointCloud pc{{{10.0, 0.0, 0.0}, {5.0, 0.0, 0.0}}, {}};
  auto img = range::project(pc, cfg, 16, 64);
  REQUIRE(nonzero(img) == 1);
  for (double v : img.values.data())
    if (v > 0) CHECK(range::denormalize_range(v, cfg) == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("projection filters ranges and rejects empty clouds") {
  ProjectionConfig cfg;
  CHECK_THROWS_AS(range::project(PointCloud{}, cfg, 8, 8), EmptyInputError);
  CHECK_THROWS_AS(range::project(PointCloud{{{0.5, 0.0, 0.0}, {100.0, 0.0, 0.0}}, {}}, cfg, 8, 8), EmptyInputError);
}

TEST_CASE("log normalisation is monotone and invertible") {
  ProjectionConfig cfg;
  double prev = 0;
  for (double r = 1.0; r <= 80.0; r *= 1.07) {
    const double v = range::normalize_range(r, cfg);
    CHECK(v > prev);
    CHECK(range::denormalize_range(v, cfg) == doctest::Approx(r).epsilon(1e-9));
    prev = v;
  }
  ProjectionConfig lin = cfg;
  lin.log_scale = false;
  CHECK(range::normalize_range(40.5, lin) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("unproject edge cases") {
  ProjectionConfig cfg;
  auto empty = range::RangeImage::zeros(4, 8, cfg);
  CHECK(range::unproject(empty).empty());
  auto full = range::RangeImage::zeros(4, 8, cfg);
  for (auto& v : full.values.mutable_data()) v = 1.0;
  auto pc = range::unproject(full);
  CHECK(pc.size() == 32);
  for (const auto& p : pc.points) CHECK(std::hypot(p[0], p[1], p[2]) == doctest::Approx(80.0).epsilon(1e-12));
}

TEST_CASE("project, unproject, project is bit stable") {
  ProjectionConfig cfg;
  range::SceneSpec spec;
  spec.max_boxes = 3;
  spec.max_poles = 2;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto img = range::project(range::synth_scene(seed, spec, cfg, 16, 128), cfg, 16, 128);
    auto again = range::project(range::unproject(img), cfg, 16, 128);
    auto a = img.values.data(), b = again.values.data();
    REQUIRE(a.size() == b.size());
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("scaling ranges never decreases pixel values") {
  ProjectionConfig cfg;
  PointCloud pc;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 200; ++i) {
    Point3 d{u(rng), u(rng), u(rng) * 0.2};
    const double n = std::hypot(d[0], d[1], d[2]);
    const double r = 2.0 + 30.0 * (u(rng) + 1);
    pc.points.push_back({d[0] / n * r, d[1] / n * r, d[2] / n * r});
  }
  auto scaled = pc;
  for (auto& p : scaled.points)
    for (auto& c : p) c *= 1.2;
  auto a = range::project(pc, cfg, 16, 64), b = range::project(scaled, cfg, 16, 64);
  for (std::size_t i = 0; i < a.values.numel(); ++i) CHECK(b.values[i] >= a.values[i]);
}

TEST_CASE("differentiable unprojection agrees with unproject") {
  ProjectionConfig cfg;
  auto img = range::RangeImage::zeros(4, 8, cfg);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (auto& v : img.values.mutable_data()) v = u(rng);
  std::vector<std::size_t> pixels(32);
  for (std::size_t i = 0; i < 32; ++i) pixels[i] = i;
  auto t = range::unproject_pixels(img.values, cfg, pixels);
  auto pc = range::unproject(img);
  REQUIRE(pc.size() == 32);
  for (std::size_t i = 0; i < 32; ++i)
    for (std::size_t c = 0; c < 3; ++c) CHECK(t[i * 3 + c] == doctest::Approx(pc.points[i][c]).epsilon(1e-12));
}

TEST_CASE("kitti bin parsing") {
  std::string two(32, '\0');
  const float rec[8] = {1, 2, 3, 0.5f, 4, 5, 6, 0.25f};
  std::memcpy(two.data(), rec, 32);
  auto pc = range::parse_kitti_bin(two);
  REQUIRE(pc.size() == 2);
  CHECK(pc.points[1][2] == 6.0);
  CHECK(pc.intensity[0] == 0.5);
  CHECK_THROWS_AS(range::parse_kitti_bin(std::string(17, '\0')), FormatError);
  try {
    range::parse_kitti_bin(std::string(17, '\0'));
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("16") != std::string::npos);
  }
  auto path = tmp_file("rt.bin");
  range::write_kitti_bin(path, pc);
  auto back = range::read_kitti_bin(path);
  CHECK(back.points == pc.points);
  CHECK(back.intensity == pc.intensity);
}

TEST_CASE("range image and ply files round trip") {
  ProjectionConfig cfg;
  auto img = range::project(range::synth_scene(2, {}, cfg, 8, 32), cfg, 8, 32);
  auto bytes = range::encode_range_image(img);
  CHECK(bytes.substr(0, 4) == "TLRI");
  auto back = range::decode_range_image(bytes, cfg);
  CHECK(back.height == 8);
  CHECK(std::memcmp(back.values.data().data(), img.values.data().data(), 8 * 32 * sizeof(double)) == 0);
  CHECK_THROWS_AS(range::decode_range_image(bytes.substr(0, 20), cfg), FormatError);

  auto pc = range::unproject(img);
  auto path = tmp_file("rt.ply");
  range::write_ply(path, pc);
  CHECK(range::read_ply(path).points == pc.points);
}

TEST_CASE("ground plane: downward rays hit, upward rays miss") {
  range::Scene scene;
  scene.ground_z = -2.0;
  for (double el = -40; el <= 20; el += 0.5) {
    const double e = el * std::numbers::pi / 180;
    auto hit = range::cast_ray(scene, {std::cos(e), 0.0, std::sin(e)});
    if (el < 0) {
      REQUIRE(hit.has_value());
      CHECK(*hit == doctest::Approx(2.0 / std::sin(-e)).epsilon(1e-9));
    } else {
      CHECK(!hit.has_value());
    }
  }
}

TEST_CASE("a box occludes the ground behind it") {
  range::Scene scene;
  scene.ground_z = -2.0;
  scene.boxes.push_back({{10.0, 0.0, -2.0}, 4.0, 2.0, 1.5, 0.0});
  const double e = -5.0 * std::numbers::pi / 180;
  const Point3 dir{std::cos(e), 0.0, std::sin(e)};
  auto hit = range::cast_ray(scene, dir);
  REQUIRE(hit.has_value());
  // front face x = 8; z at that point is 8 tan(-5 deg) = -0.70, inside [-2, -0.5]
  CHECK(*hit == doctest::Approx(8.0 / std::cos(e)).epsilon(1e-9));
  CHECK(*hit < 2.0 / std::sin(-e));
}

TEST_CASE("synthetic scenes are deterministic") {
  ProjectionConfig cfg;
  range::SceneSpec spec;
  spec.max_boxes = 4;
  spec.max_poles = 4;
  auto a = range::synth_scene(11, spec, cfg, 16, 64), b = range::synth_scene(11, spec, cfg, 16, 64);
  CHECK(a.points == b.points);
  auto c = range::synth_scene(12, spec, cfg, 16, 64);
  CHECK(a.points != c.points);
}

TEST_CASE("projection config validation") {
  ProjectionConfig bad;
  bad.r_min = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  ProjectionConfig fov;
  fov.fov_up_deg = -30;
  CHECK_THROWS_AS(fov.validate(), ConfigError);
}
