#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "topolidar/common/error.hpp"
#include "topolidar/metrics/metrics.hpp"
#include "topolidar/range/projection.hpp"
#include "topolidar/range/synth.hpp"

using namespace topolidar;
using metrics::BevGrid;
using metrics::OccupancyHistogram;
using range::PointCloud;

namespace {

PointCloud cloud(std::initializer_list<std::array<double, 3>> pts) {
  PointCloud pc;
  for (const auto& p : pts) pc.points.push_back({p[0], p[1], p[2]});
  return pc;
}

PointCloud random_cloud(std::size_t n, unsigned seed, double scale = 20.0) {
  std::mt19937_64 r(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  PointCloud pc;
  for (std::size_t i = 0; i < n; ++i) pc.points.push_back({u(r), u(r), u(r) * 0.1});
  return pc;
}

OccupancyHistogram two_cell(double a, double b) {
  OccupancyHistogram h;
  h.grid = {0.5, 0.5};  // 2 x 2 cells
  h.prob = {a, b, 0.0, 0.0};
  return h;
}

std::vector<range::RangeImage> synth_images(std::size_t n, bool boxes, std::uint64_t base) {
  range::ProjectionConfig cfg;
  range::SceneSpec spec;
  if (boxes) {
    spec.min_boxes = 1;
    spec.max_boxes = 4;
  }
  std::vector<range::RangeImage> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(range::project(range::synth_scene(base + i, spec, cfg, 16, 128), cfg, 16, 128));
  return out;
}

}  // namespace

TEST_CASE("bev histogram of a single point at the origin") {
  std::vector<PointCloud> s{cloud({{0.1, 0.1, 0.0}})};
  auto h = metrics::bev_histogram(s);
  CHECK(h.grid.cells() == 160);
  double total = 0.0;
  std::size_t nonzero = 0;
  for (double p : h.prob) {
    total += p;
    if (p != 0.0) {
      ++nonzero;
      CHECK(p == 1.0);
    }
  }
  CHECK(nonzero == 1);
  CHECK(total == 1.0);
  std::vector<PointCloud> far{cloud({{100.0, 0.0, 0.0}})};
  CHECK_THROWS_AS(metrics::bev_histogram(far), EmptyInputError);
  CHECK_THROWS_AS(metrics::bev_histogram(std::span<const PointCloud>{}), EmptyInputError);
}

TEST_CASE("uniform disk mass is symmetric across quadrants") {
  std::mt19937_64 r(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PointCloud pc;
  for (int i = 0; i < 10000; ++i) {
    const double rad = 30.0 * std::sqrt(u(r)), th = 2 * std::numbers::pi * u(r);
    pc.points.push_back({rad * std::cos(th), rad * std::sin(th), 0.0});
  }
  std::vector<PointCloud> s{pc};
  auto h = metrics::bev_histogram(s);
  const std::size_t n = h.grid.cells(), half = n / 2;
  double q[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) q[(i >= half ? 2 : 0) + (j >= half ? 1 : 0)] += h.prob[i * n + j];
  for (double m : q) CHECK(m == doctest::Approx(0.25).epsilon(0.05));
  auto again = metrics::bev_histogram(s);
  CHECK(again.prob == h.prob);
}

TEST_CASE("jsd closed forms") {
  auto p = two_cell(1.0, 0.0), q = two_cell(0.5, 0.5);
  // m = (3/4, 1/4): KL(p|m) = log2(4/3), KL(q|m) = 1/2 log2(2/3) + 1/2 log2(2)
  const double expect = 0.5 * std::log2(4.0 / 3.0) + 0.5 * (0.5 * std::log2(0.5 / 0.75) + 0.5 * std::log2(0.5 / 0.25));
  CHECK(metrics::jsd(p, q) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(metrics::jsd(p, q) == doctest::Approx(0.3113).epsilon(1e-3));
  CHECK(metrics::jsd(p, q) == metrics::jsd(q, p));
  CHECK(metrics::jsd(p, p) == 0.0);
  CHECK(metrics::jsd(two_cell(1, 0), two_cell(0, 1)) == 1.0);
  auto other = q;
  other.grid.resolution = 0.25;
  other.prob.assign(16, 1.0 / 16);
  CHECK_THROWS_AS(metrics::jsd(p, other), ConfigError);
}

TEST_CASE("jsd of random histograms is symmetric and bounded") {
  std::mt19937_64 r(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    std::vector<PointCloud> a{random_cloud(300, 10 + k)}, b{random_cloud(300, 100 + k)};
    auto ha = metrics::bev_histogram(a), hb = metrics::bev_histogram(b);
    const double x = metrics::jsd(ha, hb);
    CHECK(x == metrics::jsd(hb, ha));
    CHECK(x >= 0.0);
    CHECK(x <= 1.0);
  }
}

TEST_CASE("chamfer convention and subsampling") {
  const double d = 0.7;
  CHECK(metrics::chamfer_squared(cloud({{0, 0, 0}}), cloud({{d, 0, 0}})) == doctest::Approx(2 * d * d).epsilon(1e-15));
  auto a = random_cloud(500, 1), b = random_cloud(400, 2);
  // brute-force oracle
  auto one_way = [](const PointCloud& x, const PointCloud& y) {
    double s = 0.0;
    for (const auto& p : x.points) {
      double best = INFINITY;
      for (const auto& q : y.points) {
        const double dx = p[0] - q[0], dy = p[1] - q[1], dz = p[2] - q[2];
        best = std::min(best, dx * dx + dy * dy + dz * dz);
      }
      s += best;
    }
    return s / static_cast<double>(x.size());
  };
  CHECK(metrics::chamfer_squared(a, b) == doctest::Approx(one_way(a, b) + one_way(b, a)).epsilon(1e-12));
  CHECK(metrics::chamfer_squared(a, a) == 0.0);
  CHECK(metrics::subsample(a, 100).size() == 100);
  CHECK(metrics::subsample(a, 2048).size() == 500);
}

TEST_CASE("mmd identities") {
  std::vector<PointCloud> ref{random_cloud(200, 1), random_cloud(150, 2), random_cloud(180, 3)};
  CHECK(metrics::mmd(ref, ref) == 0.0);

  std::vector<PointCloud> gen{random_cloud(200, 11), random_cloud(200, 12)};
  const double base = metrics::mmd(gen, ref);
  CHECK(base > 0.0);
  auto more = gen;
  more.push_back(ref[1]);
  CHECK(metrics::mmd(more, ref) <= base);

  std::vector<PointCloud> rg{gen[1], gen[0]}, rr{ref[2], ref[0], ref[1]};
  CHECK(metrics::mmd(rg, rr) == doctest::Approx(base).epsilon(1e-14));

  metrics::MmdOptions par;
  par.workers = 3;
  CHECK(metrics::mmd(gen, ref, par) == base);

  metrics::MmdOptions bev;
  bev.distance = metrics::MmdDistance::BevL2;
  CHECK(metrics::mmd(ref, ref, bev) == 0.0);
  CHECK(metrics::mmd(gen, ref, bev) > 0.0);

  CHECK_THROWS_AS(metrics::mmd(std::span<const PointCloud>{}, ref), EmptyInputError);
  CHECK_THROWS_AS(metrics::mmd(gen, std::span<const PointCloud>{}), EmptyInputError);
}

TEST_CASE("frechet distance closed forms") {
  metrics::FeatureStats a{{1.0, 2.0, 3.0}, {1, 0, 0, 0, 1, 0, 0, 0, 1}};
  metrics::FeatureStats b{{0.0, 0.0, 1.0}, {1, 0, 0, 0, 1, 0, 0, 0, 1}};
  CHECK(metrics::frechet_distance(a, b) == doctest::Approx(1 + 4 + 4).epsilon(1e-12));
  CHECK(std::abs(metrics::frechet_distance(a, a)) < 1e-12);

  metrics::FeatureStats c{{0, 0, 0}, {4, 0, 0, 0, 4, 0, 0, 0, 4}};
  metrics::FeatureStats d{{0, 0, 0}, {1, 0, 0, 0, 1, 0, 0, 0, 1}};
  CHECK(metrics::frechet_distance(c, d) == doctest::Approx(3.0).epsilon(1e-12));

  std::mt19937_64 r(8);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<std::vector<double>> fa, fb;
  for (int i = 0; i < 40; ++i) {
    fa.push_back({n(r), n(r), n(r), n(r)});
    fb.push_back({2 * n(r), n(r) + 1, n(r), 0.5 * n(r)});
  }
  auto sa = metrics::feature_stats(fa), sb = metrics::feature_stats(fb);
  CHECK(std::abs(metrics::frechet_distance(sa, sa)) < 1e-9);
  CHECK(metrics::frechet_distance(sa, sb) == doctest::Approx(metrics::frechet_distance(sb, sa)).epsilon(1e-9));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(sa.cov[i * 4 + j] == sa.cov[j * 4 + i]);

  auto one = metrics::feature_stats({{1.0, 2.0}});
  CHECK(one.cov == std::vector<double>(4, 0.0));
  auto bad = a;
  bad.mean[0] = NAN;
  CHECK_THROWS_AS(metrics::frechet_distance(bad, b), NumericalError);
}

TEST_CASE("handcrafted features on a zero image") {
  range::ProjectionConfig cfg;
  range::RangeImage img;
  img.height = 16;
  img.width = 128;
  img.channels = 1;
  img.values = num::Tensor::zeros({16, 128, 1});
  img.meta = cfg;
  auto f = metrics::handcrafted_features(img);
  REQUIRE(f.size() == metrics::handcrafted_feature_dim(16));
  CHECK(f.size() == 41);
  for (std::size_t r = 0; r < 16; ++r) CHECK(f[r] == 0.0);
  CHECK(f[16] == 1.0);
  for (std::size_t b = 17; b < 32; ++b) CHECK(f[b] == 0.0);
  CHECK(metrics::handcrafted_features(img) == f);
}

TEST_CASE("handcrafted features separate ground-only from ground-with-boxes scenes") {
  auto plain = synth_images(100, false, 1000), boxes = synth_images(100, true, 5000);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (const auto& im : plain) {
    x.push_back(metrics::handcrafted_features(im));
    y.push_back(-1);
  }
  for (const auto& im : boxes) {
    x.push_back(metrics::handcrafted_features(im));
    y.push_back(1);
  }
  // standardise then run a perceptron; it stops making mistakes only if the
  // classes are linearly separable
  const std::size_t f = x[0].size();
  for (std::size_t j = 0; j < f; ++j) {
    double m = 0, s = 0;
    for (const auto& v : x) m += v[j];
    m /= x.size();
    for (const auto& v : x) s += (v[j] - m) * (v[j] - m);
    s = std::sqrt(s / x.size());
    for (auto& v : x) v[j] = s > 0 ? (v[j] - m) / s : 0.0;
  }
  std::vector<double> w(f, 0.0);
  double bias = 0.0;
  bool separated = false;
  for (int epoch = 0; epoch < 5000 && !separated; ++epoch) {
    separated = true;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double a = bias;
      for (std::size_t j = 0; j < f; ++j) a += w[j] * x[i][j];
      if (y[i] * a <= 0) {
        separated = false;
        for (std::size_t j = 0; j < f; ++j) w[j] += y[i] * x[i][j];
        bias += y[i];
      }
    }
  }
  CHECK(separated);
}

TEST_CASE("evaluate emits the three rows and a stable schema") {
  auto gen = synth_images(6, true, 10), ref = synth_images(8, false, 20);
  auto rep = metrics::evaluate(gen, ref, {}, "abc");
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.rows[0].metric == "JSD");
  CHECK(rep.rows[1].metric == "MMD");
  CHECK(rep.rows[2].metric == "FRID-H");
  for (const auto& r : rep.rows) {
    CHECK(r.value > 0.0);
    CHECK(r.n_gen == 6);
    CHECK(r.n_ref == 8);
  }
  const auto csv = metrics::report_csv(rep.rows);
  CHECK(csv.rfind("metric,value,n_gen,n_ref,config_hash\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv == metrics::report_csv(metrics::evaluate(gen, ref, {}, "abc").rows));

  auto self = metrics::evaluate(ref, ref);
  for (const auto& r : self.rows) CHECK(std::abs(r.value) < 1e-9);
  CHECK(self.rows[0].value == 0.0);
  CHECK(self.rows[1].value == 0.0);
}
