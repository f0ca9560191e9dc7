#include "topolidar/metrics/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

#include "topolidar/common/error.hpp"
#include "topolidar/range/io.hpp"

namespace topolidar::metrics {

using range::Point3;
using range::PointCloud;

std::size_t BevGrid::cells() const {
  if (!(extent > 0.0) || !(resolution > 0.0)) throw ConfigError("BEV grid needs positive extent and resolution");
  return static_cast<std::size_t>(std::llround(2.0 * extent / resolution));
}

OccupancyHistogram bev_histogram(std::span<const PointCloud> clouds, const BevGrid& grid) {
  if (clouds.empty()) throw EmptyInputError("bev_histogram: empty scene set");
  const std::size_t n = grid.cells();
  OccupancyHistogram h{grid, std::vector<double>(n * n, 0.0)};
  double total = 0.0;
  for (const auto& pc : clouds)
    for (const auto& p : pc.points) {
      const double fx = std::floor((p[0] + grid.extent) / grid.resolution);
      const double fy = std::floor((p[1] + grid.extent) / grid.resolution);
      if (fx < 0 || fy < 0 || fx >= static_cast<double>(n) || fy >= static_cast<double>(n)) continue;
      h.prob[static_cast<std::size_t>(fx) * n + static_cast<std::size_t>(fy)] += 1.0;
      total += 1.0;
    }
  if (total == 0.0) throw EmptyInputError("bev_histogram: degenerate histogram, every point lies outside the grid");
  for (auto& v : h.prob) v /= total;
  return h;
}

namespace {

double kl_term(double a, double m) { return a > 0.0 ? a * std::log2(a / m) : 0.0; }

}  // namespace

double jsd(const OccupancyHistogram& p, const OccupancyHistogram& q) {
  if (!(p.grid == q.grid) || p.prob.size() != q.prob.size()) throw ConfigError("jsd: histogram grids differ");
  double s = 0.0;
  for (std::size_t i = 0; i < p.prob.size(); ++i) {
    const double a = p.prob[i], b = q.prob[i];
    if (a == 0.0 && b == 0.0) continue;
    // evaluate symmetrically so jsd(p,q) == jsd(q,p) bit for bit
    const double m = 0.5 * (a + b);
    const double ta = kl_term(a, m), tb = kl_term(b, m);
    s += 0.5 * (ta + tb);
  }
  return std::clamp(s, 0.0, 1.0);
}

PointCloud subsample(const PointCloud& pc, std::size_t cap) {
  if (cap == 0 || pc.size() <= cap) return pc;
  PointCloud out;
  out.points.reserve(cap);
  const std::size_t n = pc.size();
  for (std::size_t i = 0; i < cap; ++i) {
    const std::size_t j = static_cast<std::size_t>((static_cast<double>(i) + 0.5) * static_cast<double>(n) / static_cast<double>(cap));
    out.points.push_back(pc.points[std::min(j, n - 1)]);
    if (!pc.intensity.empty()) out.intensity.push_back(pc.intensity[std::min(j, n - 1)]);
  }
  return out;
}

namespace {

double sq(const Point3& a, const Point3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

// mean over a of the squared distance to the nearest point of b; b sorted by x
double directed(const std::vector<Point3>& a, const std::vector<Point3>& b) {
  double acc = 0.0;
  for (const auto& p : a) {
    auto it = std::lower_bound(b.begin(), b.end(), p[0], [](const Point3& q, double x) { return q[0] < x; });
    double best = std::numeric_limits<double>::infinity();
    for (auto r = it; r != b.end(); ++r) {
      const double dx = (*r)[0] - p[0];
      if (dx * dx >= best) break;
      best = std::min(best, sq(p, *r));
    }
    for (auto l = it; l != b.begin();) {
      --l;
      const double dx = p[0] - (*l)[0];
      if (dx * dx >= best) break;
      best = std::min(best, sq(p, *l));
    }
    acc += best;
  }
  return acc / static_cast<double>(a.size());
}

std::vector<Point3> sorted_points(const PointCloud& pc) {
  auto pts = pc.points;
  std::sort(pts.begin(), pts.end());
  return pts;
}

}  // namespace

double chamfer_squared(const PointCloud& a, const PointCloud& b) {
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) throw EmptyInputError("chamfer distance between an empty and a non-empty cloud");
  return directed(a.points, sorted_points(b)) + directed(b.points, sorted_points(a));
}

double mmd(std::span<const PointCloud> gen, std::span<const PointCloud> ref, const MmdOptions& opts) {
  if (gen.empty() || ref.empty()) throw EmptyInputError("mmd: both scene sets must be non-empty");
  std::vector<double> best(ref.size(), std::numeric_limits<double>::infinity());

  std::function<double(std::size_t, std::size_t)> dist;
  std::vector<std::vector<Point3>> gs, rs, gsorted, rsorted;
  std::vector<OccupancyHistogram> gh, rh;
  if (opts.distance == MmdDistance::Chamfer) {
    auto prep = [&](std::span<const PointCloud> set, auto& raw, auto& sorted) {
      for (const auto& pc : set) {
        auto s = subsample(pc, opts.cap);
        raw.push_back(s.points);
        sorted.push_back(sorted_points(s));
      }
    };
    prep(gen, gs, gsorted);
    prep(ref, rs, rsorted);
    dist = [&](std::size_t r, std::size_t g) {
      if (rs[r].empty() && gs[g].empty()) return 0.0;
      if (rs[r].empty() || gs[g].empty()) return std::numeric_limits<double>::infinity();
      return directed(rs[r], gsorted[g]) + directed(gs[g], rsorted[r]);
    };
  } else {
    for (const auto& pc : gen) gh.push_back(bev_histogram(std::span(&pc, 1), opts.grid));
    for (const auto& pc : ref) rh.push_back(bev_histogram(std::span(&pc, 1), opts.grid));
    dist = [&](std::size_t r, std::size_t g) {
      double s = 0.0;
      for (std::size_t i = 0; i < rh[r].prob.size(); ++i) {
        const double d = rh[r].prob[i] - gh[g].prob[i];
        s += d * d;
      }
      return std::sqrt(s);
    };
  }

  auto work = [&](std::size_t r) {
    for (std::size_t g = 0; g < gen.size(); ++g) best[r] = std::min(best[r], dist(r, g));
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(opts.workers, ref.size()));
  if (workers == 1) {
    for (std::size_t r = 0; r < ref.size(); ++r) work(r);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t r = w; r < ref.size(); r += workers) work(r);
      });
    for (auto& t : pool) t.join();
  }
  double s = 0.0;
  for (double b : best) s += b;
  return s / static_cast<double>(ref.size());
}

FeatureStats feature_stats(const std::vector<std::vector<double>>& features) {
  if (features.empty()) throw EmptyInputError("feature statistics of an empty set");
  const std::size_t f = features.front().size();
  const std::size_t n = features.size();
  FeatureStats s{std::vector<double>(f, 0.0), std::vector<double>(f * f, 0.0)};
  for (const auto& v : features) {
    if (v.size() != f) throw ShapeError("feature vectors differ in length");
    for (std::size_t i = 0; i < f; ++i) s.mean[i] += v[i];
  }
  for (auto& m : s.mean) m /= static_cast<double>(n);
  if (n < 2) return s;
  for (const auto& v : features)
    for (std::size_t i = 0; i < f; ++i)
      for (std::size_t j = i; j < f; ++j) s.cov[i * f + j] += (v[i] - s.mean[i]) * (v[j] - s.mean[j]);
  for (std::size_t i = 0; i < f; ++i)
    for (std::size_t j = i; j < f; ++j) {
      s.cov[i * f + j] /= static_cast<double>(n - 1);
      s.cov[j * f + i] = s.cov[i * f + j];
    }
  return s;
}

double frechet_distance(const FeatureStats& a, const FeatureStats& b) {
  const std::size_t f = a.dim();
  if (b.dim() != f || a.cov.size() != f * f || b.cov.size() != f * f)
    throw ShapeError("frechet_distance: feature dimensions differ");
  for (const auto* s : {&a, &b}) {
    for (double v : s->mean)
      if (!std::isfinite(v)) throw NumericalError("frechet_distance: non-finite mean");
    for (double v : s->cov)
      if (!std::isfinite(v)) throw NumericalError("frechet_distance: non-finite covariance");
  }
  using Mat = Eigen::MatrixXd;
  Mat sa = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(a.cov.data(), f, f);
  Mat sb = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(b.cov.data(), f, f);
  sa = 0.5 * (sa + sa.transpose());
  sb = 0.5 * (sb + sb.transpose());

  // tr (Sa Sb)^{1/2} = tr (Sa^{1/2} Sb Sa^{1/2})^{1/2}, both factors symmetric PSD
  Eigen::SelfAdjointEigenSolver<Mat> ea(sa);
  Eigen::VectorXd la = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Mat root_a = ea.eigenvectors() * la.asDiagonal() * ea.eigenvectors().transpose();
  Mat m = root_a * sb * root_a;
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> em(m, Eigen::EigenvaluesOnly);
  const double tr_root = em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  double d2 = 0.0;
  for (std::size_t i = 0; i < f; ++i) d2 += (a.mean[i] - b.mean[i]) * (a.mean[i] - b.mean[i]);
  const double out = d2 + sa.trace() + sb.trace() - 2.0 * tr_root;
  if (!std::isfinite(out)) throw NumericalError("frechet_distance: non-finite result");
  return std::max(out, 0.0);
}

std::size_t handcrafted_feature_dim(std::size_t height) { return height + 16 + 4 + 5; }

std::vector<double> handcrafted_features(const range::RangeImage& img) {
  const std::size_t h = img.height, w = img.width, c = img.channels;
  std::vector<double> out;
  out.reserve(handcrafted_feature_dim(h));
  auto v = [&](std::size_t r, std::size_t col) { return img.values.data()[(r * w + col) * c]; };

  for (std::size_t r = 0; r < h; ++r) {
    std::size_t occ = 0;
    for (std::size_t col = 0; col < w; ++col) occ += v(r, col) > 0.0;
    out.push_back(static_cast<double>(occ) / static_cast<double>(w));
  }

  std::vector<double> hist(16, 0.0);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t col = 0; col < w; ++col) {
      const double x = std::clamp(v(r, col), 0.0, 1.0);
      hist[std::min<std::size_t>(15, static_cast<std::size_t>(x * 16.0))] += 1.0;
    }
  for (double x : hist) out.push_back(x / static_cast<double>(h * w));

  for (std::size_t band = 0; band < 4; ++band) {
    const std::size_t r0 = band * h / 4, r1 = (band + 1) * h / 4;
    double e = 0.0;
    std::size_t cnt = 0;
    for (std::size_t r = r0; r < r1; ++r)
      for (std::size_t col = 0; col < w; ++col) {
        const double d = v(r, (col + 1) % w) - v(r, col);
        e += d * d;
        ++cnt;
      }
    out.push_back(cnt ? e / static_cast<double>(cnt) : 0.0);
  }

  const auto pc = range::unproject(img);
  double mx = 0, my = 0, vx = 0, vy = 0, cxy = 0;
  if (!pc.empty()) {
    const double s = 1.0 / img.meta.r_max;
    for (const auto& p : pc.points) {
      mx += p[0] * s;
      my += p[1] * s;
    }
    mx /= static_cast<double>(pc.size());
    my /= static_cast<double>(pc.size());
    for (const auto& p : pc.points) {
      const double dx = p[0] * s - mx, dy = p[1] * s - my;
      vx += dx * dx;
      vy += dy * dy;
      cxy += dx * dy;
    }
    vx /= static_cast<double>(pc.size());
    vy /= static_cast<double>(pc.size());
    cxy /= static_cast<double>(pc.size());
  }
  for (double x : {mx, my, vx, vy, cxy}) out.push_back(x);
  return out;
}

EvalReport evaluate(std::span<const range::RangeImage> gen, std::span<const range::RangeImage> ref,
                    const MmdOptions& opts, const std::string& config_hash) {
  if (gen.empty() || ref.empty()) throw EmptyInputError("evaluate: both scene sets must be non-empty");
  std::vector<PointCloud> gc, rc;
  std::vector<std::vector<double>> gf, rf;
  for (const auto& im : gen) {
    gc.push_back(range::unproject(im));
    gf.push_back(handcrafted_features(im));
  }
  for (const auto& im : ref) {
    rc.push_back(range::unproject(im));
    rf.push_back(handcrafted_features(im));
  }
  EvalReport rep;
  rep.gen_hist = bev_histogram(gc, opts.grid);
  rep.ref_hist = bev_histogram(rc, opts.grid);
  const std::size_t ng = gen.size(), nr = ref.size();
  rep.rows.push_back({"JSD", jsd(rep.gen_hist, rep.ref_hist), ng, nr, config_hash});
  rep.rows.push_back({"MMD", mmd(gc, rc, opts), ng, nr, config_hash});
  rep.rows.push_back({"FRID-H", frechet_distance(feature_stats(gf), feature_stats(rf)), ng, nr, config_hash});
  return rep;
}

std::string report_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  os << "metric,value,n_gen,n_ref,config_hash\n" << std::setprecision(17);
  for (const auto& r : rows) os << r.metric << ',' << r.value << ',' << r.n_gen << ',' << r.n_ref << ',' << r.config_hash << '\n';
  return os.str();
}

void write_report_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << report_csv(rows);
  if (!f) throw IoError("failed writing " + path.string());
}

void write_histogram(const std::filesystem::path& path, const OccupancyHistogram& h) {
  const std::size_t n = h.grid.cells();
  range::RangeImage img;
  img.height = n;
  img.width = n;
  img.channels = 1;
  img.values = num::Tensor::from({n, n, 1}, h.prob);
  range::write_range_image(path, img);
}

}  // namespace topolidar::metrics
