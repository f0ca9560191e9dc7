#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "topolidar/range/point_cloud.hpp"
#include "topolidar/range/projection.hpp"

namespace topolidar::metrics {

struct BevGrid {
  double extent = 40.0;     // cells cover [-extent, extent]^2 metres
  double resolution = 0.5;  // cell edge in metres

  std::size_t cells() const;  // per axis
  bool operator==(const BevGrid&) const = default;
};

struct OccupancyHistogram {
  BevGrid grid;
  std::vector<double> prob;  // cells x cells, row = x cell, col = y cell
};

/// Point counts over all clouds in x-y cells, normalised to sum 1. Points
/// outside the extent are dropped; EmptyInputError if none are left.
OccupancyHistogram bev_histogram(std::span<const range::PointCloud> clouds, const BevGrid& grid = {});

/// Jensen-Shannon divergence in bits; ConfigError on grid mismatch.
double jsd(const OccupancyHistogram& p, const OccupancyHistogram& q);

/// Deterministic stride subsample to at most `cap` points.
range::PointCloud subsample(const range::PointCloud& pc, std::size_t cap);

/// Mean squared nearest-neighbour distance a->b plus b->a. A single pair of
/// points at distance d gives 2 d^2.
double chamfer_squared(const range::PointCloud& a, const range::PointCloud& b);

enum class MmdDistance { Chamfer, BevL2 };

struct MmdOptions {
  MmdDistance distance = MmdDistance::Chamfer;
  std::size_t cap = 2048;
  std::size_t workers = 1;
  BevGrid grid;
};

/// For each reference scene, the smallest distance to any generated scene,
/// averaged over references.
double mmd(std::span<const range::PointCloud> gen, std::span<const range::PointCloud> ref, const MmdOptions& opts = {});

struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> cov;  // F x F row-major
  std::size_t dim() const { return mean.size(); }
};

/// Sample mean and unbiased covariance (zero covariance for one sample).
FeatureStats feature_stats(const std::vector<std::vector<double>>& features);

/// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^{1/2}).
double frechet_distance(const FeatureStats& a, const FeatureStats& b);

/// Per-row occupancy (H), normalised-range histogram (16 bins, zeros fall in
/// bin 0), horizontal gradient energy in 4 row bands, BEV moments of the
/// unprojected points (5: mean x, mean y, var x, var y, cov xy in units of
/// r_max). F = H + 25.
std::vector<double> handcrafted_features(const range::RangeImage& img);
std::size_t handcrafted_feature_dim(std::size_t height);

struct MetricRow {
  std::string metric;
  double value = 0.0;
  std::size_t n_gen = 0;
  std::size_t n_ref = 0;
  std::string config_hash;
};

struct EvalReport {
  std::vector<MetricRow> rows;
  OccupancyHistogram gen_hist;
  OccupancyHistogram ref_hist;
};

/// JSD, MMD and FRID-H between a generated and a reference set.
EvalReport evaluate(std::span<const range::RangeImage> gen, std::span<const range::RangeImage> ref,
                    const MmdOptions& opts = {}, const std::string& config_hash = "");

std::string report_csv(const std::vector<MetricRow>& rows);
void write_report_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);
/// Histogram as a cells x cells x 1 range-image file.
void write_histogram(const std::filesystem::path& path, const OccupancyHistogram& h);

}  // namespace topolidar::metrics
