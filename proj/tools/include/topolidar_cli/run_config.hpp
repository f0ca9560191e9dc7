#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "topolidar/ldm/denoiser.hpp"
#include "topolidar/ldm/schedule.hpp"
#include "topolidar/metrics/metrics.hpp"
#include "topolidar/range/projection.hpp"
#include "topolidar/range/synth.hpp"
#include "topolidar/vae/loss.hpp"
#include "topolidar/vae/model.hpp"

namespace topolidar::cli {

/// Flat `key = value` run configuration. Lines starting with '#' are
/// comments. Every key has a typed default; unknown keys and values that
/// do not parse are ConfigErrors.
class RunConfig {
 public:
  RunConfig();

  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);

  void set(std::string_view key, std::string_view value);
  const std::string& raw(std::string_view key) const;

  std::string get_string(std::string_view key) const;
  double get_double(std::string_view key) const;
  std::size_t get_size(std::string_view key) const;
  std::uint64_t get_u64(std::string_view key) const;
  bool get_bool(std::string_view key) const;
  std::vector<std::size_t> get_sizes(std::string_view key) const;

  /// Canonical "key=value" listing of every key, sorted.
  std::string canonical() const;
  /// 16 hex digits of FNV-1a over canonical().
  std::string hash() const;

  static const std::vector<std::string>& keys();

  range::ProjectionConfig projection() const;
  vae::VaeConfig vae() const;
  vae::LossWeights loss_weights() const;
  ldm::DenoiserConfig denoiser() const;
  ldm::ScheduleKind schedule_kind() const;
  metrics::BevGrid bev_grid() const;
  range::SceneSpec scene_spec(bool with_cars) const;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace topolidar::cli
