#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "acceptance.hpp"
#include "topolidar/range/projection.hpp"
#include "topolidar/vae/model.hpp"

using namespace topolidar;
using num::Tensor;

namespace acceptance {
namespace {

constexpr double kPi = std::numbers::pi;

// Synthetic clouds with at most one point per bin: pick distinct cells, then
// a random direction strictly inside each cell and a random range.
Outcome projection_round_trip(const Context&) {
  std::size_t clouds = 0, points = 0, lost = 0;
  double worst_az = 0.0, worst_incl = 0.0, worst_range = 0.0;
  for (auto [h, w] : std::vector<std::pair<std::size_t, std::size_t>>{{64, 1024}, {16, 128}, {32, 256}}) {
    for (const bool log_scale : {true, false}) {
      range::ProjectionConfig cfg;
      cfg.log_scale = log_scale;
      const double up = cfg.fov_up_deg * kPi / 180, down = cfg.fov_down_deg * kPi / 180;
      const double az_bin = 2 * kPi / w, incl_bin = (up - down) / h;
      for (unsigned seed = 0; seed < 5; ++seed, ++clouds) {
        std::mt19937_64 rng(seed * 31 + h);
        std::uniform_real_distribution<double> u(0.02, 0.98);
        std::uniform_real_distribution<double> lr(std::log(cfg.r_min), std::log(cfg.r_max));
        std::map<std::pair<std::size_t, std::size_t>, std::array<double, 3>> truth;  // az, incl, r
        std::uniform_int_distribution<std::size_t> rd(0, h - 1), cd(0, w - 1);
        range::PointCloud pc;
        for (int k = 0; k < 600; ++k) {
          const std::size_t row = rd(rng), col = cd(rng);
          if (truth.count({row, col})) continue;
          const double az = -kPi + (col + u(rng)) * az_bin;
          const double incl = up - (row + u(rng)) * incl_bin;
          const double r = std::exp(lr(rng));
          truth[{row, col}] = {az, incl, r};
          pc.points.push_back({r * std::cos(incl) * std::cos(az), r * std::cos(incl) * std::sin(az), r * std::sin(incl)});
        }
        points += pc.size();
        const auto back = range::unproject(range::project(pc, cfg, h, w));
        lost += pc.size() - back.size();
        for (const auto& p : back.points) {
          const double r = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
          const double az = std::atan2(p[1], p[0]), incl = std::asin(p[2] / r);
          const auto col = static_cast<std::size_t>(std::floor((az + kPi) / az_bin));
          const auto row = static_cast<std::size_t>(std::floor((up - incl) / incl_bin));
          auto it = truth.find({row, col});
          if (it == truth.end()) {
            ++lost;
            continue;
          }
          double daz = std::abs(az - it->second[0]);
          daz = std::min(daz, 2 * kPi - daz);
          worst_az = std::max(worst_az, daz / az_bin);
          worst_incl = std::max(worst_incl, std::abs(incl - it->second[1]) / incl_bin);
          worst_range = std::max(worst_range, std::abs(r - it->second[2]) / it->second[2]);
        }
      }
    }
  }
  return {lost == 0 && worst_az <= 1.0 && worst_incl <= 1.0 && worst_range <= 1e-9,
          fmt("%zu clouds, %zu points, %zu lost; worst angular error %.3f (azimuth) / %.3f (inclination) bin widths "
              "(limit 1), worst relative range error %.3g (limit 1e-9)",
              clouds, points, lost, worst_az, worst_incl, worst_range)};
}

Tensor roll_columns(const Tensor& t, std::size_t shift) {
  const std::size_t h = t.dim(0), w = t.dim(1), c = t.dim(2);
  std::vector<double> out(t.numel());
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t col = 0; col < w; ++col)
      for (std::size_t k = 0; k < c; ++k) out[(r * w + (col + shift) % w) * c + k] = t[(r * w + col) * c + k];
  return Tensor::from(t.shape(), std::move(out));
}

Outcome decoder_equivariance(const Context&) {
  num::NoGradGuard ng;
  std::size_t cases = 0, exact = 0;
  for (auto [h, w] : std::vector<std::pair<std::size_t, std::size_t>>{{16, 128}, {64, 1024}}) {
    vae::VaeConfig cfg;
    cfg.height = h;
    cfg.width = w;
    for (unsigned seed = 0; seed < (h == 16 ? 6u : 2u); ++seed) {
      Rng rng(seed + 100);
      auto m = vae::VaeModel::create(cfg, rng);
      std::normal_distribution<double> n(0.0, 1.0);
      for (auto& p : m.named_params())
        for (auto& v : p.value.mutable_data()) v += 0.2 * n(rng);
      std::vector<double> z(cfg.latent_h() * cfg.latent_w() * cfg.latent_dim);
      for (auto& v : z) v = n(rng);
      const Tensor zt = Tensor::from({cfg.latent_h(), cfg.latent_w(), cfg.latent_dim}, z);
      const Tensor base = m.decode(zt);
      std::uniform_int_distribution<std::size_t> sd(1, cfg.latent_w() - 1);
      for (int k = 0; k < 3; ++k) {
        const std::size_t s = sd(rng);
        const Tensor a = roll_columns(base, s * cfg.f_h);
        const Tensor b = m.decode(roll_columns(zt, s));
        ++cases;
        exact += std::equal(a.data().begin(), a.data().end(), b.data().begin());
      }
    }
  }
  return {exact == cases, fmt("%zu/%zu random (parameters, latent, shift) cases bit-exact: decode(roll(z, s)) == "
                              "roll(decode(z), s * f_h)",
                              exact, cases)};
}

}  // namespace

std::vector<Criterion> geometry_criteria() {
  return {{"projection-round-trip", projection_round_trip}, {"decoder-circular-equivariance", decoder_equivariance}};
}

}  // namespace acceptance
