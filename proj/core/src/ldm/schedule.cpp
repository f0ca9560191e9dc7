#include "topolidar/ldm/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "topolidar/common/error.hpp"
#include "topolidar/num/ops.hpp"

namespace topolidar::ldm {

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "linear") return ScheduleKind::Linear;
  if (name == "cosine") return ScheduleKind::Cosine;
  throw ConfigError("unknown noise schedule '" + std::string(name) + "' (expected linear or cosine)");
}

std::string_view schedule_kind_name(ScheduleKind kind) { return kind == ScheduleKind::Linear ? "linear" : "cosine"; }

NoiseSchedule make_schedule(ScheduleKind kind, std::size_t T) {
  if (T == 0) throw ConfigError("noise schedule needs T >= 1");
  NoiseSchedule s;
  s.kind = kind;
  s.steps = T;
  s.betas.assign(T + 1, 0.0);
  if (kind == ScheduleKind::Linear) {
    constexpr double lo = 1e-4, hi = 2e-2;
    for (std::size_t t = 1; t <= T; ++t)
      s.betas[t] = T == 1 ? lo : lo + (hi - lo) * static_cast<double>(t - 1) / static_cast<double>(T - 1);
  } else {
    constexpr double offset = 0.008;
    auto f = [&](double t) {
      const double c = std::cos((t / static_cast<double>(T) + offset) / (1.0 + offset) * std::numbers::pi / 2.0);
      return c * c;
    };
    for (std::size_t t = 1; t <= T; ++t) {
      const double ratio = f(static_cast<double>(t)) / f(static_cast<double>(t - 1));
      s.betas[t] = std::clamp(1.0 - ratio, 1e-8, 0.999);
    }
  }
  s.alphas.assign(T + 1, 1.0);
  s.alpha_bars.assign(T + 1, 1.0);
  for (std::size_t t = 1; t <= T; ++t) {
    s.alphas[t] = 1.0 - s.betas[t];
    s.alpha_bars[t] = s.alpha_bars[t - 1] * s.alphas[t];
  }
  return s;
}

namespace {

void check_t(std::size_t t, const NoiseSchedule& sched) {
  if (t < 1 || t > sched.steps)
    throw ConfigError("timestep " + std::to_string(t) + " outside [1, " + std::to_string(sched.steps) + "]");
}

}  // namespace

num::Tensor q_sample(const num::Tensor& z0, std::size_t t, const num::Tensor& eps, const NoiseSchedule& sched) {
  check_t(t, sched);
  if (z0.shape() != eps.shape())
    throw ShapeError("q_sample: noise " + num::to_string(eps.shape()) + " does not match latent " +
                     num::to_string(z0.shape()));
  const double ab = sched.alpha_bars[t];
  return num::add(num::mul_scalar(z0, std::sqrt(ab)), num::mul_scalar(eps, std::sqrt(1.0 - ab)));
}

num::Tensor q_step(const num::Tensor& z_prev, std::size_t t, const num::Tensor& eps, const NoiseSchedule& sched) {
  check_t(t, sched);
  if (z_prev.shape() != eps.shape()) throw ShapeError("q_step: noise shape does not match latent");
  const double b = sched.betas[t];
  return num::add(num::mul_scalar(z_prev, std::sqrt(1.0 - b)), num::mul_scalar(eps, std::sqrt(b)));
}

}  // namespace topolidar::ldm
