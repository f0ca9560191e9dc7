#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "topolidar/common/rng.hpp"
#include "topolidar/num/tensor.hpp"

namespace topolidar::ldm {

enum class ScheduleKind { Linear, Cosine };

ScheduleKind parse_schedule_kind(std::string_view name);  // "linear" | "cosine"
std::string_view schedule_kind_name(ScheduleKind kind);

/// Variance schedule indexed by t = 1..T; index 0 holds the t = 0 convention
/// (beta = 0, alpha_bar = 1).
struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::Linear;
  std::size_t steps = 0;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;

  double beta(std::size_t t) const { return betas.at(t); }
  double alpha_bar(std::size_t t) const { return alpha_bars.at(t); }
};

/// Linear: beta from 1e-4 to 2e-2 over T steps. Cosine: alpha_bar follows
/// cos^2 of the normalised time with offset 0.008, betas capped at 0.999.
NoiseSchedule make_schedule(ScheduleKind kind, std::size_t T);

/// Closed-form marginal sqrt(abar_t) z0 + sqrt(1 - abar_t) eps.
num::Tensor q_sample(const num::Tensor& z0, std::size_t t, const num::Tensor& eps, const NoiseSchedule& sched);

/// One forward step sqrt(1 - beta_t) z_{t-1} + sqrt(beta_t) eps.
num::Tensor q_step(const num::Tensor& z_prev, std::size_t t, const num::Tensor& eps, const NoiseSchedule& sched);

}  // namespace topolidar::ldm
