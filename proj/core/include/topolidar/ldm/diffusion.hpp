#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "topolidar/common/rng.hpp"
#include "topolidar/ldm/denoiser.hpp"
#include "topolidar/ldm/schedule.hpp"

namespace topolidar::ldm {

/// Noise prediction eps_hat(z_t, t).
using EpsPredictor = std::function<num::Tensor(const num::Tensor& z_t, std::size_t t)>;

struct LdmLoss {
  num::Tensor loss;
  std::size_t t = 0;
  num::Tensor eps;
};

/// Draws t ~ Uniform{1..T} and eps ~ N(0, I), returns mean squared error
/// between eps and the prediction at z_t. z0 must not carry history.
LdmLoss ldm_loss(const EpsPredictor& predict, const num::Tensor& z0, const NoiseSchedule& sched, Rng& rng);
LdmLoss ldm_loss(const Denoiser& denoiser, const num::Tensor& z0, const num::Tensor* cond, const NoiseSchedule& sched,
                 Rng& rng);

/// Descending, evenly strided timesteps starting at T: T - floor(i T / S).
std::vector<std::size_t> timestep_subsequence(std::size_t T, std::size_t steps);

/// One generalized (DDIM) reverse step from t to t_prev (t_prev = 0 ends the
/// chain). eta = 0 is deterministic; eta = 1 reproduces the DDPM posterior
/// variance when t_prev = t - 1.
num::Tensor ddim_step(const num::Tensor& z_t, const num::Tensor& eps_hat, std::size_t t, std::size_t t_prev,
                      const NoiseSchedule& sched, double eta, Rng* rng);

struct SamplerOptions {
  std::size_t steps = 50;
  double eta = 0.0;
};

/// Runs the subsequence sampler from z_T to an estimate of z_0.
num::Tensor sample_from(const EpsPredictor& predict, const NoiseSchedule& sched, num::Tensor z_T,
                        const SamplerOptions& opts, Rng& rng);
/// As above with z_T ~ N(0, I) of the given shape drawn from `rng`.
num::Tensor sample(const EpsPredictor& predict, const NoiseSchedule& sched, const num::Shape& shape,
                   const SamplerOptions& opts, Rng& rng);

}  // namespace topolidar::ldm
