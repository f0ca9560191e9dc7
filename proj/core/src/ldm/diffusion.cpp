#include "topolidar/ldm/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "topolidar/common/error.hpp"
#include "topolidar/num/init.hpp"
#include "topolidar/num/ops.hpp"

namespace topolidar::ldm {

using num::Tensor;

LdmLoss ldm_loss(const EpsPredictor& predict, const Tensor& z0, const NoiseSchedule& sched, Rng& rng) {
  LdmLoss out;
  out.t = std::uniform_int_distribution<std::size_t>(1, sched.steps)(rng);
  out.eps = num::randn(z0.shape(), rng);
  Tensor zt = q_sample(z0, out.t, out.eps, sched);
  Tensor pred = predict(zt, out.t);
  out.loss = num::mean(num::square(num::sub(out.eps, pred)));
  return out;
}

LdmLoss ldm_loss(const Denoiser& denoiser, const Tensor& z0, const Tensor* cond, const NoiseSchedule& sched, Rng& rng) {
  return ldm_loss([&](const Tensor& zt, std::size_t t) { return denoiser.forward(zt, t, cond); }, z0, sched, rng);
}

std::vector<std::size_t> timestep_subsequence(std::size_t T, std::size_t steps) {
  if (steps < 1 || steps > T)
    throw ConfigError("sampling steps must lie in [1, T=" + std::to_string(T) + "], got " + std::to_string(steps));
  std::vector<std::size_t> ts;
  ts.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) ts.push_back(T - (i * T) / steps);
  return ts;
}

Tensor ddim_step(const Tensor& z_t, const Tensor& eps_hat, std::size_t t, std::size_t t_prev,
                 const NoiseSchedule& sched, double eta, Rng* rng) {
  if (t < 1 || t > sched.steps || t_prev >= t) throw ConfigError("ddim_step: need 0 <= t_prev < t <= T");
  const double ab = sched.alpha_bars[t];
  const double ab_prev = sched.alpha_bars[t_prev];
  auto zt = z_t.data();
  auto e = eps_hat.data();
  const double sigma =
      eta == 0.0 ? 0.0 : eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab)) * std::sqrt(1.0 - ab / ab_prev);
  const double dir = std::sqrt(std::max(0.0, 1.0 - ab_prev - sigma * sigma));
  const double sa = std::sqrt(ab), s1a = std::sqrt(1.0 - ab), sap = std::sqrt(ab_prev);
  std::vector<double> out(zt.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  if (sigma > 0.0 && rng == nullptr) throw Error("ddim_step: stochastic step needs a random generator");
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x0 = (zt[i] - s1a * e[i]) / sa;
    double v = sap * x0 + dir * e[i];
    if (sigma > 0.0) v += sigma * normal(*rng);
    out[i] = v;
  }
  return Tensor::from(z_t.shape(), std::move(out));
}

Tensor sample_from(const EpsPredictor& predict, const NoiseSchedule& sched, Tensor z, const SamplerOptions& opts,
                   Rng& rng) {
  num::NoGradGuard no_grad;
  const auto ts = timestep_subsequence(sched.steps, opts.steps);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const std::size_t t = ts[i];
    const std::size_t prev = i + 1 < ts.size() ? ts[i + 1] : 0;
    z = ddim_step(z, predict(z, t), t, prev, sched, opts.eta, &rng);
  }
  return z;
}

Tensor sample(const EpsPredictor& predict, const NoiseSchedule& sched, const num::Shape& shape,
              const SamplerOptions& opts, Rng& rng) {
  return sample_from(predict, sched, num::randn(shape, rng), opts, rng);
}

}  // namespace topolidar::ldm
