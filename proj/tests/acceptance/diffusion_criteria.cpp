#include <cmath>
#include <random>

#include "acceptance.hpp"
#include "oracles.hpp"
#include "topolidar/ldm/diffusion.hpp"
#include "topolidar/num/init.hpp"

using namespace topolidar;
using num::Tensor;

namespace acceptance {
namespace {

// 10k trials of a 4x4x2 latent pushed through 50 single noising steps. Every
// element shares the variance 1 - abar, so the variance estimate pools them.
Outcome iterated_noising(const Context&) {
  std::string detail;
  bool ok = true;
  for (auto kind : {ldm::ScheduleKind::Linear, ldm::ScheduleKind::Cosine}) {
    const auto sched = ldm::make_schedule(kind, 1000);
    const std::size_t t = 50, trials = 10000;
    Rng rng(5);
    std::vector<double> z0v(32);
    std::uniform_real_distribution<double> mag(0.5, 2.0);
    for (std::size_t i = 0; i < z0v.size(); ++i) z0v[i] = (i % 2 ? -1.0 : 1.0) * mag(rng);
    const Tensor z0 = Tensor::from({4, 4, 2}, z0v);
    std::vector<double> sum(32, 0.0), sq(32, 0.0);
    for (std::size_t k = 0; k < trials; ++k) {
      Tensor z = z0;
      for (std::size_t s = 1; s <= t; ++s) z = ldm::q_step(z, s, num::randn(z.shape(), rng), sched);
      for (std::size_t i = 0; i < 32; ++i) {
        sum[i] += z[i];
        sq[i] += z[i] * z[i];
      }
    }
    const double ab = sched.alpha_bar(t);
    double worst_mean = 0.0, pooled = 0.0;
    for (std::size_t i = 0; i < 32; ++i) {
      const double m = sum[i] / trials;
      worst_mean = std::max(worst_mean, std::abs(m - std::sqrt(ab) * z0v[i]) / std::abs(std::sqrt(ab) * z0v[i]));
      pooled += (sq[i] - trials * m * m) / (trials - 1);
    }
    pooled /= 32;
    const double var_err = std::abs(pooled - (1.0 - ab)) / (1.0 - ab);
    ok = ok && worst_mean <= 0.02 && var_err <= 0.02;
    detail += fmt("%s t=%zu: worst mean rel err %.4f, variance rel err %.4f; ", std::string(ldm::schedule_kind_name(kind)).c_str(),
                  t, worst_mean, var_err);
  }
  return {ok, detail + "tol 0.02, 10k trials"};
}

// Deterministic steps on Gaussian data are affine in closed form:
// z' - sqrt(ab') m = c (z - sqrt(ab) m) / s_t^2 with
// c = sqrt(ab' ab) v + sqrt((1 - ab')(1 - ab)) and s_t^2 = ab v + 1 - ab.
// Starting from Var z_T = 1 this gives the sampled variance exactly.
double predicted_variance(double v, std::size_t steps) {
  const std::size_t T = 1000;
  std::vector<double> ab(T + 1, 1.0);
  for (std::size_t t = 1; t <= T; ++t) ab[t] = ab[t - 1] * (1.0 - (1e-4 + (2e-2 - 1e-4) * (t - 1.0) / (T - 1.0)));
  double var = 1.0;
  for (std::size_t i = 0; i < steps; ++i) {
    const std::size_t t = T - i * T / steps, tp = i + 1 < steps ? T - (i + 1) * T / steps : 0;
    const double st = std::sqrt(ab[t] * v + 1.0 - ab[t]);
    const double c = std::sqrt(ab[tp] * ab[t]) * v + std::sqrt((1.0 - ab[tp]) * (1.0 - ab[t]));
    var *= (c / (st * st)) * (c / (st * st));
  }
  return var;
}

struct Moments {
  double mean, var;
};

Moments sample_moments(double m, double v, std::size_t steps, std::uint64_t seed) {
  const auto sched = ldm::make_schedule(ldm::ScheduleKind::Linear, 1000);
  auto predict = [&](const Tensor& z, std::size_t t) {
    std::vector<double> e(z.numel());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = oracle::optimal_eps(z[i], sched.alpha_bar(t), m, v);
    return Tensor::from(z.shape(), std::move(e));
  };
  Rng rng(seed);
  const std::size_t n = 10000;
  const Tensor x = ldm::sample(predict, sched, {n}, {steps, 0.0}, rng);
  double mu = 0.0;
  for (double e : x.data()) mu += e;
  mu /= n;
  double var = 0.0;
  for (double e : x.data()) var += (e - mu) * (e - mu);
  return {mu, var / (n - 1)};
}

Outcome scalar_ddim(const Context&) {
  const double m = 0.7, v = 0.25;
  const auto full = sample_moments(m, v, 1000, 11);
  const double em = std::abs(full.mean - m) / m, ev = std::abs(full.var - v) / v;
  // the 50-step sampler carries a known discretisation bias in the variance
  const auto fast = sample_moments(m, v, 50, 12);
  const double expect50 = predicted_variance(v, 50);
  const double em50 = std::abs(fast.mean - m) / m, ev50 = std::abs(fast.var - expect50) / expect50;
  return {em <= 0.03 && ev <= 0.03 && em50 <= 0.03 && ev50 <= 0.03,
          fmt("10k samples of N(%.2f, %.2f), deterministic sampler, optimal eps. 1000 steps: mean %.4f (rel err %.4f), "
              "variance %.4f (rel err %.4f), tol 0.03. 50 steps: mean %.4f (rel err %.4f), variance %.4f vs "
              "closed-form discretised %.4f (rel err %.4f; %.1f%% below the target)",
              m, v, full.mean, em, full.var, ev, fast.mean, em50, fast.var, expect50, ev50, 100.0 * (1.0 - expect50 / v))};
}

}  // namespace

std::vector<Criterion> diffusion_criteria() {
  return {{"diffusion-closed-form-monte-carlo", iterated_noising}, {"diffusion-scalar-ddim-oracle", scalar_ddim}};
}

}  // namespace acceptance
