#include "topolidar/num/adam.hpp"

#include <cmath>
#include <numbers>

#include "topolidar/common/error.hpp"

namespace topolidar::num {

double CosineSchedule::lr_at(int epoch) const {
  if (period_epochs <= 0) return base_lr;
  if (epoch <= 0) return base_lr;
  if (epoch >= period_epochs) return 0.0;
  const double phase = std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(period_epochs);
  return 0.5 * base_lr * (1.0 + std::cos(phase));
}

void adam_step(std::span<Tensor> params, AdamState& state, int epoch) {
  if (state.first_moment.empty() && state.step_count == 0) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.numel(), 0.0);
      state.second_moment.emplace_back(p.numel(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size())
    throw ShapeError("adam_step: optimizer tracks " + std::to_string(state.first_moment.size()) +
                     " parameters, got " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i)
    if (state.first_moment[i].size() != params[i].numel() || state.second_moment[i].size() != params[i].numel())
      throw ShapeError("adam_step: moment buffer " + std::to_string(i) + " does not match parameter shape " +
                       to_string(params[i].shape()));

  ++state.step_count;
  const double lr = state.schedule.lr_at(epoch);
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    auto data = params[i].mutable_data();
    const bool has = params[i].has_grad();
    auto g = params[i].grad();
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double gj = has ? g[j] : 0.0;
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
      if (lr == 0.0) continue;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      data[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace topolidar::num
