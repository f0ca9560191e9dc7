#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "topolidar/num/tensor.hpp"

namespace topolidar::num {

/// Cosine annealing from base_lr to 0 over `period_epochs`; held at 0 after.
struct CosineSchedule {
  double base_lr = 1e-3;
  int period_epochs = 100;

  double lr_at(int epoch) const;
};

struct AdamState {
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
  CosineSchedule schedule;
  std::uint64_t step_count = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// One bias-corrected Adam update of `params` from their accumulated
/// gradients, at the cosine-scaled learning rate for `epoch`. Parameters
/// without a gradient are treated as having a zero gradient. Moment buffers
/// are created on the first call and must shape-match on every later one.
void adam_step(std::span<Tensor> params, AdamState& state, int epoch);

}  // namespace topolidar::num
