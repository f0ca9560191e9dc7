#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "topolidar/num/adam.hpp"
#include "topolidar/range/projection.hpp"
#include "topolidar/vae/loss.hpp"
#include "topolidar/vae/model.hpp"

namespace topolidar::vae {

struct TrainRecord {
  std::size_t step = 0;
  int epoch = 0;
  double loss = 0.0;
  double recon = 0.0;
  double topo = 0.0;
  double kl = 0.0;
  double lr = 0.0;
};

struct TrainOptions {
  std::size_t steps = 1000;
  std::size_t batch = 1;
  std::uint64_t seed = 0;
  LossWeights weights;
  double base_lr = 4.5e-6;
  int lr_period_epochs = 100;
  double beta1 = 0.5;
  double beta2 = 0.9;
  std::function<void(const TrainRecord&)> on_step;
};

/// Stage-1 trainer. Batches are drawn from a per-epoch shuffle of the
/// dataset, and every step's sampling noise comes from its own substream, so
/// a trainer restored from a checkpoint continues bit-exactly.
class VaeTrainer {
 public:
  VaeTrainer(VaeModel model, TrainOptions options);

  /// Runs one optimisation step and returns its record.
  TrainRecord step(const std::vector<range::RangeImage>& dataset);
  /// Runs until options.steps total steps have been taken.
  std::vector<TrainRecord> run(const std::vector<range::RangeImage>& dataset);

  const VaeModel& model() const { return model_; }
  std::size_t steps_done() const { return step_; }
  const num::AdamState& optimizer() const { return adam_; }

  /// Model bundle plus optimizer moments and the step counter.
  num::TensorBundle to_bundle() const;
  static VaeTrainer from_bundle(const num::TensorBundle& bundle, TrainOptions options);

 private:
  VaeModel model_;
  TrainOptions opts_;
  num::AdamState adam_;
  std::size_t step_ = 0;
};

/// Convenience wrapper: trains from scratch and writes the checkpoint.
VaeModel train_vae(VaeModel model, const std::vector<range::RangeImage>& dataset, const TrainOptions& options,
                   const std::filesystem::path& checkpoint);

}  // namespace topolidar::vae
