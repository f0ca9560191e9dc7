#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "topolidar/ldm/condition.hpp"
#include "topolidar/ldm/denoiser.hpp"
#include "topolidar/ldm/diffusion.hpp"
#include "topolidar/ldm/schedule.hpp"
#include "topolidar/num/adam.hpp"
#include "topolidar/range/projection.hpp"
#include "topolidar/vae/model.hpp"

namespace topolidar::ldm {

/// Per-channel standardisation of VAE latents.
struct LatentStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  static LatentStats identity(std::size_t channels);
  /// Mean and standard deviation per channel (last axis) over all samples.
  static LatentStats compute(const std::vector<num::Tensor>& latents);
  /// Statistics of posterior samples mean + exp(logvar / 2) * eps: the
  /// variance adds the average posterior variance to the spread of the means.
  static LatentStats compute(const std::vector<num::Tensor>& means, const std::vector<num::Tensor>& logvars);
  num::Tensor standardize(const num::Tensor& z) const;
  num::Tensor destandardize(const num::Tensor& z) const;
};

/// Denoiser, schedule, latent statistics and the condition embedder: all
/// that stage 2 needs besides the frozen VAE.
struct LdmModel {
  Denoiser denoiser;
  NoiseSchedule schedule;
  LatentStats stats;
  std::array<std::size_t, 3> latent_shape{};
  ConditionEmbedder embedder;

  /// Container layout: "ldm.latent_shape", "schedule.desc" ([kind, T]),
  /// "schedule.betas", "latent.mean", "latent.std", "ldm.cond_dim", then
  /// denoiser parameters.
  num::TensorBundle to_bundle() const;
  static LdmModel from_bundle(const num::TensorBundle& bundle);

  /// Noise predictor in standardised latent space; cond may be null.
  EpsPredictor predictor(const num::Tensor* cond) const;
};

/// Throws VersionError unless the LDM was trained on this VAE's latent dims.
void check_compatible(const vae::VaeModel& vae, const LdmModel& ldm);

/// Posterior parameters of every training image under the frozen VAE.
struct LatentDataset {
  std::vector<num::Tensor> means;
  std::vector<num::Tensor> logvars;
  std::vector<std::string> texts;  // may be empty strings
};

LatentDataset encode_dataset(const vae::VaeModel& vae, const std::vector<range::RangeImage>& images,
                             const std::vector<std::string>& texts = {});

struct LdmTrainRecord {
  std::size_t step = 0;
  int epoch = 0;
  std::size_t t = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct LdmTrainOptions {
  std::size_t steps = 1000;
  std::uint64_t seed = 0;
  double base_lr = 1e-6;
  int lr_period_epochs = 100;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double cond_dropout = 0.1;  // probability of training a step unconditionally
  bool sample_posterior = true;
  std::function<void(const LdmTrainRecord&)> on_step;
};

class LdmTrainer {
 public:
  LdmTrainer(LdmModel model, LdmTrainOptions options);

  LdmTrainRecord step(const LatentDataset& data);
  std::vector<LdmTrainRecord> run(const LatentDataset& data);

  const LdmModel& model() const { return model_; }
  std::size_t steps_done() const { return step_; }

 private:
  LdmModel model_;
  LdmTrainOptions opts_;
  num::AdamState adam_;
  std::size_t step_ = 0;
};

struct GeneratedScene {
  range::RangeImage image;
  range::PointCloud cloud;
};

struct GenerationResult {
  std::vector<GeneratedScene> scenes;
  double seconds = 0.0;
  double samples_per_second = 0.0;
};

struct GenerateOptions {
  std::size_t n = 1;
  std::string cond_text;
  SamplerOptions sampler;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  range::ProjectionConfig projection;
};

/// Samples latents, de-standardises them, decodes with the VAE and turns the
/// range images into point clouds. Scene i uses substream ("sampling", i),
/// so results do not depend on the worker count.
GenerationResult generate_scenes(const vae::VaeModel& vae, const LdmModel& ldm, const GenerateOptions& opts);

}  // namespace topolidar::ldm
