#include "topolidar/ldm/model.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <thread>

#include "topolidar/common/error.hpp"
#include "topolidar/num/init.hpp"
#include "topolidar/num/ops.hpp"

namespace topolidar::ldm {

using num::Tensor;

LatentStats LatentStats::identity(std::size_t channels) {
  return {std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0)};
}

LatentStats LatentStats::compute(const std::vector<Tensor>& latents) {
  if (latents.empty()) throw EmptyInputError("latent statistics of an empty set");
  const std::size_t c = latents.front().shape().back();
  std::vector<double> sum(c, 0.0), sq(c, 0.0);
  std::size_t count = 0;
  for (const auto& z : latents) {
    if (z.shape().back() != c) throw ShapeError("latent statistics: channel count differs between latents");
    auto d = z.data();
    for (std::size_t i = 0; i < d.size(); ++i) sum[i % c] += d[i];
    count += d.size() / c;
  }
  LatentStats s{std::vector<double>(c), std::vector<double>(c)};
  for (std::size_t j = 0; j < c; ++j) s.mean[j] = sum[j] / static_cast<double>(count);
  for (const auto& z : latents) {
    auto d = z.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double r = d[i] - s.mean[i % c];
      sq[i % c] += r * r;
    }
  }
  for (std::size_t j = 0; j < c; ++j) s.stddev[j] = std::max(std::sqrt(sq[j] / static_cast<double>(count)), 1e-6);
  return s;
}

LatentStats LatentStats::compute(const std::vector<Tensor>& means, const std::vector<Tensor>& logvars) {
  LatentStats s = compute(means);
  if (logvars.size() != means.size()) throw ShapeError("latent statistics: one logvar per mean required");
  const std::size_t c = s.mean.size();
  std::vector<double> post(c, 0.0);
  std::size_t count = 0;
  for (const auto& lv : logvars) {
    auto d = lv.data();
    if (d.size() % c != 0) throw ShapeError("latent statistics: logvar channel count differs");
    for (std::size_t i = 0; i < d.size(); ++i) post[i % c] += std::exp(d[i]);
    count += d.size() / c;
  }
  for (std::size_t j = 0; j < c; ++j) {
    const double var = s.stddev[j] * s.stddev[j] + post[j] / static_cast<double>(count);
    s.stddev[j] = std::max(std::sqrt(var), 1e-6);
  }
  return s;
}

Tensor LatentStats::standardize(const Tensor& z) const {
  const std::size_t c = mean.size();
  std::vector<double> inv(c);
  for (std::size_t j = 0; j < c; ++j) inv[j] = 1.0 / stddev[j];
  return num::mul(num::sub(z, Tensor::from({c}, mean)), Tensor::from({c}, std::move(inv)));
}

Tensor LatentStats::destandardize(const Tensor& z) const {
  const std::size_t c = mean.size();
  return num::add(num::mul(z, Tensor::from({c}, stddev)), Tensor::from({c}, mean));
}

num::TensorBundle LdmModel::to_bundle() const {
  num::TensorBundle b = denoiser.to_bundle();
  b.put("ldm.latent_shape", Tensor::from({3}, {static_cast<double>(latent_shape[0]),
                                               static_cast<double>(latent_shape[1]),
                                               static_cast<double>(latent_shape[2])}));
  b.put("schedule.desc", Tensor::from({2}, {schedule.kind == ScheduleKind::Linear ? 0.0 : 1.0,
                                            static_cast<double>(schedule.steps)}));
  b.put("schedule.betas", Tensor::from({schedule.steps}, {schedule.betas.begin() + 1, schedule.betas.end()}));
  b.put("latent.mean", Tensor::from({stats.mean.size()}, stats.mean));
  b.put("latent.std", Tensor::from({stats.stddev.size()}, stats.stddev));
  b.put("ldm.cond_dim", Tensor::scalar(static_cast<double>(embedder.dim())));
  return b;
}

LdmModel LdmModel::from_bundle(const num::TensorBundle& b) {
  LdmModel m;
  m.denoiser = Denoiser::from_bundle(b);
  auto ls = b.get("ldm.latent_shape").data();
  if (ls.size() != 3) throw FormatError("ldm.latent_shape must hold 3 values");
  m.latent_shape = {static_cast<std::size_t>(ls[0]), static_cast<std::size_t>(ls[1]), static_cast<std::size_t>(ls[2])};
  auto desc = b.get("schedule.desc").data();
  if (desc.size() != 2) throw FormatError("schedule.desc must hold [kind, T]");
  m.schedule = make_schedule(desc[0] == 0.0 ? ScheduleKind::Linear : ScheduleKind::Cosine,
                             static_cast<std::size_t>(desc[1]));
  auto betas = b.get("schedule.betas").data();
  if (betas.size() != m.schedule.steps) throw FormatError("schedule.betas length does not match T");
  for (std::size_t t = 1; t <= m.schedule.steps; ++t)
    if (betas[t - 1] != m.schedule.betas[t]) throw VersionError("stored noise schedule differs from its descriptor");
  auto mean = b.get("latent.mean").data();
  auto sd = b.get("latent.std").data();
  m.stats = {{mean.begin(), mean.end()}, {sd.begin(), sd.end()}};
  m.embedder = ConditionEmbedder(static_cast<std::size_t>(b.get("ldm.cond_dim").item()));
  if (m.stats.mean.size() != m.latent_shape[2] || m.denoiser.config().channels != m.latent_shape[2])
    throw VersionError("LDM checkpoint channel counts are inconsistent");
  return m;
}

EpsPredictor LdmModel::predictor(const Tensor* cond) const {
  return [this, cond](const Tensor& zt, std::size_t t) { return denoiser.forward(zt, t, cond); };
}

void check_compatible(const vae::VaeModel& vae, const LdmModel& ldm) {
  const auto& c = vae.config();
  const std::array<std::size_t, 3> v{c.latent_h(), c.latent_w(), c.latent_dim};
  if (v != ldm.latent_shape)
    throw VersionError("VAE latent " + std::to_string(v[0]) + "x" + std::to_string(v[1]) + "x" + std::to_string(v[2]) +
                       " does not match LDM latent " + std::to_string(ldm.latent_shape[0]) + "x" +
                       std::to_string(ldm.latent_shape[1]) + "x" + std::to_string(ldm.latent_shape[2]));
}

LatentDataset encode_dataset(const vae::VaeModel& vae, const std::vector<range::RangeImage>& images,
                             const std::vector<std::string>& texts) {
  if (images.empty()) throw ConfigError("ldm training: empty dataset");
  if (!texts.empty() && texts.size() != images.size()) throw ConfigError("ldm training: one text per image required");
  num::NoGradGuard no_grad;
  LatentDataset d;
  for (const auto& img : images) {
    auto e = vae.encode(img.values, vae::Mode::Eval, nullptr);
    d.means.push_back(e.mean.detach());
    d.logvars.push_back(e.logvar.detach());
  }
  d.texts = texts.empty() ? std::vector<std::string>(images.size()) : texts;
  return d;
}

LdmTrainer::LdmTrainer(LdmModel model, LdmTrainOptions options) : model_(std::move(model)), opts_(std::move(options)) {
  adam_.beta1 = opts_.beta1;
  adam_.beta2 = opts_.beta2;
  adam_.schedule = {opts_.base_lr, opts_.lr_period_epochs};
}

LdmTrainRecord LdmTrainer::step(const LatentDataset& data) {
  const std::size_t n = data.means.size();
  if (n == 0) throw ConfigError("ldm training: empty dataset");
  const std::size_t epoch = step_ / n;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng shuffle = make_stream(opts_.seed, "ldm-data", epoch);
  std::shuffle(order.begin(), order.end(), shuffle);
  const std::size_t idx = order[step_ % n];

  Rng rng = make_stream(opts_.seed, "ldm-step", step_);
  Tensor z0 = data.means[idx];
  if (opts_.sample_posterior) {
    Tensor eps = num::randn(z0.shape(), rng);
    num::NoGradGuard no_grad;
    z0 = num::add(z0, num::mul(num::exp(num::mul_scalar(data.logvars[idx], 0.5)), eps));
  }
  z0 = model_.stats.standardize(z0).detach();

  const bool drop = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < opts_.cond_dropout;
  Tensor cond;
  if (!drop && !data.texts[idx].empty()) cond = model_.embedder.embed(data.texts[idx]);

  auto params = model_.denoiser.params();
  for (auto& p : params) p.zero_grad();
  auto l = ldm_loss(model_.denoiser, z0, cond.defined() ? &cond : nullptr, model_.schedule, rng);
  LdmTrainRecord rec;
  rec.step = step_;
  rec.epoch = static_cast<int>(epoch);
  rec.t = l.t;
  rec.loss = l.loss.item();
  if (!std::isfinite(rec.loss)) throw NumericalError("ldm training: non-finite loss at step " + std::to_string(step_));
  l.loss.backward();
  rec.lr = adam_.schedule.lr_at(rec.epoch);
  num::adam_step(params, adam_, rec.epoch);
  ++step_;
  if (opts_.on_step) opts_.on_step(rec);
  return rec;
}

std::vector<LdmTrainRecord> LdmTrainer::run(const LatentDataset& data) {
  std::vector<LdmTrainRecord> out;
  while (step_ < opts_.steps) out.push_back(step(data));
  return out;
}

GenerationResult generate_scenes(const vae::VaeModel& vae, const LdmModel& ldm, const GenerateOptions& opts) {
  check_compatible(vae, ldm);
  GenerationResult res;
  res.scenes.resize(opts.n);
  if (opts.n == 0) return res;
  Tensor cond;
  if (!ConditionEmbedder::tokenize(opts.cond_text).empty()) cond = ldm.embedder.embed(opts.cond_text);
  const num::Shape shape{ldm.latent_shape[0], ldm.latent_shape[1], ldm.latent_shape[2]};
  const auto& cfg = vae.config();

  auto one = [&](std::size_t i) {
    num::NoGradGuard no_grad;
    Rng rng = make_stream(opts.seed, "sampling", i);
    Tensor z = sample(ldm.predictor(cond.defined() ? &cond : nullptr), ldm.schedule, shape, opts.sampler, rng);
    Tensor img = vae.decode(ldm.stats.destandardize(z));
    GeneratedScene s;
    s.image = range::RangeImage{cfg.height, cfg.width, 1, img.detach(), opts.projection};
    s.cloud = range::unproject(s.image);
    res.scenes[i] = std::move(s);
  };

  const auto start = std::chrono::steady_clock::now();
  const std::size_t workers = std::max<std::size_t>(1, std::min(opts.workers, opts.n));
  if (workers == 1) {
    for (std::size_t i = 0; i < opts.n; ++i) one(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < opts.n; i += workers) one(i);
      });
    for (auto& th : pool) th.join();
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  res.samples_per_second = res.seconds > 0.0 ? static_cast<double>(opts.n) / res.seconds : 0.0;
  return res;
}

}  // namespace topolidar::ldm
