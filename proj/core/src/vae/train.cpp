#include "topolidar/vae/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "topolidar/common/error.hpp"
#include "topolidar/num/ops.hpp"

namespace topolidar::vae {

using num::Tensor;

namespace {

std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_stream(seed, "data", epoch);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace

VaeTrainer::VaeTrainer(VaeModel model, TrainOptions options) : model_(std::move(model)), opts_(std::move(options)) {
  if (opts_.batch == 0) throw ConfigError("vae training: batch must be positive");
  adam_.beta1 = opts_.beta1;
  adam_.beta2 = opts_.beta2;
  adam_.schedule = {opts_.base_lr, opts_.lr_period_epochs};
}

TrainRecord VaeTrainer::step(const std::vector<range::RangeImage>& dataset) {
  if (dataset.empty()) throw ConfigError("vae training: empty dataset");
  const std::size_t per_epoch = (dataset.size() + opts_.batch - 1) / opts_.batch;
  const std::size_t epoch = step_ / per_epoch;
  const std::size_t within = step_ % per_epoch;
  const auto order = epoch_order(opts_.seed, epoch, dataset.size());

  auto params = model_.params();
  for (auto& p : params) p.zero_grad();

  Rng rng = make_stream(opts_.seed, "vae-step", step_);
  TrainRecord rec;
  rec.step = step_;
  rec.epoch = static_cast<int>(epoch);
  Tensor total;
  std::size_t count = 0;
  for (std::size_t b = 0; b < opts_.batch; ++b) {
    const std::size_t pos = within * opts_.batch + b;
    if (pos >= dataset.size()) break;
    auto lb = vae_loss(model_, dataset[order[pos]], opts_.weights, Mode::Train, &rng);
    total = total.defined() ? num::add(total, lb.total) : lb.total;
    rec.recon += lb.recon;
    rec.topo += lb.topo_image + lb.topo_l2 + lb.topo_l4;
    rec.kl += lb.kl;
    ++count;
  }
  const double inv = 1.0 / static_cast<double>(count);
  total = num::mul_scalar(total, inv);
  rec.loss = total.item();
  rec.recon *= inv;
  rec.topo *= inv;
  rec.kl *= inv;
  if (!std::isfinite(rec.loss)) throw NumericalError("vae training: non-finite loss at step " + std::to_string(step_));
  total.backward();
  rec.lr = adam_.schedule.lr_at(rec.epoch);
  num::adam_step(params, adam_, rec.epoch);
  ++step_;
  if (opts_.on_step) opts_.on_step(rec);
  return rec;
}

std::vector<TrainRecord> VaeTrainer::run(const std::vector<range::RangeImage>& dataset) {
  if (dataset.empty()) throw ConfigError("vae training: empty dataset");
  std::vector<TrainRecord> out;
  while (step_ < opts_.steps) out.push_back(step(dataset));
  return out;
}

num::TensorBundle VaeTrainer::to_bundle() const {
  num::TensorBundle b = model_.to_bundle();
  b.put("train.step", Tensor::scalar(static_cast<double>(step_)));
  b.put("adam.step", Tensor::scalar(static_cast<double>(adam_.step_count)));
  for (std::size_t i = 0; i < adam_.first_moment.size(); ++i) {
    const auto n = adam_.first_moment[i].size();
    b.put("adam.m." + std::to_string(i), Tensor::from({n}, adam_.first_moment[i]));
    b.put("adam.v." + std::to_string(i), Tensor::from({n}, adam_.second_moment[i]));
  }
  return b;
}

VaeTrainer VaeTrainer::from_bundle(const num::TensorBundle& bundle, TrainOptions options) {
  VaeTrainer t(VaeModel::from_bundle(bundle), std::move(options));
  if (auto s = bundle.find("train.step")) t.step_ = static_cast<std::size_t>(s->item());
  if (auto s = bundle.find("adam.step")) {
    t.adam_.step_count = static_cast<std::uint64_t>(s->item());
    const auto params = t.model_.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& m = bundle.get("adam.m." + std::to_string(i));
      const auto& v = bundle.get("adam.v." + std::to_string(i));
      if (m.numel() != params[i].numel() || v.numel() != params[i].numel())
        throw VersionError("optimizer state does not match model parameter " + std::to_string(i));
      t.adam_.first_moment.emplace_back(m.data().begin(), m.data().end());
      t.adam_.second_moment.emplace_back(v.data().begin(), v.data().end());
    }
  }
  return t;
}

VaeModel train_vae(VaeModel model, const std::vector<range::RangeImage>& dataset, const TrainOptions& options,
                   const std::filesystem::path& checkpoint) {
  VaeTrainer trainer(std::move(model), options);
  trainer.run(dataset);
  if (!checkpoint.empty()) num::write_checkpoint(checkpoint, trainer.to_bundle());
  return trainer.model();
}

}  // namespace topolidar::vae
