#include "topolidar/vae/loss.hpp"

#include <algorithm>

#include "topolidar/common/error.hpp"
#include "topolidar/num/ops.hpp"

namespace topolidar::vae {

using num::Tensor;

Tensor kl_divergence(const Tensor& mean, const Tensor& logvar) {
  Tensor t = num::sub(num::add(num::square(mean), num::exp(logvar)), num::add_scalar(logvar, 1.0));
  return num::mul_scalar(num::mean(t), 0.5);
}

Tensor masked_l1(const Tensor& a, const Tensor& b, std::span<const double> mask) {
  Tensor diff = num::abs(num::sub(a, b));
  if (mask.empty()) return num::mean(diff);
  if (mask.size() != diff.numel()) throw ShapeError("masked_l1: mask size does not match inputs");
  std::size_t count = 0;
  std::vector<double> m(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i] > 0.0) {
      m[i] = 1.0;
      ++count;
    }
  Tensor masked = num::mul(diff, Tensor::from(diff.shape(), std::move(m)));
  return num::mul_scalar(num::sum(masked), count ? 1.0 / static_cast<double>(count) : 0.0);
}

LossBreakdown vae_loss(const VaeModel& model, const range::RangeImage& target, const LossWeights& weights, Mode mode,
                       Rng* rng) {
  const Tensor& img = target.values;
  Encoded enc = model.encode(img, mode, rng);
  Tensor recon = model.decode(enc.z0);

  std::vector<double> mask(img.data().begin(), img.data().end());
  LossBreakdown out;
  out.reconstruction = recon;

  Tensor rec = masked_l1(recon, img, weights.masked_recon ? std::span<const double>(mask) : std::span<const double>());
  out.recon = rec.item();
  Tensor total = rec;

  if (weights.topo != 0.0) {
    auto ti = ph::topo_loss_on_image(recon, target.meta, weights.sample_cap, std::span<const double>(mask), weights.sign);
    // every term is a mean per sampled point; image points in metres
    auto per_point = [](const Tensor& t, std::size_t n) { return num::mul_scalar(t, 1.0 / static_cast<double>(std::max<std::size_t>(n, 1))); };
    Tensor topo = per_point(ti.loss, ti.points);
    out.topo_image = topo.item();
    out.topo_degenerate = ti.degenerate;
    const auto taps = [&](const Tensor& t) { return std::min(t.dim(0), weights.sample_cap); };
    if (enc.tap2.defined()) {
      Tensor t2 = per_point(ph::topo_loss_sampled(enc.tap2, weights.sample_cap, weights.sign), taps(enc.tap2));
      out.topo_l2 = t2.item();
      topo = num::add(topo, t2);
    }
    if (enc.tap4.defined()) {
      Tensor t4 = per_point(ph::topo_loss_sampled(enc.tap4, weights.sample_cap, weights.sign), taps(enc.tap4));
      out.topo_l4 = t4.item();
      topo = num::add(topo, t4);
    }
    total = num::add(total, num::mul_scalar(topo, weights.topo));
  }

  Tensor kl = kl_divergence(enc.mean, enc.logvar);
  out.kl = kl.item();
  if (weights.kl != 0.0) total = num::add(total, num::mul_scalar(kl, weights.kl));
  out.total = total;
  return out;
}

}  // namespace topolidar::vae
