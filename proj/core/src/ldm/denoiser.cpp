#include "topolidar/ldm/denoiser.hpp"

#include <cmath>

#include "topolidar/common/error.hpp"
#include "topolidar/num/init.hpp"
#include "topolidar/num/ops.hpp"

namespace topolidar::ldm {

using num::Tensor;

namespace {

graph::ConvLayer make_conv(std::size_t cin, std::size_t cout, double gain, Rng& rng) {
  return {num::init_normal({3, 3, cin, cout}, 9 * cin, rng, gain), num::init_zeros({cout})};
}

Tensor conv(const Tensor& x, const graph::ConvLayer& c, std::size_t stride = 1) {
  return num::conv2d_circular(x, c.weight, c.bias, stride, stride);
}

Tensor config_record(const DenoiserConfig& c) {
  std::vector<double> v{static_cast<double>(c.channels), static_cast<double>(c.time_dim),
                        static_cast<double>(c.cond_dim), c.slope, static_cast<double>(c.widths.size())};
  for (auto w : c.widths) v.push_back(static_cast<double>(w));
  const std::size_t n = v.size();
  return Tensor::from({n}, std::move(v));
}

DenoiserConfig config_from_record(const Tensor& t) {
  auto v = t.data();
  if (v.size() < 5) throw FormatError("denoiser.config record too short");
  DenoiserConfig c;
  c.channels = static_cast<std::size_t>(v[0]);
  c.time_dim = static_cast<std::size_t>(v[1]);
  c.cond_dim = static_cast<std::size_t>(v[2]);
  c.slope = v[3];
  const auto n = static_cast<std::size_t>(v[4]);
  if (v.size() != 5 + n) throw FormatError("denoiser.config record has inconsistent length");
  c.widths.clear();
  for (std::size_t i = 0; i < n; ++i) c.widths.push_back(static_cast<std::size_t>(v[5 + i]));
  return c;
}

}  // namespace

void DenoiserConfig::validate() const {
  if (widths.empty()) throw ConfigError("denoiser: need at least one level width");
  if (channels == 0 || time_dim == 0 || time_dim % 2 != 0)
    throw ConfigError("denoiser: channels must be positive and time_dim even");
  if (!(slope > 0.0 && slope < 1.0)) throw ConfigError("denoiser: LeakyReLU slope must lie in (0, 1)");
}

Tensor timestep_embedding(std::size_t t, std::size_t dim) {
  const std::size_t half = dim / 2;
  std::vector<double> e(dim, 0.0);
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    e[i] = std::sin(static_cast<double>(t) * freq);
    e[half + i] = std::cos(static_cast<double>(t) * freq);
  }
  return Tensor::from({1, dim}, std::move(e));
}

Denoiser Denoiser::create(const DenoiserConfig& cfg, Rng& rng) {
  cfg.validate();
  Denoiser d;
  d.cfg_ = cfg;
  const double gain = std::sqrt(2.0 / (1.0 + cfg.slope * cfg.slope));
  d.t_w1_ = num::init_normal({cfg.time_dim, cfg.time_dim}, cfg.time_dim, rng, gain);
  d.t_b1_ = num::init_zeros({cfg.time_dim});
  d.t_w2_ = num::init_normal({cfg.time_dim, cfg.time_dim}, cfg.time_dim, rng, gain);
  d.t_b2_ = num::init_zeros({cfg.time_dim});
  d.in_ = make_conv(cfg.channels, cfg.widths[0], 1.0, rng);
  const std::size_t depth = cfg.depth();
  for (std::size_t i = 0; i <= depth; ++i) {
    Level lv;
    const std::size_t w = cfg.widths[i];
    lv.conv = make_conv(w, w, gain, rng);
    lv.time_w = num::init_normal({cfg.time_dim, w}, cfg.time_dim, rng, 0.5);
    if (i < depth) {
      lv.down = make_conv(w, cfg.widths[i + 1], gain, rng);
      lv.up = make_conv(cfg.widths[i + 1] + w, w, gain, rng);
    }
    d.levels_.push_back(std::move(lv));
  }
  d.mid_ = make_conv(cfg.widths[depth], cfg.widths[depth], gain, rng);
  d.cond_w_ = num::init_normal({cfg.cond_dim, cfg.widths[depth]}, cfg.cond_dim, rng);
  d.out_ = make_conv(cfg.widths[0], cfg.channels, 0.1, rng);
  return d;
}

Tensor Denoiser::forward(const Tensor& z_t, std::size_t t, const Tensor* cond) const {
  const std::size_t depth = cfg_.depth();
  const std::size_t unit = std::size_t{1} << depth;
  if (z_t.rank() != 3 || z_t.dim(2) != cfg_.channels || z_t.dim(0) % unit != 0 || z_t.dim(1) % unit != 0)
    throw ShapeError("denoiser: latent " + num::to_string(z_t.shape()) + " needs " + std::to_string(cfg_.channels) +
                     " channels and spatial dims divisible by " + std::to_string(unit));
  const double s = cfg_.slope;
  Tensor temb = timestep_embedding(t, cfg_.time_dim);
  temb = num::leaky_relu(num::linear(temb, t_w1_, t_b1_), s);
  temb = num::leaky_relu(num::linear(temb, t_w2_, t_b2_), s);

  Tensor x = conv(z_t, in_);
  std::vector<Tensor> skips;
  for (std::size_t i = 0; i <= depth; ++i) {
    const Level& lv = levels_[i];
    const std::size_t w = cfg_.widths[i];
    Tensor h = num::add(conv(x, lv.conv), num::reshape(num::matmul(temb, lv.time_w), {w}));
    if (i == depth && cond != nullptr) {
      if (cond->numel() != cfg_.cond_dim)
        throw ShapeError("denoiser: condition vector has " + std::to_string(cond->numel()) + " entries, expected " +
                         std::to_string(cfg_.cond_dim));
      Tensor c = num::matmul(num::reshape(*cond, {1, cfg_.cond_dim}), cond_w_);
      h = num::add(h, num::reshape(c, {w}));
    }
    h = num::leaky_relu(h, s);
    if (i < depth) {
      skips.push_back(h);
      x = num::leaky_relu(conv(h, lv.down, 2), s);
    } else {
      x = num::leaky_relu(conv(h, mid_), s);
    }
  }
  for (std::size_t i = depth; i-- > 0;) {
    const Tensor parts[2] = {num::upsample_nearest(x, 2, 2), skips[i]};
    x = num::leaky_relu(conv(num::concat(parts, 2), levels_[i].up), s);
  }
  return conv(x, out_);
}

std::vector<num::NamedTensor> Denoiser::named_params() const {
  std::vector<num::NamedTensor> p{{"den.time.w1", t_w1_}, {"den.time.b1", t_b1_}, {"den.time.w2", t_w2_},
                                  {"den.time.b2", t_b2_}, {"den.in.w", in_.weight},  {"den.in.b", in_.bias}};
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    const std::string pre = "den.level" + std::to_string(i);
    const Level& lv = levels_[i];
    p.push_back({pre + ".conv.w", lv.conv.weight});
    p.push_back({pre + ".conv.b", lv.conv.bias});
    p.push_back({pre + ".time.w", lv.time_w});
    if (lv.down.weight.defined()) {
      p.push_back({pre + ".down.w", lv.down.weight});
      p.push_back({pre + ".down.b", lv.down.bias});
      p.push_back({pre + ".up.w", lv.up.weight});
      p.push_back({pre + ".up.b", lv.up.bias});
    }
  }
  p.push_back({"den.mid.w", mid_.weight});
  p.push_back({"den.mid.b", mid_.bias});
  p.push_back({"den.cond.w", cond_w_});
  p.push_back({"den.out.w", out_.weight});
  p.push_back({"den.out.b", out_.bias});
  return p;
}

std::vector<Tensor> Denoiser::params() const {
  std::vector<Tensor> out;
  for (auto& np : named_params()) out.push_back(np.value);
  return out;
}

num::TensorBundle Denoiser::to_bundle() const {
  num::TensorBundle b;
  b.put("denoiser.config", config_record(cfg_));
  for (auto& np : named_params()) b.put(np.name, np.value.detach());
  return b;
}

Denoiser Denoiser::from_bundle(const num::TensorBundle& bundle) {
  Rng scratch(0);
  Denoiser d = create(config_from_record(bundle.get("denoiser.config")), scratch);
  for (auto& np : d.named_params()) {
    const Tensor& src = bundle.get(np.name);
    if (src.shape() != np.value.shape())
      throw VersionError("checkpoint tensor '" + np.name + "' has shape " + num::to_string(src.shape()) +
                         ", denoiser expects " + num::to_string(np.value.shape()));
    Tensor dst = np.value;
    std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
  }
  return d;
}

}  // namespace topolidar::ldm
