#include "topolidar/vae/model.hpp"

#include <bit>
#include <cmath>

#include "topolidar/common/error.hpp"
#include "topolidar/num/init.hpp"
#include "topolidar/num/ops.hpp"

namespace topolidar::vae {

using num::Tensor;

namespace {

bool is_pow2(std::size_t x) { return x != 0 && (x & (x - 1)) == 0; }

std::size_t log2_of(std::size_t x) { return static_cast<std::size_t>(std::countr_zero(x)); }

// Initial log-variance of the posterior head; starts the encoder with a
// modest posterior spread instead of unit variance.
constexpr double kInitLogvar = -4.0;

Tensor config_record(const VaeConfig& c) {
  std::vector<double> v{static_cast<double>(c.height),
                        static_cast<double>(c.width),
                        static_cast<double>(c.f_v),
                        static_cast<double>(c.f_h),
                        static_cast<double>(c.node_dim),
                        static_cast<double>(c.graph_layers),
                        static_cast<double>(c.k),
                        static_cast<double>(c.latent_dim),
                        static_cast<double>(c.decoder_channels),
                        c.slope,
                        c.sum_branch ? 1.0 : 0.0,
                        c.stochastic ? 1.0 : 0.0,
                        static_cast<double>(c.embed_channels.size())};
  for (auto e : c.embed_channels) v.push_back(static_cast<double>(e));
  const std::size_t n = v.size();
  return Tensor::from({n}, std::move(v));
}

VaeConfig config_from_record(const Tensor& t) {
  auto v = t.data();
  if (v.size() < 13) throw FormatError("vae.config record too short");
  auto z = [&](std::size_t i) { return static_cast<std::size_t>(v[i]); };
  VaeConfig c;
  c.height = z(0);
  c.width = z(1);
  c.f_v = z(2);
  c.f_h = z(3);
  c.node_dim = z(4);
  c.graph_layers = z(5);
  c.k = z(6);
  c.latent_dim = z(7);
  c.decoder_channels = z(8);
  c.slope = v[9];
  c.sum_branch = v[10] != 0.0;
  c.stochastic = v[11] != 0.0;
  const std::size_t ne = z(12);
  if (v.size() != 13 + ne) throw FormatError("vae.config record has inconsistent length");
  c.embed_channels.clear();
  for (std::size_t i = 0; i < ne; ++i) c.embed_channels.push_back(z(13 + i));
  return c;
}

graph::ConvLayer make_conv(std::size_t cin, std::size_t cout, double gain, Rng& rng) {
  return {num::init_normal({3, 3, cin, cout}, 9 * cin, rng, gain), num::init_zeros({cout})};
}

}  // namespace

void VaeConfig::validate() const {
  if (f_v == 0 || f_h == 0 || height % f_v != 0 || width % f_h != 0)
    throw ConfigError("vae: image " + std::to_string(height) + "x" + std::to_string(width) +
                      " is not divisible by downsampling factors " + std::to_string(f_v) + "x" + std::to_string(f_h));
  if (!is_pow2(f_v) || !is_pow2(f_h)) throw ConfigError("vae: downsampling factors must be powers of two");
  if (node_dim == 0 || node_dim % 2 != 0) throw ConfigError("vae: node_dim must be even (positional encoding)");
  if (k == 0) throw ConfigError("vae: k must be at least 1");
  if (graph_layers == 0) throw ConfigError("vae: need at least one graph layer");
  if (latent_dim == 0 || decoder_channels == 0) throw ConfigError("vae: latent_dim and decoder_channels must be positive");
  if (!(slope > 0.0 && slope < 1.0)) throw ConfigError("vae: LeakyReLU slope must lie in (0, 1)");
  const std::size_t n = latent_h() * latent_w();
  if (n > 1 && n <= k)
    throw ConfigError("vae: k=" + std::to_string(k) + " needs more than k latent nodes, grid has " + std::to_string(n));
}

VaeModel VaeModel::create(const VaeConfig& cfg, Rng& rng) {
  cfg.validate();
  VaeModel m;
  m.cfg_ = cfg;
  m.encoder_.k = cfg.k;
  m.encoder_.embed = graph::make_patch_embed(cfg.f_v, cfg.f_h, 1, cfg.embed_channels, cfg.node_dim, cfg.slope, rng);
  for (std::size_t l = 0; l < cfg.graph_layers; ++l)
    m.encoder_.layers.push_back(graph::make_graph_layer(cfg.node_dim, cfg.node_dim, cfg.sum_branch, cfg.slope, rng));
  m.mu_w_ = num::init_normal({cfg.node_dim, cfg.latent_dim}, cfg.node_dim, rng);
  m.mu_b_ = num::init_zeros({cfg.latent_dim});
  m.lv_w_ = num::init_normal({cfg.node_dim, cfg.latent_dim}, cfg.node_dim, rng, 0.1);
  m.lv_b_ = Tensor::full({cfg.latent_dim}, kInitLogvar, true);

  const double gain = std::sqrt(2.0 / (1.0 + cfg.slope * cfg.slope));
  const std::size_t C = cfg.decoder_channels;
  m.dec_in_ = make_conv(cfg.latent_dim, C, gain, rng);
  const std::size_t nv = log2_of(cfg.f_v), nh = log2_of(cfg.f_h);
  for (std::size_t i = 0; i < std::max(nv, nh); ++i) {
    m.stage_factors_.emplace_back(i < nv ? 2 : 1, i < nh ? 2 : 1);
    m.dec_stages_.push_back(make_conv(C, C, gain, rng));
  }
  m.dec_out_ = make_conv(C, 1, 1.0, rng);
  return m;
}

Encoded VaeModel::encode(const Tensor& image, Mode mode, Rng* rng) const {
  if (image.rank() != 3 || image.dim(0) != cfg_.height || image.dim(1) != cfg_.width || image.dim(2) != 1)
    throw ShapeError("vae encode: expected " + std::to_string(cfg_.height) + "x" + std::to_string(cfg_.width) +
                     "x1 image, got " + num::to_string(image.shape()));
  auto res = graph::encode(image, encoder_);
  const std::size_t h = cfg_.latent_h(), w = cfg_.latent_w(), d = cfg_.latent_dim;
  Encoded e;
  e.mean = num::reshape(num::linear(res.output.nodes, mu_w_, mu_b_), {h, w, d});
  e.logvar = num::reshape(num::linear(res.output.nodes, lv_w_, lv_b_), {h, w, d});
  if (mode == Mode::Train && cfg_.stochastic) {
    if (!rng) throw Error("vae encode: Train mode needs a random generator");
    Tensor eps = num::randn({h, w, d}, *rng);
    e.z0 = num::add(e.mean, num::mul(num::exp(num::mul_scalar(e.logvar, 0.5)), eps));
  } else {
    e.z0 = e.mean;
  }
  if (const auto* t = res.tap(2)) e.tap2 = *t;
  if (const auto* t = res.tap(4)) e.tap4 = *t;
  return e;
}

Tensor VaeModel::decode(const Tensor& z) const {
  const std::size_t h = cfg_.latent_h(), w = cfg_.latent_w();
  if (z.rank() != 3 || z.dim(0) != h || z.dim(1) != w || z.dim(2) != cfg_.latent_dim)
    throw ShapeError("vae decode: expected latent " + std::to_string(h) + "x" + std::to_string(w) + "x" +
                     std::to_string(cfg_.latent_dim) + ", got " + num::to_string(z.shape()));
  Tensor x = num::leaky_relu(num::conv2d_circular(z, dec_in_.weight, dec_in_.bias), cfg_.slope);
  for (std::size_t i = 0; i < dec_stages_.size(); ++i) {
    x = num::upsample_nearest(x, stage_factors_[i].first, stage_factors_[i].second);
    x = num::leaky_relu(num::conv2d_circular(x, dec_stages_[i].weight, dec_stages_[i].bias), cfg_.slope);
  }
  return num::sigmoid(num::conv2d_circular(x, dec_out_.weight, dec_out_.bias));
}

std::vector<num::NamedTensor> VaeModel::named_params() const {
  std::vector<num::NamedTensor> p;
  const auto& em = encoder_.embed;
  for (std::size_t i = 0; i < em.convs.size(); ++i) {
    p.push_back({"enc.embed.conv" + std::to_string(i) + ".w", em.convs[i].weight});
    p.push_back({"enc.embed.conv" + std::to_string(i) + ".b", em.convs[i].bias});
  }
  p.push_back({"enc.embed.proj.w", em.proj_weight});
  p.push_back({"enc.embed.proj.b", em.proj_bias});
  for (std::size_t l = 0; l < encoder_.layers.size(); ++l) {
    const auto& L = encoder_.layers[l];
    const std::string pre = "enc.layer" + std::to_string(l);
    p.push_back({pre + ".w_conv", L.w_conv});
    if (L.w_sum.defined()) p.push_back({pre + ".w_sum", L.w_sum});
    p.push_back({pre + ".b", L.bias});
  }
  p.push_back({"head.mu.w", mu_w_});
  p.push_back({"head.mu.b", mu_b_});
  p.push_back({"head.lv.w", lv_w_});
  p.push_back({"head.lv.b", lv_b_});
  p.push_back({"dec.in.w", dec_in_.weight});
  p.push_back({"dec.in.b", dec_in_.bias});
  for (std::size_t i = 0; i < dec_stages_.size(); ++i) {
    p.push_back({"dec.stage" + std::to_string(i) + ".w", dec_stages_[i].weight});
    p.push_back({"dec.stage" + std::to_string(i) + ".b", dec_stages_[i].bias});
  }
  p.push_back({"dec.out.w", dec_out_.weight});
  p.push_back({"dec.out.b", dec_out_.bias});
  return p;
}

std::vector<Tensor> VaeModel::params() const {
  std::vector<Tensor> out;
  for (auto& np : named_params()) out.push_back(np.value);
  return out;
}

num::TensorBundle VaeModel::to_bundle() const {
  num::TensorBundle b;
  b.put("vae.config", config_record(cfg_));
  for (auto& np : named_params()) b.put(np.name, np.value.detach());
  return b;
}

VaeModel VaeModel::from_bundle(const num::TensorBundle& bundle) {
  const VaeConfig cfg = config_from_record(bundle.get("vae.config"));
  Rng scratch(0);
  VaeModel m = create(cfg, scratch);
  for (auto& np : m.named_params()) {
    const Tensor& src = bundle.get(np.name);
    if (src.shape() != np.value.shape())
      throw VersionError("checkpoint tensor '" + np.name + "' has shape " + num::to_string(src.shape()) + ", model expects " +
                         num::to_string(np.value.shape()));
    Tensor dst = np.value;
    std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
  }
  return m;
}

std::uint64_t VaeModel::param_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto& np : named_params()) {
    h = fnv1a(np.name, h);
    for (double v : np.value.data()) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xff;
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

std::array<std::size_t, 3> latent_shape_of(const num::TensorBundle& bundle) {
  const VaeConfig c = config_from_record(bundle.get("vae.config"));
  return {c.latent_h(), c.latent_w(), c.latent_dim};
}

}  // namespace topolidar::vae
