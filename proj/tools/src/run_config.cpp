#include "topolidar_cli/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "topolidar/common/error.hpp"
#include "topolidar/common/rng.hpp"

namespace topolidar::cli {

namespace {

enum class Kind { String, Double, Size, Bool, Sizes };

struct KeySpec {
  const char* key;
  Kind kind;
  const char* def;
};

// defaults follow the published setup where one exists
const std::vector<KeySpec>& table() {
  static const std::vector<KeySpec> t{
      {"seed", Kind::Size, "0"},
      {"height", Kind::Size, "64"},
      {"width", Kind::Size, "1024"},
      {"fov_up_deg", Kind::Double, "3"},
      {"fov_down_deg", Kind::Double, "-25"},
      {"r_min", Kind::Double, "1"},
      {"r_max", Kind::Double, "80"},
      {"log_range", Kind::Bool, "true"},
      {"f_v", Kind::Size, "4"},
      {"f_h", Kind::Size, "8"},
      {"k", Kind::Size, "20"},
      {"graph_layers", Kind::Size, "4"},
      {"latent_dim", Kind::Size, "16"},
      {"node_dim", Kind::Size, "32"},
      {"embed_channels", Kind::Sizes, "8"},
      {"decoder_channels", Kind::Size, "16"},
      {"leaky_slope", Kind::Double, "0.2"},
      {"sum_branch", Kind::Bool, "true"},
      {"stochastic", Kind::Bool, "true"},
      {"lambda_topo", Kind::Double, "0.01"},
      {"lambda_kl", Kind::Double, "1e-6"},
      {"topo_sample_cap", Kind::Size, "512"},
      {"topo_sign", Kind::String, "persistence"},
      {"masked_recon", Kind::Bool, "true"},
      {"vae_steps", Kind::Size, "1000"},
      {"vae_lr", Kind::Double, "4.5e-6"},
      {"ldm_steps", Kind::Size, "1000"},
      {"ldm_lr", Kind::Double, "1e-6"},
      {"lr_period_epochs", Kind::Size, "100"},
      {"adam_beta1", Kind::Double, "0.5"},
      {"adam_beta2", Kind::Double, "0.9"},
      {"cond_dropout", Kind::Double, "0.1"},
      {"sample_posterior", Kind::Bool, "true"},
      {"schedule", Kind::String, "linear"},
      {"timesteps", Kind::Size, "1000"},
      {"sampling_steps", Kind::Size, "50"},
      {"eta", Kind::Double, "0"},
      {"denoiser_widths", Kind::Sizes, "32,48,64"},
      {"time_dim", Kind::Size, "64"},
      {"cond_dim", Kind::Size, "32"},
      {"synth_n", Kind::Size, "16"},
      {"synth_max_boxes", Kind::Size, "4"},
      {"synth_max_poles", Kind::Size, "3"},
      {"bev_extent", Kind::Double, "40"},
      {"bev_resolution", Kind::Double, "0.5"},
      {"mmd_cap", Kind::Size, "2048"},
      {"mmd_distance", Kind::String, "chamfer"},
      {"data_dir", Kind::String, ""},
      {"vae_checkpoint", Kind::String, ""},
      {"ldm_checkpoint", Kind::String, ""},
  };
  return t;
}

const KeySpec& spec_of(std::string_view key) {
  for (const auto& s : table())
    if (key == s.key) return s;
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_double(std::string_view s, double& out) {
  std::string tmp(s);
  char* end = nullptr;
  out = std::strtod(tmp.c_str(), &end);
  return !tmp.empty() && end == tmp.c_str() + tmp.size();
}

bool parse_u64(std::string_view s, std::uint64_t& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

bool parse_bool(std::string_view s, bool& out) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return out = true, true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return out = false, true;
  return false;
}

void check(const KeySpec& spec, std::string_view v) {
  bool ok = true;
  double d;
  std::uint64_t u;
  bool b;
  switch (spec.kind) {
    case Kind::String: break;
    case Kind::Double: ok = parse_double(v, d); break;
    case Kind::Size: ok = parse_u64(v, u); break;
    case Kind::Bool: ok = parse_bool(v, b); break;
    case Kind::Sizes: {
      std::stringstream ss{std::string(v)};
      std::string item;
      std::size_t n = 0;
      while (std::getline(ss, item, ',')) {
        ok = ok && parse_u64(trim(item), u);
        ++n;
      }
      ok = ok && n > 0;
      break;
    }
  }
  if (!ok) throw ConfigError("config key '" + std::string(spec.key) + "': cannot parse '" + std::string(v) + "'");
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& s : table()) values_[s.key] = s.def;
}

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig cfg;
  std::stringstream ss{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    cfg.set(trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

void RunConfig::set(std::string_view key, std::string_view value) {
  const auto& spec = spec_of(key);
  check(spec, value);
  values_[spec.key] = std::string(value);
}

const std::string& RunConfig::raw(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  return it->second;
}

std::string RunConfig::get_string(std::string_view key) const { return raw(key); }

double RunConfig::get_double(std::string_view key) const {
  double d = 0;
  parse_double(raw(key), d);
  return d;
}

std::uint64_t RunConfig::get_u64(std::string_view key) const {
  std::uint64_t u = 0;
  parse_u64(raw(key), u);
  return u;
}

std::size_t RunConfig::get_size(std::string_view key) const { return static_cast<std::size_t>(get_u64(key)); }

bool RunConfig::get_bool(std::string_view key) const {
  bool b = false;
  parse_bool(raw(key), b);
  return b;
}

std::vector<std::size_t> RunConfig::get_sizes(std::string_view key) const {
  std::vector<std::size_t> out;
  std::stringstream ss{raw(key)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::uint64_t u = 0;
    parse_u64(trim(item), u);
    out.push_back(static_cast<std::size_t>(u));
  }
  return out;
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical())));
  return buf;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& s : table()) out.emplace_back(s.key);
    return out;
  }();
  return k;
}

range::ProjectionConfig RunConfig::projection() const {
  range::ProjectionConfig p;
  p.fov_up_deg = get_double("fov_up_deg");
  p.fov_down_deg = get_double("fov_down_deg");
  p.r_min = get_double("r_min");
  p.r_max = get_double("r_max");
  p.log_scale = get_bool("log_range");
  p.validate();
  return p;
}

vae::VaeConfig RunConfig::vae() const {
  vae::VaeConfig c;
  c.height = get_size("height");
  c.width = get_size("width");
  c.f_v = get_size("f_v");
  c.f_h = get_size("f_h");
  c.embed_channels = get_sizes("embed_channels");
  c.node_dim = get_size("node_dim");
  c.graph_layers = get_size("graph_layers");
  c.k = get_size("k");
  c.latent_dim = get_size("latent_dim");
  c.decoder_channels = get_size("decoder_channels");
  c.slope = get_double("leaky_slope");
  c.sum_branch = get_bool("sum_branch");
  c.stochastic = get_bool("stochastic");
  c.validate();
  return c;
}

vae::LossWeights RunConfig::loss_weights() const {
  vae::LossWeights w;
  w.topo = get_double("lambda_topo");
  w.kl = get_double("lambda_kl");
  w.sample_cap = get_size("topo_sample_cap");
  const auto sign = get_string("topo_sign");
  if (sign == "persistence") w.sign = ph::TopoSign::Persistence;
  else if (sign == "literal") w.sign = ph::TopoSign::Literal;
  else throw ConfigError("topo_sign must be 'persistence' or 'literal', got '" + sign + "'");
  w.masked_recon = get_bool("masked_recon");
  return w;
}

ldm::DenoiserConfig RunConfig::denoiser() const {
  ldm::DenoiserConfig d;
  d.channels = get_size("latent_dim");
  d.widths = get_sizes("denoiser_widths");
  d.time_dim = get_size("time_dim");
  d.cond_dim = get_size("cond_dim");
  d.slope = get_double("leaky_slope");
  d.validate();
  return d;
}

ldm::ScheduleKind RunConfig::schedule_kind() const { return ldm::parse_schedule_kind(get_string("schedule")); }

metrics::BevGrid RunConfig::bev_grid() const {
  metrics::BevGrid g{get_double("bev_extent"), get_double("bev_resolution")};
  g.cells();
  return g;
}

range::SceneSpec RunConfig::scene_spec(bool with_cars) const {
  range::SceneSpec s;
  s.min_boxes = with_cars ? 1 : 0;
  s.max_boxes = with_cars ? std::max<std::size_t>(1, get_size("synth_max_boxes")) : 0;
  s.min_poles = 0;
  s.max_poles = get_size("synth_max_poles");
  return s;
}

}  // namespace topolidar::cli
