#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include "acceptance.hpp"
#include "topolidar/ph/topo_loss.hpp"
#include "topolidar/range/io.hpp"
#include "topolidar/range/synth.hpp"
#include "topolidar/vae/loss.hpp"
#include "topolidar/vae/train.hpp"
#include "topolidar_cli/commands.hpp"

using namespace topolidar;
namespace fs = std::filesystem;

namespace acceptance {
namespace {

// ---- end-to-end desk pipeline through the command-line entry point

const char* kToyConfig =
    "# toy dimensions with desk learning rates\n"
    "height = 16\n"
    "width = 128\n"
    "vae_lr = 2e-3\n"
    "ldm_lr = 1e-3\n";

std::map<std::string, double> parse_report(const std::string& csv) {
  std::map<std::string, double> out;
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    const auto a = line.find(','), b = line.find(',', a + 1);
    if (a == std::string::npos || b == std::string::npos) continue;
    out[line.substr(0, a)] = std::stod(line.substr(a + 1, b - a - 1));
  }
  return out;
}

int cli_run(const std::vector<std::string>& args, std::string* out_text = nullptr) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (out_text) *out_text = out.str();
  if (code != 0) std::cout << "  command failed (" << code << "): " << args[0] << ": " << err.str();
  return code;
}

// Range images with every pixel set to an independent uniform value in (0, 1].
void write_noise_set(const fs::path& dir, std::uint64_t seed, std::size_t n, std::size_t h, std::size_t w) {
  fs::create_directories(dir);
  Rng rng = make_stream(seed, "noise");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto img = range::RangeImage::zeros(h, w, {});
    auto d = img.values.mutable_data();
    for (auto& v : d) v = 1.0 - u(rng);
    char name[32];
    std::snprintf(name, sizeof name, "noise_%04zu.tlri", i);
    range::write_range_image(dir / name, img);
  }
}

Outcome end_to_end(const Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  int wins = 0;
  std::string detail;
  for (unsigned seed : ctx.e2e_seeds) {
    const fs::path dir = ctx.workdir / ("e2e_seed" + std::to_string(seed));
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string cfg = (dir / "toy.cfg").string();
    std::ofstream(cfg) << kToyConfig;
    const std::string s = std::to_string(seed);
    auto p = [&](const char* name) { return (dir / name).string(); };
    std::string gen_csv, noise_csv;
    const bool ok =
        cli_run({"prepare", "--config", cfg, "--seed", s, "--out", p("data"), "--n", "64"}) == 0 &&
        cli_run({"train-vae", "--config", cfg, "--seed", s, "--data", p("data"), "--out", p("vae.ckpt"), "--steps", "2000"}) == 0 &&
        cli_run({"train-ldm", "--config", cfg, "--seed", s, "--data", p("data"), "--vae", p("vae.ckpt"), "--out",
                 p("ldm.ckpt"), "--steps", "2000"}) == 0 &&
        cli_run({"sample", "--config", cfg, "--seed", s, "--vae", p("vae.ckpt"), "--ldm", p("ldm.ckpt"), "--out", p("gen"),
                 "--n", "32"}) == 0 &&
        cli_run({"eval", "--config", cfg, "--gen", p("gen"), "--ref", p("data"), "--out", p("gen_report.csv")}, &gen_csv) == 0;
    if (!ok) {
      detail += fmt("seed %u: pipeline failed; ", seed);
      continue;
    }
    write_noise_set(dir / "noise", seed, 32, 16, 128);
    if (cli_run({"eval", "--config", cfg, "--gen", p("noise"), "--ref", p("data"), "--out", p("noise_report.csv")},
                &noise_csv) != 0) {
      detail += fmt("seed %u: noise evaluation failed; ", seed);
      continue;
    }
    auto g = parse_report(gen_csv), n = parse_report(noise_csv);
    const bool win = g["FRID-H"] < n["FRID-H"] && g["JSD"] < n["JSD"];
    wins += win;
    detail += fmt("seed %u: FRID-H %.4g vs noise %.4g, JSD %.4g vs noise %.4g, MMD %.4g vs noise %.4g%s; ", seed,
                  g["FRID-H"], n["FRID-H"], g["JSD"], n["JSD"], g["MMD"], n["MMD"], win ? "" : " (not below)");
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const int total = static_cast<int>(ctx.e2e_seeds.size());
  return {wins == total && total >= 3 && secs < 1800.0,
          detail + fmt("%d/%d seeds below the noise baseline on FRID-H and JSD, %.0f s total (limit 1800 s)", wins, total, secs)};
}

// ---- single-scene overfit runs shared by the overfit and ablation criteria

struct OverfitRun {
  double masked_l1 = 0.0;
  double persistence = 0.0;  // non-essential total persistence of the reconstruction, metres
};

struct OverfitSeed {
  OverfitRun topo_on, topo_off;
};

vae::VaeConfig tiny_vae() {
  vae::VaeConfig c;
  c.height = 16;
  c.width = 64;
  c.node_dim = 16;
  c.latent_dim = 4;
  c.decoder_channels = 8;
  return c;
}

range::RangeImage overfit_scene(unsigned seed) {
  range::ProjectionConfig pc;
  range::SceneSpec spec;
  spec.min_boxes = 2;
  spec.max_boxes = 3;
  spec.max_poles = 2;
  return range::project(range::synth_scene(77 + seed, spec, pc, 16, 64), pc, 16, 64);
}

OverfitRun overfit(unsigned seed, bool topo) {
  const std::vector<range::RangeImage> data{overfit_scene(seed)};
  Rng init = make_stream(seed, "vae-init");
  auto model = vae::VaeModel::create(tiny_vae(), init);
  vae::TrainOptions o;
  o.steps = 2000;
  o.seed = seed;
  o.base_lr = 2e-3;
  o.lr_period_epochs = 2000;
  if (!topo) o.weights.topo = 0.0;
  vae::VaeTrainer tr(std::move(model), o);
  tr.run(data);

  num::NoGradGuard ng;
  const auto& target = data[0];
  auto enc = tr.model().encode(target.values, vae::Mode::Eval, nullptr);
  auto rec = tr.model().decode(enc.z0);
  std::vector<double> mask(target.values.data().begin(), target.values.data().end());
  OverfitRun r;
  r.masked_l1 = vae::masked_l1(rec, target.values, mask).item();
  r.persistence = ph::topo_loss_on_image(rec, target.meta, target.values.numel(), std::span<const double>(mask)).loss.item();
  return r;
}

const std::vector<OverfitSeed>& overfit_runs() {
  static std::optional<std::vector<OverfitSeed>> cache;
  if (!cache) {
    cache.emplace();
    for (unsigned seed = 0; seed < 5; ++seed) cache->push_back({overfit(seed, true), overfit(seed, false)});
  }
  return *cache;
}

Outcome overfit_recon(const Context&) {
  const auto& runs = overfit_runs();
  int good = 0;
  std::string per;
  for (const auto& s : runs) {
    good += s.topo_on.masked_l1 < 0.02;
    per += fmt(" %.4f", s.topo_on.masked_l1);
  }
  return {good == static_cast<int>(runs.size()),
          fmt("%d/%zu single-scene runs (default loss weights, 2000 steps) below masked L1 0.02:%s", good, runs.size(),
              per.c_str())};
}

Outcome ablation(const Context&) {
  const auto& runs = overfit_runs();
  int good = 0;
  std::string per;
  for (const auto& s : runs) {
    good += s.topo_on.persistence <= s.topo_off.persistence;
    per += fmt(" %.4f/%.4f", s.topo_on.persistence, s.topo_off.persistence);
  }
  return {good >= 4, fmt("%d/%zu matched seeds with topo-on persistence <= topo-off (need 4); on/off:%s", good,
                         runs.size(), per.c_str())};
}

}  // namespace

std::vector<Criterion> training_criteria() {
  return {{"overfit-reconstruction", overfit_recon},
          {"ablation-topo-persistence", ablation},
          {"end-to-end-desk-pipeline", end_to_end}};
}

}  // namespace acceptance
