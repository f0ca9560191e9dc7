#include "topolidar_cli/commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <thread>

#include "topolidar/common/error.hpp"
#include "topolidar/common/rng.hpp"
#include "topolidar/ldm/model.hpp"
#include "topolidar/metrics/metrics.hpp"
#include "topolidar/num/checkpoint.hpp"
#include "topolidar/ph/persistence.hpp"
#include "topolidar/range/io.hpp"
#include "topolidar/range/synth.hpp"
#include "topolidar/vae/train.hpp"
#include "topolidar_cli/run_config.hpp"

namespace topolidar::cli {

namespace fs = std::filesystem;

namespace {

enum class LogLevel { Quiet, Info, Debug };

LogLevel log_level() {
  const char* env = std::getenv("TOPOLIDAR_LOG");
  if (!env) return LogLevel::Info;
  const std::string v = env;
  if (v == "quiet" || v == "0" || v == "off") return LogLevel::Quiet;
  if (v == "debug" || v == "2") return LogLevel::Debug;
  return LogLevel::Info;
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> workers;
  std::vector<std::string> overrides;  // key=value

  RunConfig resolve() const {
    RunConfig cfg = config.empty() ? RunConfig{} : RunConfig::load(config);
    for (const auto& kv : overrides) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) cfg.set("seed", std::to_string(*seed));
    return cfg;
  }
  std::size_t worker_count() const {
    if (workers && *workers > 0) return *workers;
    return std::max(1u, std::thread::hardware_concurrency());
  }
};

void add_common(CLI::App* sub, Common& c, bool with_steps, bool with_workers) {
  sub->add_option("--config", c.config, "Run configuration file (key = value)");
  sub->add_option("--seed", c.seed, "Master seed (overrides config)");
  sub->add_option("--set", c.overrides, "Override a config key, key=value")->take_all();
  if (with_steps) sub->add_option("--steps", c.steps, "Number of steps (overrides config)");
  if (with_workers) sub->add_option("--workers", c.workers, "Worker threads (default: all cores)");
}

std::string scene_name(const char* prefix, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu%s", prefix, i, ext);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

// ---- prepare

int cmd_prepare(const Common& c, const std::string& input, std::optional<std::size_t> n, std::ostream& out,
                std::ostream& err) {
  if (c.out.empty()) throw ConfigError("prepare: --out is required");
  const RunConfig cfg = c.resolve();
  const auto proj = cfg.projection();
  const std::size_t h = cfg.get_size("height"), w = cfg.get_size("width");
  const fs::path dir = c.out;
  ensure_dir(dir);
  std::ostringstream manifest;
  manifest << "file\tcondition\n";
  std::size_t written = 0;

  if (!input.empty()) {
    if (!fs::is_directory(input)) throw IoError("prepare: input directory " + input + " does not exist");
    std::vector<fs::path> bins;
    for (const auto& e : fs::directory_iterator(input))
      if (e.is_regular_file() && e.path().extension() == ".bin") bins.push_back(e.path());
    std::sort(bins.begin(), bins.end());
    if (bins.empty()) throw EmptyInputError("prepare: no .bin scans in " + input);
    std::size_t failed = 0;
    for (const auto& p : bins) {
      try {
        const auto img = range::project(range::read_kitti_bin(p), proj, h, w);
        const std::string name = p.stem().string() + ".tlri";
        range::write_range_image(dir / name, img);
        manifest << name << "\t\n";
        ++written;
      } catch (const Error& e) {
        err << p.filename().string() << ": " << e.what() << "\n";
        ++failed;
      }
    }
    write_text(dir / "manifest.tsv", manifest.str());
    if (failed) {
      err << "prepare: " << failed << " of " << bins.size() << " scans could not be read\n";
      return kData;
    }
  } else {
    const std::size_t count = n.value_or(cfg.get_size("synth_n"));
    const std::uint64_t seed = cfg.get_u64("seed");
    for (std::size_t i = 0; i < count; ++i) {
      const bool cars = i % 2 == 1;
      Rng rng = make_stream(seed, "data", i);
      const auto cloud = range::synth_scene(rng(), cfg.scene_spec(cars), proj, h, w);
      const auto img = range::project(cloud, proj, h, w);
      const std::string name = scene_name("scene", i, ".tlri");
      range::write_range_image(dir / name, img);
      manifest << name << '\t' << (cars ? "road with cars" : "empty road") << '\n';
      ++written;
    }
    write_text(dir / "manifest.tsv", manifest.str());
  }
  if (log_level() != LogLevel::Quiet) err << "prepare: wrote " << written << " range images to " << dir.string() << "\n";
  out << written << "\n";
  return kOk;
}

// ---- training

std::string data_dir(const std::string& flag, const RunConfig& cfg) {
  std::string d = flag.empty() ? cfg.get_string("data_dir") : flag;
  if (d.empty()) throw ConfigError("a dataset directory is required (--data or data_dir)");
  return d;
}

std::string ckpt_path(const std::string& flag, const RunConfig& cfg, const char* key, const char* what) {
  std::string p = flag.empty() ? cfg.get_string(key) : flag;
  if (p.empty()) throw ConfigError(std::string("a ") + what + " checkpoint is required");
  return p;
}

int cmd_train_vae(const Common& c, const std::string& data, std::ostream& out, std::ostream& err) {
  if (c.out.empty()) throw ConfigError("train-vae: --out is required");
  const RunConfig cfg = c.resolve();
  const auto proj = cfg.projection();
  auto ds = load_dataset(data_dir(data, cfg), proj);
  if (ds.images.empty()) throw ConfigError("train-vae: empty dataset");
  const auto vcfg = cfg.vae();
  for (const auto& img : ds.images)
    if (img.height != vcfg.height || img.width != vcfg.width)
      throw VersionError("train-vae: dataset images are " + std::to_string(img.height) + "x" +
                         std::to_string(img.width) + ", config expects " + std::to_string(vcfg.height) + "x" +
                         std::to_string(vcfg.width));

  const std::uint64_t seed = cfg.get_u64("seed");
  Rng init = make_stream(seed, "vae-init");
  auto model = vae::VaeModel::create(vcfg, init);

  vae::TrainOptions opts;
  opts.steps = c.steps.value_or(cfg.get_size("vae_steps"));
  opts.seed = seed;
  opts.weights = cfg.loss_weights();
  opts.base_lr = cfg.get_double("vae_lr");
  opts.lr_period_epochs = static_cast<int>(cfg.get_size("lr_period_epochs"));
  opts.beta1 = cfg.get_double("adam_beta1");
  opts.beta2 = cfg.get_double("adam_beta2");

  std::ofstream log(c.out + ".log", std::ios::trunc);
  const auto level = log_level();
  opts.on_step = [&](const vae::TrainRecord& r) {
    nlohmann::json j{{"step", r.step}, {"epoch", r.epoch}, {"loss", r.loss}, {"recon", r.recon},
                     {"topo", r.topo}, {"kl", r.kl},       {"lr", r.lr}};
    log << j.dump() << '\n';
    if (level == LogLevel::Debug || (level == LogLevel::Info && (r.step % 100 == 0 || r.step + 1 == opts.steps)))
      err << "train-vae " << j.dump() << '\n';
  };
  vae::VaeTrainer trainer(std::move(model), opts);
  trainer.run(ds.images);
  num::write_checkpoint(c.out, trainer.to_bundle());
  out << std::hex << std::setw(16) << std::setfill('0') << trainer.model().param_hash() << std::dec << '\n';
  return kOk;
}

int cmd_train_ldm(const Common& c, const std::string& data, const std::string& vae_flag, std::ostream& out,
                  std::ostream& err) {
  if (c.out.empty()) throw ConfigError("train-ldm: --out is required");
  const RunConfig cfg = c.resolve();
  const auto proj = cfg.projection();
  const auto vae_model = vae::VaeModel::from_bundle(
      num::read_checkpoint(ckpt_path(vae_flag, cfg, "vae_checkpoint", "VAE")));
  const auto& vc = vae_model.config();
  const auto want = cfg.vae();
  const std::array<std::size_t, 3> have{vc.latent_h(), vc.latent_w(), vc.latent_dim};
  const std::array<std::size_t, 3> cfg_latent{want.latent_h(), want.latent_w(), want.latent_dim};
  if (have != cfg_latent)
    throw VersionError("train-ldm: VAE checkpoint latent " + std::to_string(have[0]) + "x" + std::to_string(have[1]) +
                       "x" + std::to_string(have[2]) + " does not match the configured latent " +
                       std::to_string(cfg_latent[0]) + "x" + std::to_string(cfg_latent[1]) + "x" +
                       std::to_string(cfg_latent[2]));

  auto ds = load_dataset(data_dir(data, cfg), proj);
  for (const auto& img : ds.images)
    if (img.height != vc.height || img.width != vc.width) throw VersionError("train-ldm: dataset dims differ from the VAE");

  const std::uint64_t hash_before = vae_model.param_hash();
  auto latents = ldm::encode_dataset(vae_model, ds.images, ds.texts);

  const std::uint64_t seed = cfg.get_u64("seed");
  ldm::LdmModel model;
  Rng init = make_stream(seed, "ldm-init");
  model.denoiser = ldm::Denoiser::create(cfg.denoiser(), init);
  model.schedule = ldm::make_schedule(cfg.schedule_kind(), cfg.get_size("timesteps"));
  model.stats = cfg.get_bool("sample_posterior") ? ldm::LatentStats::compute(latents.means, latents.logvars)
                                                : ldm::LatentStats::compute(latents.means);
  model.latent_shape = have;
  model.embedder = ldm::ConditionEmbedder(cfg.get_size("cond_dim"));

  ldm::LdmTrainOptions opts;
  opts.steps = c.steps.value_or(cfg.get_size("ldm_steps"));
  opts.seed = seed;
  opts.base_lr = cfg.get_double("ldm_lr");
  opts.lr_period_epochs = static_cast<int>(cfg.get_size("lr_period_epochs"));
  opts.beta1 = cfg.get_double("adam_beta1");
  opts.beta2 = cfg.get_double("adam_beta2");
  opts.cond_dropout = cfg.get_double("cond_dropout");
  opts.sample_posterior = cfg.get_bool("sample_posterior");

  std::ofstream log(c.out + ".log", std::ios::trunc);
  const auto level = log_level();
  opts.on_step = [&](const ldm::LdmTrainRecord& r) {
    nlohmann::json j{{"step", r.step}, {"epoch", r.epoch}, {"t", r.t}, {"loss", r.loss}, {"lr", r.lr}};
    log << j.dump() << '\n';
    if (level == LogLevel::Debug || (level == LogLevel::Info && (r.step % 100 == 0 || r.step + 1 == opts.steps)))
      err << "train-ldm " << j.dump() << '\n';
  };
  ldm::LdmTrainer trainer(std::move(model), opts);
  trainer.run(latents);

  if (vae_model.param_hash() != hash_before)
    throw NumericalError("train-ldm: frozen VAE parameters changed during LDM training");
  num::write_checkpoint(c.out, trainer.model().to_bundle());
  out << std::hex << std::setw(16) << std::setfill('0') << hash_before << std::dec << '\n';
  return kOk;
}

// ---- sample

int cmd_sample(const Common& c, const std::string& vae_flag, const std::string& ldm_flag, std::size_t n,
               const std::string& cond, std::ostream& out, std::ostream& err) {
  if (c.out.empty()) throw ConfigError("sample: --out is required");
  const RunConfig cfg = c.resolve();
  const auto vae_model =
      vae::VaeModel::from_bundle(num::read_checkpoint(ckpt_path(vae_flag, cfg, "vae_checkpoint", "VAE")));
  const auto ldm_model =
      ldm::LdmModel::from_bundle(num::read_checkpoint(ckpt_path(ldm_flag, cfg, "ldm_checkpoint", "LDM")));
  ldm::check_compatible(vae_model, ldm_model);

  ldm::GenerateOptions opts;
  opts.n = n;
  opts.cond_text = cond;
  opts.sampler.steps = c.steps.value_or(cfg.get_size("sampling_steps"));
  opts.sampler.eta = cfg.get_double("eta");
  opts.seed = cfg.get_u64("seed");
  opts.workers = c.worker_count();
  opts.projection = cfg.projection();

  const fs::path dir = c.out;
  ensure_dir(dir);
  auto res = ldm::generate_scenes(vae_model, ldm_model, opts);
  nlohmann::json files = nlohmann::json::array();
  for (std::size_t i = 0; i < res.scenes.size(); ++i) {
    const auto ply = scene_name("sample", i, ".ply");
    const auto tlri = scene_name("sample", i, ".tlri");
    range::write_ply(dir / ply, res.scenes[i].cloud);
    range::write_range_image(dir / tlri, res.scenes[i].image);
    files.push_back({{"ply", ply}, {"range_image", tlri}, {"points", res.scenes[i].cloud.size()}});
  }
  nlohmann::json manifest{{"n", n},
                          {"seed", opts.seed},
                          {"cond", cond},
                          {"sampling_steps", opts.sampler.steps},
                          {"eta", opts.sampler.eta},
                          {"workers", opts.workers},
                          {"seconds", res.seconds},
                          {"samples_per_second", res.samples_per_second},
                          {"files", files}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  if (log_level() != LogLevel::Quiet)
    err << "sample: " << n << " scenes, " << res.samples_per_second << " samples/s\n";
  out << n << "\n";
  return kOk;
}

// ---- eval

int cmd_eval(const Common& c, const std::string& gen, const std::string& ref, const std::string& hist_dir,
             std::ostream& out, std::ostream&) {
  const RunConfig cfg = c.resolve();
  const auto proj = cfg.projection();
  const auto g = load_image_dir(gen, proj);
  const auto r = load_image_dir(ref, proj);
  if (g.empty()) throw EmptyInputError("eval: no range images in " + gen);
  if (r.empty()) throw EmptyInputError("eval: no range images in " + ref);
  for (const auto* set : {&g, &r})
    for (const auto& img : *set)
      if (img.height != g.front().height || img.width != g.front().width)
        throw ShapeError("eval: range images differ in size");

  metrics::MmdOptions mo;
  mo.cap = cfg.get_size("mmd_cap");
  mo.grid = cfg.bev_grid();
  mo.workers = c.worker_count();
  const auto dist = cfg.get_string("mmd_distance");
  if (dist == "chamfer") mo.distance = metrics::MmdDistance::Chamfer;
  else if (dist == "bev_l2") mo.distance = metrics::MmdDistance::BevL2;
  else throw ConfigError("mmd_distance must be 'chamfer' or 'bev_l2', got '" + dist + "'");

  auto rep = metrics::evaluate(g, r, mo, cfg.hash());
  if (!c.out.empty()) metrics::write_report_csv(c.out, rep.rows);
  if (!hist_dir.empty()) {
    ensure_dir(hist_dir);
    metrics::write_histogram(fs::path(hist_dir) / "bev_gen.tlri", rep.gen_hist);
    metrics::write_histogram(fs::path(hist_dir) / "bev_ref.tlri", rep.ref_hist);
  }
  out << metrics::report_csv(rep.rows);
  return kOk;
}

// ---- ph

range::PointCloud read_cloud(const fs::path& p, const range::ProjectionConfig& proj) {
  const auto ext = p.extension().string();
  if (ext == ".bin") return range::read_kitti_bin(p);
  if (ext == ".ply") return range::read_ply(p);
  if (ext == ".tlri") return range::unproject(range::read_range_image(p, proj));
  throw FormatError(p.string() + ": unsupported point cloud format (expected .bin, .ply or .tlri)");
}

int cmd_ph(const Common& c, const std::string& file, std::size_t cap, std::ostream& out, std::ostream&) {
  const RunConfig cfg = c.resolve();
  if (!fs::exists(file)) throw IoError("cannot open " + file);
  auto cloud = read_cloud(file, cfg.projection());
  if (cap > 0) cloud = metrics::subsample(cloud, cap);
  std::vector<double> coords;
  coords.reserve(cloud.size() * 3);
  for (const auto& p : cloud.points) coords.insert(coords.end(), p.begin(), p.end());
  const auto diagram = ph::persistence_0d(coords, cloud.size(), 3);
  ph::write_diagram_csv(out, diagram);
  const auto prec = out.precision(17);
  out << "# total_persistence " << diagram.total_persistence() << '\n';
  out.precision(prec);
  return kOk;
}

}  // namespace

Dataset load_dataset(const fs::path& dir, const range::ProjectionConfig& proj) {
  const fs::path mpath = dir / "manifest.tsv";
  std::ifstream f(mpath);
  if (!f) throw IoError("cannot open dataset manifest " + mpath.string());
  Dataset ds;
  std::string line;
  std::getline(f, line);
  if (line != "file\tcondition") throw FormatError(mpath.string() + ": unexpected header");
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    const std::string file = line.substr(0, tab);
    ds.files.push_back(file);
    ds.texts.push_back(tab == std::string::npos ? "" : line.substr(tab + 1));
    ds.images.push_back(range::read_range_image(dir / file, proj));
  }
  return ds;
}

std::vector<range::RangeImage> load_image_dir(const fs::path& dir, const range::ProjectionConfig& proj) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".tlri") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<range::RangeImage> out;
  for (const auto& p : files) out.push_back(range::read_range_image(p, proj));
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Topology-preserving graph latent diffusion for LiDAR scenes", "topolidar"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  Common common;
  std::string input, data, vae_ckpt, ldm_ckpt, cond, gen, ref, hist, file;
  std::optional<std::size_t> n_opt;
  std::size_t n = 1, cap = 4096;

  auto* prepare = app.add_subcommand("prepare", "Write range-image datasets from .bin scans or synthetic scenes");
  add_common(prepare, common, false, false);
  prepare->add_option("--out", common.out, "Dataset directory")->required();
  prepare->add_option("--input", input, "Directory of KITTI .bin scans (default: synthetic scenes)");
  prepare->add_option("--n", n_opt, "Number of synthetic scenes (default: synth_n)");

  auto* tvae = app.add_subcommand("train-vae", "Stage 1: train the topology-preserving VAE");
  add_common(tvae, common, true, false);
  tvae->add_option("--data", data, "Prepared dataset directory");
  tvae->add_option("--out", common.out, "Checkpoint to write")->required();

  auto* tldm = app.add_subcommand("train-ldm", "Stage 2: train the latent diffusion model on a frozen VAE");
  add_common(tldm, common, true, false);
  tldm->add_option("--data", data, "Prepared dataset directory");
  tldm->add_option("--vae", vae_ckpt, "VAE checkpoint");
  tldm->add_option("--out", common.out, "Checkpoint to write")->required();

  auto* samp = app.add_subcommand("sample", "Generate scenes");
  add_common(samp, common, true, true);
  samp->add_option("--vae", vae_ckpt, "VAE checkpoint");
  samp->add_option("--ldm", ldm_ckpt, "LDM checkpoint");
  samp->add_option("--out", common.out, "Output directory")->required();
  samp->add_option("--n", n, "Number of scenes");
  samp->add_option("--cond", cond, "Condition text");

  auto* ev = app.add_subcommand("eval", "JSD, MMD and FRID-H between two sets of range images");
  add_common(ev, common, false, true);
  ev->add_option("--gen", gen, "Directory of generated .tlri files")->required();
  ev->add_option("--ref", ref, "Directory of reference .tlri files")->required();
  ev->add_option("--out", common.out, "Report CSV path");
  ev->add_option("--hist", hist, "Directory for BEV histogram dumps");

  auto* phc = app.add_subcommand("ph", "Zero-dimensional persistence diagram of a scan");
  add_common(phc, common, false, false);
  phc->add_option("file", file, "Point cloud (.bin, .ply or .tlri)")->required();
  phc->add_option("--cap", cap, "Subsample to at most this many points (0: all)");

  std::vector<const char*> argv{"topolidar"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << "run 'topolidar --help' for usage\n";
    return kUsage;
  }

  try {
    if (*prepare) return cmd_prepare(common, input, n_opt, out, err);
    if (*tvae) return cmd_train_vae(common, data, out, err);
    if (*tldm) return cmd_train_ldm(common, data, vae_ckpt, out, err);
    if (*samp) return cmd_sample(common, vae_ckpt, ldm_ckpt, n, cond, out, err);
    if (*ev) return cmd_eval(common, gen, ref, hist, out, err);
    if (*phc) return cmd_ph(common, file, cap, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

}  // namespace topolidar::cli
