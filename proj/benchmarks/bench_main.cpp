#include <benchmark/benchmark.h>

#include <random>

#include "topolidar/common/rng.hpp"
#include "topolidar/graph/layers.hpp"
#include "topolidar/ldm/denoiser.hpp"
#include "topolidar/ldm/diffusion.hpp"
#include "topolidar/ldm/schedule.hpp"
#include "topolidar/metrics/metrics.hpp"
#include "topolidar/num/init.hpp"
#include "topolidar/num/ops.hpp"
#include "topolidar/ph/persistence.hpp"
#include "topolidar/range/synth.hpp"

using namespace topolidar;
using num::Tensor;

namespace {

std::vector<double> uniform(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

void BM_Persistence0d(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto pts = uniform(n * 3, 1);
  for (auto _ : st) benchmark::DoNotOptimize(ph::persistence_0d(pts, n, 3));
  st.SetComplexityN(st.range(0));
}
BENCHMARK(BM_Persistence0d)->RangeMultiplier(2)->Range(256, 4096)->Complexity(benchmark::oNSquared);

void BM_Conv2dCircular(benchmark::State& st) {
  const auto w = static_cast<std::size_t>(st.range(0));
  Rng rng(2);
  const Tensor x = num::randn({16, w, 16}, rng), k = num::randn({3, 3, 16, 16}, rng), b = Tensor::zeros({16});
  num::NoGradGuard ng;
  for (auto _ : st) benchmark::DoNotOptimize(num::conv2d_circular(x, k, b));
}
BENCHMARK(BM_Conv2dCircular)->Arg(64)->Arg(256)->Arg(1024);

void BM_ConvBackward(benchmark::State& st) {
  Rng rng(3);
  const Tensor x = num::randn({16, 256, 16}, rng), b = Tensor::zeros({16});
  Tensor k = num::randn({3, 3, 16, 16}, rng);
  k.set_requires_grad(true);
  for (auto _ : st) {
    Tensor y = num::sum(num::conv2d_circular(x, k, b));
    y.backward();
    k.zero_grad();
  }
}
BENCHMARK(BM_ConvBackward);

void BM_Knn(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto pts = uniform(n * 32, 4);
  for (auto _ : st) benchmark::DoNotOptimize(graph::knn(pts, n, 32, 8));
}
BENCHMARK(BM_Knn)->Arg(256)->Arg(1024)->Arg(2048);

void BM_Sampler(benchmark::State& st) {
  ldm::DenoiserConfig cfg;
  cfg.channels = 4;
  cfg.widths = {8, 12, 16};
  cfg.time_dim = 16;
  cfg.cond_dim = 8;
  Rng rng(5);
  const auto net = ldm::Denoiser::create(cfg, rng);
  const auto sched = ldm::make_schedule(ldm::ScheduleKind::Linear, 1000);
  ldm::EpsPredictor predict = [&](const Tensor& z, std::size_t t) { return net.forward(z, t); };
  num::NoGradGuard ng;
  for (auto _ : st) {
    Rng srng(6);
    benchmark::DoNotOptimize(ldm::sample(predict, sched, {4, 64, 4}, {static_cast<std::size_t>(st.range(0)), 0.0}, srng));
  }
}
BENCHMARK(BM_Sampler)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_Chamfer(benchmark::State& st) {
  range::ProjectionConfig pc;
  range::SceneSpec spec;
  const auto h = static_cast<std::size_t>(st.range(0)), w = h * 8;
  const auto a = range::synth_scene(7, spec, pc, h, w), b = range::synth_scene(8, spec, pc, h, w);
  for (auto _ : st) benchmark::DoNotOptimize(metrics::chamfer_squared(a, b));
  st.counters["points"] = static_cast<double>(a.size());
}
BENCHMARK(BM_Chamfer)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
