#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "detadapt/fusion.hpp"
#include "detadapt/pipeline.hpp"

using namespace detadapt;

namespace {

std::vector<Detection> random_dets(std::mt19937_64& rng, int n, int categories) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> cat(0, categories - 1);
  std::vector<Detection> out;
  for (int i = 0; i < n; ++i) {
    const double w = 0.05 + 0.2 * u(rng), h = 0.05 + 0.2 * u(rng);
    const double x = u(rng) * (1 - w), y = u(rng) * (1 - h);
    out.push_back({{x, y, x + w, y + h}, cat(rng), u(rng)});
  }
  return out;
}

void BM_Nms(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto dets = random_dets(rng, static_cast<int>(state.range(0)), 10);
  for (auto _ : state) benchmark::DoNotOptimize(nms(dets, 0.5));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Nms)->Range(16, 4096);

// One image's predictions from `sources` models, as in a 15-model ensemble.
void BM_Wbf(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const int sources = static_cast<int>(state.range(0));
  std::vector<std::vector<Detection>> lists;
  for (int s = 0; s < sources; ++s) lists.push_back(random_dets(rng, static_cast<int>(state.range(1)), 10));
  FusionConfig cfg;
  cfg.source_count = sources;
  for (auto _ : state) benchmark::DoNotOptimize(wbf(lists, cfg));
  state.SetItemsProcessed(state.iterations() * sources * state.range(1));
}
BENCHMARK(BM_Wbf)->Args({1, 100})->Args({3, 100})->Args({15, 100})->Args({15, 300});

void BM_TtaMerge(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const TtaSpec spec = TtaSpec::multi_scale_flip();
  std::vector<ViewDetections> views;
  for (const GeomTransform& t : spec.views) views.push_back({t, random_dets(rng, 50, 10)});
  for (auto _ : state) benchmark::DoNotOptimize(tta_merge(views, {}));
}
BENCHMARK(BM_TtaMerge);

}  // namespace
