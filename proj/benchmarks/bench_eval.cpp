#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "detadapt/eval.hpp"

using namespace detadapt;

namespace {

void BM_Evaluate(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0), jitter(-0.02, 0.02);
  std::uniform_int_distribution<int> cat(0, 9);
  const int images = static_cast<int>(state.range(0));
  std::vector<ImageId> ids;
  std::vector<GroundTruthBox> gts;
  std::vector<ImageDetection> dets;
  for (int i = 0; i < images; ++i) {
    ids.push_back(i);
    for (int k = 0; k < 8; ++k) {
      const double x = 0.7 * u(rng), y = 0.7 * u(rng);
      const BBox b{x, y, x + 0.2, y + 0.2};
      const int c = cat(rng);
      gts.push_back({i, b, c});
      dets.push_back({i, {{b.x1 + jitter(rng) + 0.02, b.y1 + 0.02, b.x2, b.y2}, c, u(rng)}});
      dets.push_back({i, {{x, y, x + 0.1, y + 0.1}, cat(rng), 0.5 * u(rng)}});
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(dets, gts, ids, 10));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(dets.size()));
}
BENCHMARK(BM_Evaluate)->Arg(100)->Arg(1000)->Arg(5000);

void BM_AveragePrecision(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::bernoulli_distribution hit(0.6);
  std::vector<bool> flags(static_cast<std::size_t>(state.range(0)));
  int tp = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) tp += flags[i] = hit(rng);
  for (auto _ : state) benchmark::DoNotOptimize(average_precision(flags, tp + 10));
}
BENCHMARK(BM_AveragePrecision)->Range(64, 1 << 16);

}  // namespace
