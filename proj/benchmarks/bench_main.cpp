#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "exitguard/exitguard.hpp"

namespace {

using namespace exitguard;

std::vector<CalibrationPoint> points(std::size_t n) {
  Rng rng({1, 0});
  std::vector<CalibrationPoint> out(n);
  for (auto& p : out) {
    p.score = rng.uniform();
    p.error = rng.uniform() < p.score;
  }
  return out;
}

void BM_CrcThreshold(benchmark::State& state) {
  const auto pts = points(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(crc_threshold(pts, 0.05));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_CrcThreshold)->RangeMultiplier(4)->Range(64, 1 << 16)->Complexity();

std::vector<ExitRecord> records(std::size_t n, std::size_t k, std::size_t c) {
  Rng rng({2, 0});
  std::vector<ExitRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    LogitMatrix z(k, c);
    for (std::size_t j = 0; j < k; ++j) {
      for (auto& v : z.row(j)) v = 3.0 * rng.normal();
    }
    out.push_back({"r" + std::to_string(i), rng.below(c), std::move(z)});
  }
  return out;
}

void BM_EvaluatePolicy(benchmark::State& state) {
  const auto recs = records(static_cast<std::size_t>(state.range(0)), 3, 10);
  const auto schedule = calibrate_all_exits(recs, 0.1);
  const auto cost = CostModel::normalized_depth(3);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_policy(recs, schedule, cost));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EvaluatePolicy)->Arg(1000)->Arg(10000);

void BM_ForwardBackward(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  const auto model = MultiExitMlp::initialized({8, {width, width, width}, 3}, {3, 3});
  std::vector<double> x(8, 0.5), grad(model.parameter_count());
  const std::vector<std::vector<double>> dz(3, std::vector<double>(3, 0.1));
  for (auto _ : state) {
    const auto cache = model.forward_cached(x);
    model.backward(cache, dz, grad);
    benchmark::DoNotOptimize(grad.data());
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(16)->Arg(64)->Arg(256);

void BM_TotalLoss(benchmark::State& state) {
  Rng rng({4, 0});
  std::vector<std::vector<double>> s(3, std::vector<double>(10)), t = s;
  for (auto& row : s) for (double& v : row) v = rng.normal();
  for (auto& row : t) for (double& v : row) v = rng.normal();
  const LossConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(total_loss(s, t, 3, cfg));
}
BENCHMARK(BM_TotalLoss);

}  // namespace
BENCHMARK_MAIN();
