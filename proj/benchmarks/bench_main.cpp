#include <benchmark/benchmark.h>

#include <vector>

#include "ammlab/lifecycle.hpp"
#include "ammlab/market.hpp"
#include "ammlab/pipeline.hpp"
#include "ammlab/pool.hpp"
#include "ammlab/surrogate.hpp"

namespace {

using namespace ammlab;

PipelineConfig config_with_horizon(double t_horizon) {
  PipelineConfig c;
  c.market.t_horizon = t_horizon;
  return c;
}

void BM_Swap(benchmark::State& state) {
  const PoolState pool{100.0, 100.0, 100.0, 0.003};
  double x = 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(swap_x_to_y(pool, x));
    x = x < 50.0 ? x * 1.01 : 1.0;
  }
}
BENCHMARK(BM_Swap);

void BM_DrawStream(benchmark::State& state) {
  const auto c = config_with_horizon(static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(draw_event_stream(c.market));
}
BENCHMARK(BM_DrawStream)->Arg(40)->Arg(60)->Arg(80)->Unit(benchmark::kMillisecond);

void BM_ReplayCached(benchmark::State& state) {
  const auto c = config_with_horizon(static_cast<double>(state.range(0)));
  const auto stream = draw_event_stream(c.market);
  for (auto _ : state) benchmark::DoNotOptimize(replay(c.initial_pools, stream, c.market));
}
BENCHMARK(BM_ReplayCached)->Arg(40)->Arg(60)->Arg(80)->Unit(benchmark::kMillisecond);

void BM_Objective(benchmark::State& state) {
  const PipelineConfig c;
  const auto ctx = make_context(c);
  const auto theta = WeightVector::equal(c.initial_pools.size());
  for (auto _ : state) benchmark::DoNotOptimize(objective(theta, ctx));
}
BENCHMARK(BM_Objective)->Unit(benchmark::kMillisecond);

void BM_SurrogatePredict(benchmark::State& state) {
  const auto anchors = sample_anchors(1, 11, 6);
  std::vector<TrainingSample> data;
  for (std::size_t i = 0; i + 1 < anchors.size(); ++i) data.push_back({anchors[i], 0.01 * static_cast<double>(i)});
  const auto model = fit(data);
  for (auto _ : state) benchmark::DoNotOptimize(predict(model, anchors.back()));
}
BENCHMARK(BM_SurrogatePredict);

}  // namespace
BENCHMARK_MAIN();
