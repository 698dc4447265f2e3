#include <gtest/gtest.h>

#include <sstream>

#include <json.hpp>

#include "ammlab/errors.hpp"
#include "ammlab/pipeline.hpp"

using namespace ammlab;

namespace {

PipelineConfig small_config(std::uint64_t seed) {
  PipelineConfig c;
  c.market.master_seed = seed;
  c.market.b_paths = 200;
  c.market.t_horizon = 20.0;
  return c;
}

}  // namespace

TEST(PipelineConfig, Defaults) {
  const PipelineConfig c;
  EXPECT_EQ(c.n_train, 10u);
  EXPECT_EQ(c.alpha, 0.9);
  EXPECT_EQ(c.xi, 0.05);
  EXPECT_EQ(c.q, 0.8);
  EXPECT_EQ(c.initial_pools.size(), 6u);
  EXPECT_EQ(c.initial_pools[0], (PoolState{100, 100, 100, 0.003}));
  EXPECT_NO_THROW(validate(c));
}

TEST(PipelineConfig, Rejections) {
  PipelineConfig c;
  c.n_train = 0;
  EXPECT_THROW(validate(c), DomainError);
  c = PipelineConfig{};
  c.initial_pools.pop_back();
  EXPECT_ANY_THROW(validate(c));
  c = PipelineConfig{};
  c.alpha = 1.0;
  EXPECT_THROW(validate(c), DomainError);
}

TEST(SampleAnchors, ReproducibleAndPrefixStable) {
  const auto a = sample_anchors(7, 10, 6);
  const auto b = sample_anchors(7, 10, 6);
  const auto c = sample_anchors(7, 4, 6);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(a[i].values(), b[i].values());
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a[i].values(), c[i].values());
  EXPECT_NE(a[0].values(), sample_anchors(8, 1, 6)[0].values());
}

TEST(RunPipeline, ZeroFeeEmptyStreamStaysAtStart) {
  PipelineConfig c = small_config(1);
  c.initial_pools = make_uniform_pools(6, 100, 100, 100, 0.0);
  auto s = std::make_shared<EventStream>();
  s->n_pools = 6;
  s->params_hash = stream_params_hash(c.market);
  s->paths.resize(c.market.b_paths);
  c.stream = s;
  const PipelineReport r = run_pipeline(c);
  EXPECT_TRUE(r.stage3.converged);
  EXPECT_LE(std::abs(r.stage3.objective_value), 1e-10);
  EXPECT_EQ(r.theta_hat().values(), r.stage3_start.values());
}

TEST(RunPipeline, DeterministicAcrossRunsAndWorkers) {
  PipelineConfig c = small_config(3);
  const PipelineReport a = run_pipeline(c);
  c.workers = 3;
  const PipelineReport b = run_pipeline(c);
  EXPECT_EQ(to_json(a, false), to_json(b, false));
}

TEST(RunPipeline, RefinementNeverHurts) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const PipelineReport r = run_pipeline(small_config(seed));
    EXPECT_LE(r.risk.cvar_alpha, r.theta_app_cvar + 1e-8);
    EXPECT_LE(r.risk.cvar_alpha, r.equal_weight_cvar + 1e-8);
    EXPECT_EQ(r.risk.cvar_alpha, r.stage3.objective_value);
    EXPECT_EQ(r.dataset.size(), 10u);
    const double start = r.stage3_started_at_equal_weight ? r.equal_weight_cvar : r.theta_app_cvar;
    EXPECT_EQ(r.stage3.trace.front().value, start);
  }
}

TEST(RunPipeline, GuardOffStartsAtSurrogateMinimiser) {
  PipelineConfig c = small_config(2);
  c.guard_stage3_start = false;
  const PipelineReport r = run_pipeline(c);
  EXPECT_FALSE(r.stage3_started_at_equal_weight);
  EXPECT_EQ(r.stage3_start.values(), r.theta_app.values());
  EXPECT_LE(r.risk.cvar_alpha, r.theta_app_cvar + 1e-8);
}

TEST(RunPipeline, ReportJsonHasStages) {
  const PipelineReport r = run_pipeline(small_config(4));
  const auto j = nlohmann::json::parse(to_json(r));
  EXPECT_TRUE(j.contains("stage1"));
  EXPECT_TRUE(j.contains("stage2"));
  EXPECT_TRUE(j.contains("stage3"));
  EXPECT_TRUE(j.contains("timings"));
  EXPECT_FALSE(nlohmann::json::parse(to_json(r, false)).contains("timings"));
}

TEST(Ablation, FourRowsOnOneStream) {
  const PipelineConfig c = small_config(5);
  const AblationReport r = ablation(c, 200, 1);
  ASSERT_EQ(r.rows.size(), 4u);
  EXPECT_EQ(r.rows[0].method, "grid");
  EXPECT_EQ(r.rows[1].method, "krr");
  EXPECT_EQ(r.rows[2].method, "sqp");
  EXPECT_EQ(r.rows[3].method, "pipeline");
  EXPECT_LE(r.rows[3].risk.cvar_alpha, r.rows[1].risk.cvar_alpha + 1e-8);
  std::ostringstream out;
  write_ablation_csv(out, r);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')),
            "method,prob_above_xi,mean_return,var,cvar,theta_1,theta_2,theta_3,theta_4,theta_5,theta_6,converged,"
            "wall_seconds");
}
