#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ammlab/lifecycle.hpp"
#include "ammlab/market.hpp"
#include "ammlab/optimizer.hpp"
#include "ammlab/surrogate.hpp"

namespace ammlab {

/// Pools used when a configuration does not give any: rx = ry = L = 100,
/// phi = 0.003.
MultiPool default_initial_pools(std::size_t n);

struct PipelineConfig {
  std::size_t n_train = 10;
  double alpha = 0.9;
  double xi = 0.05;
  double q = 0.8;
  MarketParams market = challenge_market_params();
  MultiPool initial_pools = default_initial_pools(6);
  double x0 = 10.0;
  double ridge_lambda = kDefaultRidgeLambda;
  SqpConfig sqp;
  UnwindRule unwind = UnwindRule::optimal_split;
  unsigned workers = 1;
  /// Start the direct refinement from equal weights instead of theta_app when
  /// equal weights already score a lower CVaR.
  bool guard_stage3_start = true;
  /// Replayed instead of drawing a stream from `market` when set.
  std::shared_ptr<const EventStream> stream;
};

void validate(const PipelineConfig& config);

/// Context sharing one event stream; draws it unless config.stream is set.
InvestmentContext make_context(const PipelineConfig& config);

/// Flat-Dirichlet anchors; depend only on (master_seed, count, n).
std::vector<WeightVector> sample_anchors(std::uint64_t master_seed, std::size_t count, std::size_t n);

struct StageTimings {
  double stream_seconds = 0.0;
  double stage1_seconds = 0.0;
  double stage2_seconds = 0.0;
  double stage3_seconds = 0.0;
  double total_seconds = 0.0;
};

struct PipelineReport {
  // Stage 1.
  std::vector<TrainingSample> dataset;
  SurrogateModel surrogate;
  std::optional<double> train_r_squared;  ///< unset when every target is equal
  double min_training_cvar = 0.0;

  // Stage 2.
  OptimizeResult stage2;
  WeightVector theta_app = WeightVector::equal(1);
  double theta_app_cvar = 0.0;
  bool stage2_fallback = false;  ///< surrogate solve failed; best anchor used
  std::string stage2_error;

  // Stage 3.
  double equal_weight_cvar = 0.0;
  WeightVector stage3_start = WeightVector::equal(1);
  bool stage3_started_at_equal_weight = false;
  OptimizeResult stage3;
  RiskReport risk;
  bool constraint_satisfied = false;  ///< P[r_T > xi] > q at theta_hat

  StageTimings timings;

  const WeightVector& theta_hat() const { return stage3.theta_hat; }
};

/// Three stages on one shared stream: CVaR at n_train random anchors and a
/// kernel ridge fit; SQP on the surrogate from equal weights; SQP on the true
/// CVaR from the surrogate minimiser.
PipelineReport run_pipeline(const PipelineConfig& config);

/// Same as run_pipeline but on an existing context (stream already drawn).
PipelineReport run_pipeline(const PipelineConfig& config, const InvestmentContext& ctx);

struct AblationRow {
  std::string method;
  WeightVector theta = WeightVector::equal(1);
  RiskReport risk;
  bool converged = false;
  double wall_seconds = 0.0;
};

struct AblationReport {
  std::vector<AblationRow> rows;  ///< grid, krr, sqp, pipeline
  std::size_t grid_points = 0;
};

/// Grid search, surrogate only, SQP from equal weights and the full pipeline,
/// all on the same stream.
AblationReport ablation(const PipelineConfig& config, std::size_t grid_points = 10000, std::uint64_t grid_seed = 0);

/// Columns: method, P[r_T>xi], E[r_T], VaR, CVaR, theta_1..theta_n.
void write_ablation_csv(std::ostream& out, const AblationReport& report);

std::string to_json(const PipelineReport& report, bool include_timings = true);
std::string to_json(const RiskReport& risk);

}  // namespace ammlab
