#include "ammlab/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include <json.hpp>

#include "ammlab/errors.hpp"

namespace ammlab {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

nlohmann::json risk_json(const RiskReport& r) {
  return {{"alpha", r.alpha},          {"xi", r.xi},
          {"var", r.var_alpha},        {"cvar", r.cvar_alpha},
          {"prob_above_xi", r.prob_above_xi}, {"mean_return", r.mean_return},
          {"tail_size", r.tail_size}};
}

nlohmann::json result_json(const OptimizeResult& r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& t : r.trace) trace.push_back({{"iteration", t.iteration}, {"theta", to_vector(t.theta)}, {"value", t.value}});
  return {{"theta_hat", to_vector(r.theta_hat.values())},
          {"objective_value", r.objective_value},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"evaluations", r.evaluations},
          {"trace", trace}};
}

}  // namespace

MultiPool default_initial_pools(std::size_t n) { return make_uniform_pools(n, 100.0, 100.0, 100.0, 0.003); }

void validate(const PipelineConfig& config) {
  validate(config.market);
  validate(config.initial_pools);
  validate(config.sqp);
  if (config.initial_pools.size() != config.market.n_pools()) {
    throw DomainError("initial_pools has " + std::to_string(config.initial_pools.size()) +
                      " pools but the market describes " + std::to_string(config.market.n_pools()));
  }
  if (config.n_train == 0) throw DomainError("n_train must be positive");
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (!(config.q >= 0.0 && config.q <= 1.0)) throw DomainError("q must lie in [0, 1]");
  if (!std::isfinite(config.xi)) throw DomainError("xi must be finite");
  if (!std::isfinite(config.x0) || config.x0 <= 0.0) throw DomainError("x0 must be positive");
  if (!std::isfinite(config.ridge_lambda) || config.ridge_lambda < 0.0) throw DomainError("ridge_lambda must be >= 0");
}

InvestmentContext make_context(const PipelineConfig& config) {
  validate(config);
  InvestmentContext ctx;
  ctx.initial = config.initial_pools;
  ctx.x0 = config.x0;
  ctx.params = config.market;
  ctx.stream = config.stream ? config.stream
                             : std::make_shared<const EventStream>(draw_event_stream(config.market, config.workers));
  check_compatible(*ctx.stream, ctx.params, ctx.initial.size());
  ctx.alpha = config.alpha;
  ctx.xi = config.xi;
  ctx.unwind = config.unwind;
  ctx.workers = config.workers;
  return ctx;
}

std::vector<WeightVector> sample_anchors(std::uint64_t master_seed, std::size_t count, std::size_t n) {
  // Tag keeps the anchor stream apart from the per-path market streams.
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                    0x616e6368u, 0x6f727321u};
  std::mt19937_64 rng(seq);
  std::exponential_distribution<double> expo(1.0);
  std::vector<WeightVector> anchors;
  Eigen::VectorXd e(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < count; ++i) {
    for (Eigen::Index j = 0; j < e.size(); ++j) e[j] = expo(rng);
    anchors.emplace_back(e / e.sum());
  }
  return anchors;
}

PipelineReport run_pipeline(const PipelineConfig& config) {
  const auto start = Clock::now();
  const InvestmentContext ctx = make_context(config);
  const double stream_seconds = seconds_since(start);
  PipelineReport report = run_pipeline(config, ctx);
  report.timings.stream_seconds = stream_seconds;
  report.timings.total_seconds = seconds_since(start);
  return report;
}

PipelineReport run_pipeline(const PipelineConfig& config, const InvestmentContext& ctx) {
  validate(config);
  const auto start = Clock::now();
  const std::size_t n = ctx.initial.size();
  PipelineReport report;
  const auto true_cvar = [&ctx](const WeightVector& theta) { return objective(theta, ctx); };

  // Stage 1: dataset and surrogate fit.
  auto t = Clock::now();
  report.min_training_cvar = std::numeric_limits<double>::infinity();
  for (auto& theta : sample_anchors(config.market.master_seed, config.n_train, n)) {
    const double cvar = true_cvar(theta);
    report.min_training_cvar = std::min(report.min_training_cvar, cvar);
    report.dataset.push_back({std::move(theta), cvar});
  }
  report.surrogate = fit(report.dataset, config.ridge_lambda);
  try {
    report.train_r_squared = r_squared(report.surrogate, report.dataset);
  } catch (const DomainError&) {
    report.train_r_squared.reset();
  }
  report.timings.stage1_seconds = seconds_since(t);

  // Stage 2: minimise the surrogate from equal weights.
  t = Clock::now();
  const WeightVector equal = WeightVector::equal(n);
  try {
    report.stage2 = sqp_minimize([&](const WeightVector& theta) { return predict(report.surrogate, theta); }, equal,
                                 config.sqp);
    report.theta_app = report.stage2.theta_hat;
  } catch (const std::exception& e) {
    report.stage2_fallback = true;
    report.stage2_error = e.what();
    std::size_t best = 0;
    for (std::size_t i = 1; i < report.dataset.size(); ++i) {
      if (report.dataset[i].target < report.dataset[best].target) best = i;
    }
    report.theta_app = report.dataset[best].theta;
  }
  report.timings.stage2_seconds = seconds_since(t);

  // Stage 3: direct refinement on the true objective.
  t = Clock::now();
  report.theta_app_cvar = true_cvar(report.theta_app);
  report.equal_weight_cvar = true_cvar(equal);
  report.stage3_start = report.theta_app;
  if (config.guard_stage3_start && report.equal_weight_cvar < report.theta_app_cvar) {
    report.stage3_start = equal;
    report.stage3_started_at_equal_weight = true;
  }
  report.stage3 = sqp_minimize(true_cvar, report.stage3_start, config.sqp);
  report.risk = evaluate_risk(report.stage3.theta_hat, ctx);
  report.constraint_satisfied = report.risk.prob_above_xi > config.q;
  report.timings.stage3_seconds = seconds_since(t);
  report.timings.total_seconds = seconds_since(start);
  return report;
}

AblationReport ablation(const PipelineConfig& config, std::size_t grid_points, std::uint64_t grid_seed) {
  const InvestmentContext ctx = make_context(config);
  const std::size_t n = ctx.initial.size();
  const auto true_cvar = [&ctx](const WeightVector& theta) { return objective(theta, ctx); };
  AblationReport out;
  out.grid_points = grid_points;

  auto t = Clock::now();
  const auto grid = random_grid_search(true_cvar, n, grid_points, grid_seed);
  out.rows.push_back({"grid", grid.theta_hat, evaluate_risk(grid.theta_hat, ctx), grid.converged, seconds_since(t)});

  t = Clock::now();
  const auto pipeline = run_pipeline(config, ctx);
  const double pipeline_seconds = seconds_since(t);
  const double krr_seconds = pipeline.timings.stage1_seconds + pipeline.timings.stage2_seconds;
  out.rows.push_back({"krr", pipeline.theta_app, evaluate_risk(pipeline.theta_app, ctx),
                      !pipeline.stage2_fallback && pipeline.stage2.converged, krr_seconds});

  t = Clock::now();
  const auto sqp = sqp_minimize(true_cvar, WeightVector::equal(n), config.sqp);
  out.rows.push_back({"sqp", sqp.theta_hat, evaluate_risk(sqp.theta_hat, ctx), sqp.converged, seconds_since(t)});

  out.rows.push_back({"pipeline", pipeline.theta_hat(), pipeline.risk, pipeline.stage3.converged, pipeline_seconds});
  return out;
}

void write_ablation_csv(std::ostream& out, const AblationReport& report) {
  const std::size_t n = report.rows.empty() ? 0 : report.rows.front().theta.size();
  out << "method,prob_above_xi,mean_return,var,cvar";
  for (std::size_t j = 0; j < n; ++j) out << ",theta_" << (j + 1);
  out << ",converged,wall_seconds\n";
  const auto old = out.precision(17);
  for (const auto& row : report.rows) {
    out << row.method << ',' << row.risk.prob_above_xi << ',' << row.risk.mean_return << ',' << row.risk.var_alpha
        << ',' << row.risk.cvar_alpha;
    for (std::size_t j = 0; j < row.theta.size(); ++j) out << ',' << row.theta[j];
    out << ',' << (row.converged ? 1 : 0) << ',' << row.wall_seconds << '\n';
  }
  out.precision(old);
}

std::string to_json(const RiskReport& risk) { return risk_json(risk).dump(2); }

std::string to_json(const PipelineReport& report, bool include_timings) {
  nlohmann::json dataset = nlohmann::json::array();
  for (const auto& s : report.dataset) dataset.push_back({{"theta", to_vector(s.theta.values())}, {"cvar", s.target}});

  nlohmann::json j;
  j["stage1"] = {{"dataset", dataset},
                 {"train_r_squared", report.train_r_squared ? nlohmann::json(*report.train_r_squared) : nlohmann::json()},
                 {"min_training_cvar", report.min_training_cvar},
                 {"surrogate", nlohmann::json::parse(to_json(report.surrogate))}};
  j["stage2"] = {{"theta_app", to_vector(report.theta_app.values())},
                 {"theta_app_cvar", report.theta_app_cvar},
                 {"fallback", report.stage2_fallback},
                 {"error", report.stage2_error},
                 {"result", result_json(report.stage2)}};
  j["stage3"] = {{"equal_weight_cvar", report.equal_weight_cvar},
                 {"start", to_vector(report.stage3_start.values())},
                 {"started_at_equal_weight", report.stage3_started_at_equal_weight},
                 {"result", result_json(report.stage3)},
                 {"risk", risk_json(report.risk)},
                 {"constraint_satisfied", report.constraint_satisfied}};
  if (!report.constraint_satisfied) {
    j["warnings"] = {"P[r_T > xi] = " + std::to_string(report.risk.prob_above_xi) + " does not exceed q"};
  }
  if (include_timings) {
    j["timings"] = {{"stream_seconds", report.timings.stream_seconds},
                    {"stage1_seconds", report.timings.stage1_seconds},
                    {"stage2_seconds", report.timings.stage2_seconds},
                    {"stage3_seconds", report.timings.stage3_seconds},
                    {"total_seconds", report.timings.total_seconds}};
  }
  return j.dump(2);
}

}  // namespace ammlab
