#include "ammlab_cli/runner.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <ostream>

#include <json.hpp>

#include "ammlab/baselines.hpp"
#include "ammlab/pipeline.hpp"

namespace ammlab::cli {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

json result_json(const OptimizeResult& r) {
  return {{"theta_hat", to_vector(r.theta_hat.values())},
          {"objective_value", r.objective_value},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"evaluations", r.evaluations}};
}

}  // namespace

RunOutcome run_method(const RunConfig& config, std::uint64_t seed) {
  PipelineConfig pc = config.pipeline;
  pc.market.master_seed = seed;
  validate(pc);

  const auto start = Clock::now();
  const InvestmentContext ctx = make_context(pc);
  const std::size_t n = ctx.initial.size();
  const auto true_cvar = [&ctx](const WeightVector& theta) { return objective(theta, ctx); };

  RunOutcome out;
  json detail;
  switch (config.method) {
    case Method::pipeline: {
      const PipelineReport report = run_pipeline(pc, ctx);
      out.result = report.stage3;
      detail = json::parse(to_json(report, true));
      break;
    }
    case Method::krr: {
      const PipelineReport report = run_pipeline(pc, ctx);
      out.result = report.stage2;
      out.result.theta_hat = report.theta_app;
      out.result.objective_value = report.theta_app_cvar;
      out.result.converged = !report.stage2_fallback && report.stage2.converged;
      detail = {{"stage2_fallback", report.stage2_fallback}, {"stage2_error", report.stage2_error}};
      break;
    }
    case Method::sqp:
      out.result = sqp_minimize(true_cvar, WeightVector::equal(n), pc.sqp);
      break;
    case Method::grid:
      out.result = random_grid_search(true_cvar, n, config.grid_points, seed);
      detail = {{"grid_points", config.grid_points}};
      break;
    case Method::finatics: {
      FinaticsConfig fc = config.finatics;
      fc.seed = seed;
      out.result = finatics_optimize(fc, ctx);
      break;
    }
    case Method::blanco: {
      const BlancoResult r = blanco_optimize(config.blanco, ctx);
      out.result = r.result;
      detail = {{"omega", r.omega},
                {"raw_weights", to_vector(r.raw_weights)},
                {"final_losses", r.final_losses.l},
                {"l4_fallback", r.final_losses.l4_fallback}};
      break;
    }
    case Method::elagnitram: {
      const ElagnitramResult r = elagnitram_optimize(config.elagnitram, ctx);
      out.result = r.result;
      detail = {{"rejected_steps", r.rejected_steps},
                {"pool_evolution", "exact simulator replay"}};
      break;
    }
  }
  const RiskReport risk = evaluate_risk(out.result.theta_hat, ctx);
  const double wall = seconds_since(start);

  BenchmarkRow& row = out.row;
  row.method = to_string(config.method);
  row.seed = seed;
  row.risk = risk;
  row.theta = to_vector(out.result.theta_hat.values());
  row.wall_seconds = wall;
  row.converged = out.result.converged;

  json report;
  report["config"] = json::parse(dump_run_config(config));
  report["seed"] = seed;
  report["method"] = row.method;
  report["result"] = result_json(out.result);
  report["risk"] = json::parse(to_json(risk));
  report["wall_seconds"] = wall;
  report["hardware"] = config.hardware;
  report["rng"] = kRngAlgorithm;
  if (!detail.is_null()) report["detail"] = detail;
  out.report_json = report.dump(2);
  return out;
}

BenchmarkRow run_row(const RunConfig& config, std::uint64_t seed) {
  try {
    return run_method(config, seed).row;
  } catch (const std::exception& e) {
    BenchmarkRow row;
    row.method = to_string(config.method);
    row.seed = seed;
    row.status = std::string("error: ") + e.what();
    return row;
  }
}

void write_rows_csv_header(std::ostream& out, std::size_t n_pools) {
  out << "method,label,seed,cvar,var,mean_return,prob_above_xi";
  for (std::size_t j = 0; j < n_pools; ++j) out << ",theta_" << (j + 1);
  out << ",wall_seconds,converged,status\n";
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

}  // namespace

void write_row_csv(std::ostream& out, const BenchmarkRow& row) {
  const auto old = out.precision(17);
  out << row.method << ',' << csv_field(row.label) << ',' << row.seed << ',' << row.risk.cvar_alpha << ','
      << row.risk.var_alpha << ',' << row.risk.mean_return << ',' << row.risk.prob_above_xi;
  for (double t : row.theta) out << ',' << t;
  out << ',' << row.wall_seconds << ',' << (row.converged ? 1 : 0) << ',' << csv_field(row.status) << '\n';
  out.precision(old);
}

void write_aggregate_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows) {
  struct Acc {
    std::vector<std::vector<double>> cols;  // cvar, var, mean, prob, wall
    std::size_t failed = 0;
  };
  std::map<std::pair<std::string, std::string>, Acc> groups;
  for (const auto& row : rows) {
    Acc& acc = groups[{row.method, row.label}];
    if (acc.cols.empty()) acc.cols.resize(5);
    if (row.status != "ok") {
      ++acc.failed;
      continue;
    }
    const double v[5] = {row.risk.cvar_alpha, row.risk.var_alpha, row.risk.mean_return, row.risk.prob_above_xi,
                         row.wall_seconds};
    for (int k = 0; k < 5; ++k) acc.cols[k].push_back(v[k]);
  }
  out << "method,label,runs,failed,cvar_mean,cvar_std,var_mean,var_std,mean_return_mean,mean_return_std,"
         "prob_above_xi_mean,prob_above_xi_std,wall_seconds_mean,wall_seconds_std\n";
  const auto old = out.precision(17);
  for (const auto& [key, acc] : groups) {
    out << key.first << ',' << csv_field(key.second) << ',' << acc.cols[0].size() << ',' << acc.failed;
    for (const auto& col : acc.cols) {
      double mean = 0.0;
      for (double x : col) mean += x;
      mean = col.empty() ? std::nan("") : mean / static_cast<double>(col.size());
      double ss = 0.0;
      for (double x : col) ss += (x - mean) * (x - mean);
      const double sd = col.size() > 1 ? std::sqrt(ss / static_cast<double>(col.size() - 1)) : 0.0;
      out << ',' << mean << ',' << sd;
    }
    out << '\n';
  }
  out.precision(old);
}

}  // namespace ammlab::cli
