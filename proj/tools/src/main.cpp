#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ammlab/market.hpp"
#include "ammlab/parallel.hpp"
#include "ammlab/pipeline.hpp"
#include "ammlab_cli/run_config.hpp"
#include "ammlab_cli/runner.hpp"

namespace fs = std::filesystem;
using namespace ammlab;
using namespace ammlab::cli;

namespace {

constexpr int kExitConverged = 0;
constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;

struct Overrides {
  std::string config_path;
  std::string seeds;
  std::string method;
  std::string out;
  std::string stream_out;
  unsigned workers = 0;
  bool workers_set = false;
  std::size_t grid_points = 0;
  double t_horizon = 0.0;
  double alpha = 0.0;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON config file (defaults to the Challenge setup)");
  cmd->add_option("--seed,--seeds", o.seeds, "seed, list '1,2,5' or range '1-10'");
  cmd->add_option("--method", o.method, "pipeline|krr|sqp|grid|finatics|blanco|elagnitram");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--workers", o.workers, "worker threads, 0 = all")->each([&o](const std::string&) {
    o.workers_set = true;
  });
  cmd->add_option("--grid-points", o.grid_points, "grid search sample count");
  cmd->add_option("--t-horizon", o.t_horizon, "market horizon T");
  cmd->add_option("--alpha", o.alpha, "CVaR confidence level");
  cmd->add_option("--stream-out", o.stream_out, "also write the drawn event stream here");
}

RunConfig effective_config(const Overrides& o) {
  RunConfig c = o.config_path.empty() ? default_run_config() : load_run_config(o.config_path);
  if (!o.seeds.empty()) c.seeds = parse_seed_list(o.seeds);
  if (!o.method.empty()) c.method = parse_method(o.method);
  if (!o.out.empty()) c.out_dir = o.out;
  if (!o.stream_out.empty()) c.stream_out = o.stream_out;
  if (o.workers_set) c.pipeline.workers = o.workers;
  if (o.grid_points > 0) c.grid_points = o.grid_points;
  if (o.t_horizon > 0.0) c.pipeline.market.t_horizon = o.t_horizon;
  if (o.alpha > 0.0) c.pipeline.alpha = o.alpha;
  validate(c.pipeline);
  return c;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

void save_stream_if_requested(const RunConfig& c, std::uint64_t seed) {
  if (c.stream_out.empty()) return;
  MarketParams p = c.pipeline.market;
  p.master_seed = seed;
  save_event_stream(c.stream_out, draw_event_stream(p, resolve_workers(c.pipeline.workers)));
}

int cmd_optimize(const RunConfig& c) {
  const std::uint64_t seed = c.seeds.front();
  fs::create_directories(c.out_dir);
  const RunOutcome run = run_method(c, seed);
  open_out(fs::path(c.out_dir) / "report.json") << run.report_json << '\n';
  {
    auto f = open_out(fs::path(c.out_dir) / "summary.csv");
    write_rows_csv_header(f, run.row.theta.size());
    write_row_csv(f, run.row);
  }
  {
    auto f = open_out(fs::path(c.out_dir) / "trace.csv");
    write_trace_csv(f, run.result);
  }
  save_stream_if_requested(c, seed);
  std::cout << std::setprecision(6) << run.row.method << " seed=" << seed << " cvar=" << run.row.risk.cvar_alpha
            << " P=" << run.row.risk.prob_above_xi << " mean=" << run.row.risk.mean_return << " converged="
            << (run.row.converged ? "yes" : "no") << " wall=" << run.row.wall_seconds << "s\n";
  return run.row.converged ? kExitConverged : kExitNotConverged;
}

struct SweepPoint {
  std::string label;
  RunConfig config;
};

std::vector<SweepPoint> sweep_points(const RunConfig& base, const std::string& axis, const std::string& values,
                                     std::size_t sigma_index) {
  std::vector<SweepPoint> points;
  if (axis == "seed") {
    points.push_back({"", base});
    return points;
  }
  if (values.empty()) throw ConfigError("--values is required for axis '" + axis + "'");
  std::stringstream ss(values);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    double v = 0.0;
    try {
      v = std::stod(item);
    } catch (const std::logic_error&) {
      throw ConfigError("malformed sweep value '" + item + "'");
    }
    RunConfig c = base;
    if (axis == "t_horizon") {
      c.pipeline.market.t_horizon = v;
    } else if (axis == "alpha") {
      c.pipeline.alpha = v;
    } else if (axis == "sigma") {
      if (sigma_index == 0 || sigma_index >= c.pipeline.market.sigma.size()) {
        throw ConfigError("--sigma-index must name a pool in 1.." +
                          std::to_string(c.pipeline.market.sigma.size() - 1));
      }
      c.pipeline.market.sigma[sigma_index] = v;
    } else {
      throw ConfigError("unknown sweep axis '" + axis + "' (seed|t_horizon|alpha|sigma)");
    }
    validate(c.pipeline);
    points.push_back({axis + "=" + item, c});
  }
  if (points.empty()) throw ConfigError("no sweep values given");
  return points;
}

int cmd_sweep(RunConfig base, const std::string& axis, const std::string& values, std::size_t sigma_index,
              const std::string& methods) {
  std::vector<Method> method_list{base.method};
  if (!methods.empty()) {
    method_list.clear();
    std::stringstream ss(methods);
    for (std::string m; std::getline(ss, m, ',');) method_list.push_back(parse_method(m));
  }
  const unsigned workers = resolve_workers(base.pipeline.workers);
  base.pipeline.workers = 1;
  const auto points = sweep_points(base, axis, values, sigma_index);

  struct Job {
    std::size_t point;
    Method method;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t p = 0; p < points.size(); ++p) {
    for (Method m : method_list) {
      for (std::uint64_t s : base.seeds) jobs.push_back({p, m, s});
    }
  }
  std::vector<BenchmarkRow> rows(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t i) {
    RunConfig c = points[jobs[i].point].config;
    c.method = jobs[i].method;
    rows[i] = run_row(c, jobs[i].seed);
    rows[i].label = points[jobs[i].point].label;
  });
  std::sort(rows.begin(), rows.end(), [](const BenchmarkRow& a, const BenchmarkRow& b) {
    return std::tie(a.method, a.label, a.seed) < std::tie(b.method, b.label, b.seed);
  });

  fs::create_directories(base.out_dir);
  {
    auto f = open_out(fs::path(base.out_dir) / "sweep.csv");
    write_rows_csv_header(f, base.pipeline.initial_pools.size());
    for (const auto& r : rows) write_row_csv(f, r);
  }
  {
    auto f = open_out(fs::path(base.out_dir) / "aggregate.csv");
    write_aggregate_csv(f, rows);
  }
  open_out(fs::path(base.out_dir) / "config.json") << dump_run_config(base) << '\n';
  write_aggregate_csv(std::cout, rows);
  const bool failed = std::any_of(rows.begin(), rows.end(), [](const BenchmarkRow& r) { return r.status != "ok"; });
  return failed ? kExitError : kExitConverged;
}

int cmd_simulate(const RunConfig& c, std::size_t max_paths) {
  const std::uint64_t seed = c.seeds.front();
  MarketParams p = c.pipeline.market;
  p.master_seed = seed;
  const unsigned workers = resolve_workers(c.pipeline.workers);
  const EventStream stream = draw_event_stream(p, workers);
  const PathRecord record = replay(c.pipeline.initial_pools, stream, p, workers);
  if (!c.stream_out.empty()) save_event_stream(c.stream_out, stream);

  fs::create_directories(c.out_dir);
  auto f = open_out(fs::path(c.out_dir) / "trajectory.csv");
  const std::size_t n = c.pipeline.initial_pools.size();
  f << "path,event,type,x_to_y";
  for (std::size_t j = 1; j <= n; ++j) f << ",rx_" << j << ",ry_" << j << ",price_" << j << ",volume_" << j;
  f << '\n';
  f.precision(17);
  const std::size_t paths = std::min(max_paths, record.paths.size());
  for (std::size_t b = 0; b < paths; ++b) {
    f << b << ",0,,";
    for (const auto& pool : c.pipeline.initial_pools) {
      f << ',' << pool.rx << ',' << pool.ry << ',' << marginal_price(pool) << ",0";
    }
    f << '\n';
    const PathTrajectory& t = record.paths[b];
    const PathEvents& ev = stream.paths[b];
    for (std::size_t e = 0; e < ev.size(); ++e) {
      f << b << ',' << (e + 1) << ',' << int(ev.types[e]) << ',' << int(ev.x_to_y[e]);
      for (std::size_t j = 0; j < n; ++j) {
        const double rx = t.rx[e * n + j];
        const double ry = t.ry[e * n + j];
        f << ',' << rx << ',' << ry << ',' << rx / ry << ',' << t.volumes[e * n + j];
      }
      f << '\n';
    }
  }
  std::cout << "wrote " << paths << " path(s) to " << (fs::path(c.out_dir) / "trajectory.csv").string() << '\n';
  return kExitConverged;
}

int cmd_ablate(const RunConfig& c) {
  PipelineConfig pc = c.pipeline;
  const std::uint64_t seed = c.seeds.front();
  pc.market.master_seed = seed;
  const AblationReport report = ablation(pc, c.grid_points, seed);
  fs::create_directories(c.out_dir);
  {
    auto f = open_out(fs::path(c.out_dir) / "ablation.csv");
    write_ablation_csv(f, report);
  }
  open_out(fs::path(c.out_dir) / "config.json") << dump_run_config(c) << '\n';
  save_stream_if_requested(c, seed);
  write_ablation_csv(std::cout, report);
  return kExitConverged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ammlab: CVaR-minimising liquidity allocation across constant-product pools"};
  app.require_subcommand(1);

  Overrides o;
  auto* optimize = app.add_subcommand("optimize", "run one method on one seed");
  add_common(optimize, o);

  std::string axis = "seed";
  std::string values;
  std::string methods;
  std::size_t sigma_index = 0;
  auto* sweep = app.add_subcommand("sweep", "run methods over seeds and one parameter axis");
  add_common(sweep, o);
  sweep->add_option("--axis", axis, "seed|t_horizon|alpha|sigma");
  sweep->add_option("--values", values, "comma-separated axis values");
  sweep->add_option("--sigma-index", sigma_index, "pool index (1-based) for the sigma axis");
  sweep->add_option("--methods", methods, "comma-separated methods (defaults to --method)");

  std::size_t max_paths = 1;
  auto* simulate = app.add_subcommand("simulate", "write per-event pool trajectories");
  add_common(simulate, o);
  simulate->add_option("--paths", max_paths, "number of paths written to the trajectory file");

  auto* ablate = app.add_subcommand("ablate", "grid, surrogate only, direct SQP and pipeline on one stream");
  add_common(ablate, o);

  auto* config = app.add_subcommand("config", "configuration utilities");
  config->require_subcommand(1);
  auto* dump = config->add_subcommand("dump", "print the effective configuration");
  add_common(dump, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  try {
    const RunConfig c = effective_config(o);
    if (optimize->parsed()) return cmd_optimize(c);
    if (sweep->parsed()) return cmd_sweep(c, axis, values, sigma_index, methods);
    if (simulate->parsed()) return cmd_simulate(c, max_paths);
    if (ablate->parsed()) return cmd_ablate(c);
    if (dump->parsed()) {
      std::cout << dump_run_config(c) << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
