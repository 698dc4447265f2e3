#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ammlab_cli/run_config.hpp"
#include "ammlab_cli/runner.hpp"

namespace fs = std::filesystem;
using namespace ammlab;
using namespace ammlab::cli;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ammlab_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_tool(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(AMMLAB_TOOL_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::vector<double>> read_numeric_csv(const fs::path& p, std::vector<std::string>& header) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  header.clear();
  std::stringstream hs(line);
  for (std::string h; std::getline(hs, h, ',');) header.push_back(h);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      row.push_back(c.empty() || *end != '\0' ? std::nan("") : v);
    }
    rows.push_back(row);
  }
  return rows;
}

std::string strip_wall(const std::string& report) {
  auto j = nlohmann::json::parse(report);
  j.erase("wall_seconds");
  j["config"]["output"].erase("dir");
  return j.dump();
}

}  // namespace

TEST(RunConfig, DefaultsAreChallengeSetup) {
  const RunConfig c = default_run_config();
  EXPECT_EQ(c.pipeline.market.kappa, (std::vector<double>{0.25, 0.5, 0.5, 0.45, 0.45, 0.4, 0.3}));
  EXPECT_EQ(c.pipeline.market.p, (std::vector<double>{0.45, 0.45, 0.4, 0.38, 0.36, 0.34, 0.3}));
  EXPECT_EQ(c.pipeline.market.sigma, (std::vector<double>{1, 0.3, 0.5, 1, 1.25, 2, 4}));
  EXPECT_EQ(c.pipeline.market.t_horizon, 60.0);
  EXPECT_EQ(c.pipeline.market.b_paths, 1000u);
  EXPECT_EQ(c.pipeline.alpha, 0.9);
  EXPECT_EQ(c.pipeline.xi, 0.05);
  EXPECT_EQ(c.pipeline.q, 0.8);
  EXPECT_FALSE(c.seeds.empty());
}

TEST(RunConfig, DumpRoundTrips) {
  RunConfig c = default_run_config();
  c.method = Method::elagnitram;
  c.seeds = {3, 9};
  c.pipeline.market.t_horizon = 40;
  c.pipeline.initial_pools[2].phi = 0.01;
  c.blanco.omega = std::array<double, 4>{1, 2, 3, 4};
  c.finatics.theta0 = WeightVector::equal(6);
  const std::string text = dump_run_config(c);
  EXPECT_EQ(dump_run_config(parse_run_config(text)), text);
}

TEST(RunConfig, ShippedConfigParses) {
  const RunConfig c = load_run_config(std::string(AMMLAB_CONFIG_DIR) + "/challenge.json");
  EXPECT_EQ(c.pipeline.market.kappa, default_run_config().pipeline.market.kappa);
}

TEST(RunConfig, MissingKappaNamesField) {
  auto j = nlohmann::json::parse(dump_run_config(default_run_config()));
  j["market"].erase("kappa");
  try {
    parse_run_config(j.dump());
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("market.kappa"), std::string::npos);
  }
}

TEST(RunConfig, WrongTypeAndBadJson) {
  EXPECT_THROW(parse_run_config("{"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"market": {"kappa": "x", "p": [], "sigma": []}})"), ConfigError);
  auto j = nlohmann::json::parse(dump_run_config(default_run_config()));
  j["seeds"] = nlohmann::json::array();
  EXPECT_THROW(parse_run_config(j.dump()), ConfigError);
  j = nlohmann::json::parse(dump_run_config(default_run_config()));
  j["method"] = "newton";
  EXPECT_THROW(parse_run_config(j.dump()), ConfigError);
}

TEST(RunConfig, MinimalConfigFillsDefaults) {
  const RunConfig c =
      parse_run_config(R"({"market": {"kappa": [0.1, 0.2], "p": [0.5, 0.5], "sigma": [1, 1]}})");
  EXPECT_EQ(c.pipeline.initial_pools.size(), 1u);
  EXPECT_EQ(c.pipeline.market.b_paths, 1000u);
}

TEST(SeedList, Forms) {
  EXPECT_EQ(parse_seed_list("7"), (std::vector<std::uint64_t>{7}));
  EXPECT_EQ(parse_seed_list("1,2,5"), (std::vector<std::uint64_t>{1, 2, 5}));
  EXPECT_EQ(parse_seed_list("3-5,9"), (std::vector<std::uint64_t>{3, 4, 5, 9}));
  EXPECT_THROW(parse_seed_list(""), ConfigError);
  EXPECT_THROW(parse_seed_list("5-3"), ConfigError);
  EXPECT_THROW(parse_seed_list("x"), ConfigError);
}

TEST(Methods, NamesRoundTrip) {
  for (Method m : all_methods()) EXPECT_EQ(parse_method(to_string(m)), m);
  EXPECT_EQ(all_methods().size(), 7u);
}

TEST(Runner, RowMatchesRiskReport) {
  RunConfig c = default_run_config();
  c.pipeline.market.b_paths = 100;
  c.method = Method::grid;
  c.grid_points = 20;
  const RunOutcome out = run_method(c, 11);
  PipelineConfig pc = c.pipeline;
  pc.market.master_seed = 11;
  const RiskReport r = evaluate_risk(out.result.theta_hat, make_context(pc));
  EXPECT_EQ(out.row.risk.cvar_alpha, r.cvar_alpha);
  EXPECT_EQ(out.row.risk.var_alpha, r.var_alpha);
  EXPECT_EQ(out.row.risk.mean_return, r.mean_return);
  EXPECT_EQ(out.row.risk.prob_above_xi, r.prob_above_xi);
  EXPECT_EQ(out.row.theta.size(), 6u);
  EXPECT_TRUE(nlohmann::json::parse(out.report_json).contains("config"));
}

TEST(Runner, FailuresBecomeRows) {
  RunConfig c = default_run_config();
  c.pipeline.market.b_paths = 20;
  c.finatics.eta = -1.0;
  c.method = Method::finatics;
  const BenchmarkRow row = run_row(c, 1);
  EXPECT_NE(row.status.find("error"), std::string::npos);
}

TEST(Runner, AggregateMeanAndStd) {
  std::vector<BenchmarkRow> rows(3);
  for (int i = 0; i < 3; ++i) {
    rows[static_cast<std::size_t>(i)].method = "sqp";
    rows[static_cast<std::size_t>(i)].risk.cvar_alpha = i + 1.0;
  }
  rows[2].status = "error: x";
  std::ostringstream out;
  write_aggregate_csv(out, rows);
  std::istringstream in(out.str());
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  EXPECT_EQ(line.rfind("sqp,,2,1,1.5,0.7071067811865", 0), 0u) << line;
}

TEST(Tool, MissingKappaExitsOne) {
  const fs::path dir = scratch("kappa");
  auto j = nlohmann::json::parse(dump_run_config(default_run_config()));
  j["market"].erase("kappa");
  std::ofstream(dir / "bad.json") << j.dump();
  EXPECT_EQ(run_tool("optimize --config " + (dir / "bad.json").string(), dir / "log"), 1);
  EXPECT_NE(read_file(dir / "log").find("market.kappa"), std::string::npos);
}

TEST(Tool, ConfigDumpRoundTrips) {
  const fs::path dir = scratch("dump");
  ASSERT_EQ(run_tool("config dump --seeds 1-3 --t-horizon 40", dir / "a.json"), 0);
  ASSERT_EQ(run_tool("config dump --config " + (dir / "a.json").string(), dir / "b.json"), 0);
  EXPECT_EQ(read_file(dir / "a.json"), read_file(dir / "b.json"));
  EXPECT_EQ(load_run_config((dir / "a.json").string()).seeds, (std::vector<std::uint64_t>{1, 2, 3}));
}

TEST(Tool, GridRunsAreReproducible) {
  const fs::path dir = scratch("grid");
  const std::string args = "optimize --method grid --grid-points 100 --seed 7 --out ";
  ASSERT_EQ(run_tool(args + (dir / "a").string(), dir / "log_a"), 0);
  ASSERT_EQ(run_tool(args + (dir / "b").string(), dir / "log_b"), 0);
  EXPECT_EQ(read_file(dir / "a" / "trace.csv"), read_file(dir / "b" / "trace.csv"));
  EXPECT_EQ(strip_wall(read_file(dir / "a" / "report.json")), strip_wall(read_file(dir / "b" / "report.json")));
  std::vector<std::string> ha, hb;
  auto ra = read_numeric_csv(dir / "a" / "summary.csv", ha);
  auto rb = read_numeric_csv(dir / "b" / "summary.csv", hb);
  ASSERT_EQ(ha, hb);
  const auto wall = static_cast<std::size_t>(std::find(ha.begin(), ha.end(), "wall_seconds") - ha.begin());
  ra[0][wall] = rb[0][wall] = 0;
  for (std::size_t k = 3; k < ra[0].size() - 1; ++k) EXPECT_EQ(ra[0][k], rb[0][k]) << ha[k];
}

TEST(Tool, SimulateEmptyPathWritesInitialRowOnly) {
  const fs::path dir = scratch("empty");
  auto j = nlohmann::json::parse(dump_run_config(default_run_config()));
  j["market"]["kappa"] = {1e-12, 1e-12, 1e-12, 1e-12, 1e-12, 1e-12, 1e-12};
  j["market"]["b_paths"] = 1;
  std::ofstream(dir / "c.json") << j.dump();
  ASSERT_EQ(run_tool("simulate --config " + (dir / "c.json").string() + " --out " + dir.string(), dir / "log"), 0);
  std::vector<std::string> header;
  const auto rows = read_numeric_csv(dir / "trajectory.csv", header);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0][4], 100.0);
}

TEST(Tool, SimulatePriceColumnIsReserveRatio) {
  const fs::path dir = scratch("price");
  ASSERT_EQ(run_tool("simulate --seed 5 --paths 3 --stream-out " + (dir / "s.bin").string() + " --out " +
                         dir.string(),
                     dir / "log"),
            0);
  EXPECT_TRUE(fs::exists(dir / "s.bin"));
  std::vector<std::string> header;
  const auto rows = read_numeric_csv(dir / "trajectory.csv", header);
  ASSERT_GT(rows.size(), 10u);
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < 6; ++j) ASSERT_EQ(row[6 + 4 * j], row[4 + 4 * j] / row[5 + 4 * j]);
  }
}

TEST(Tool, DoublingSigmaRaisesLogPriceVariance) {
  const fs::path dir = scratch("sigma");
  auto j = nlohmann::json::parse(dump_run_config(default_run_config()));
  std::ofstream(dir / "base.json") << j.dump();
  for (auto& s : j["market"]["sigma"]) s = s.get<double>() * 2.0;
  std::ofstream(dir / "wide.json") << j.dump();
  const auto variance = [&](const std::string& name) {
    EXPECT_EQ(run_tool("simulate --seed 21 --paths 20 --config " + (dir / (name + ".json")).string() + " --out " +
                           (dir / name).string(),
                       dir / "log"),
              0);
    std::vector<std::string> header;
    const auto rows = read_numeric_csv(dir / name / "trajectory.csv", header);
    double sum = 0.0, sq = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 1; k < rows.size(); ++k) {
      if (rows[k][1] == 0.0) continue;
      for (std::size_t p = 0; p < 6; ++p) {
        const double d = std::log(rows[k][6 + 4 * p]) - std::log(rows[k - 1][6 + 4 * p]);
        sum += d;
        sq += d * d;
        ++count;
      }
    }
    const double mean = sum / static_cast<double>(count);
    return sq / static_cast<double>(count) - mean * mean;
  };
  EXPECT_GT(variance("wide"), variance("base"));
}

TEST(Tool, SweepWritesSortedRowsAndAggregate) {
  const fs::path dir = scratch("sweep");
  auto j = nlohmann::json::parse(dump_run_config(default_run_config()));
  j["market"]["b_paths"] = 50;
  std::ofstream(dir / "c.json") << j.dump();
  ASSERT_EQ(run_tool("sweep --config " + (dir / "c.json").string() +
                         " --axis alpha --values 0.85,0.9 --seeds 2,1 --methods grid,sqp --grid-points 10 --workers 2 "
                         "--out " + dir.string(),
                     dir / "log"),
            0);
  std::ifstream in(dir / "sweep.csv");
  std::string line;
  std::getline(in, line);
  std::vector<std::string> keys;
  while (std::getline(in, line)) keys.push_back(line.substr(0, line.find(',', line.find(',', line.find(',') + 1) + 1)));
  EXPECT_EQ(keys, (std::vector<std::string>{"grid,alpha=0.85,1", "grid,alpha=0.85,2", "grid,alpha=0.9,1",
                                            "grid,alpha=0.9,2", "sqp,alpha=0.85,1", "sqp,alpha=0.85,2",
                                            "sqp,alpha=0.9,1", "sqp,alpha=0.9,2"}));
  EXPECT_TRUE(fs::exists(dir / "aggregate.csv"));
}
