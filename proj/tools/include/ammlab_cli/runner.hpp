#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ammlab/lifecycle.hpp"
#include "ammlab/optimizer.hpp"
#include "ammlab_cli/run_config.hpp"

namespace ammlab::cli {

/// One (method, seed) run. Risk fields are copied from the RiskReport of
/// theta_hat on the run's stream.
struct BenchmarkRow {
  std::string method;
  std::uint64_t seed = 0;
  std::string label;  ///< sweep axis value, empty outside sweeps
  RiskReport risk;
  std::vector<double> theta;
  double wall_seconds = 0.0;
  bool converged = false;
  std::string status = "ok";  ///< "ok" or "error: <message>"
};

struct RunOutcome {
  BenchmarkRow row;
  OptimizeResult result;  ///< carries the trace
  std::string report_json;
};

/// Runs `config.method` on the market drawn from `seed`. Errors propagate.
RunOutcome run_method(const RunConfig& config, std::uint64_t seed);

/// Same, but failures become a row with an error status.
BenchmarkRow run_row(const RunConfig& config, std::uint64_t seed);

void write_rows_csv_header(std::ostream& out, std::size_t n_pools);
void write_row_csv(std::ostream& out, const BenchmarkRow& row);

/// mean and sample standard deviation per (method, label) over ok rows.
void write_aggregate_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows);

}  // namespace ammlab::cli
