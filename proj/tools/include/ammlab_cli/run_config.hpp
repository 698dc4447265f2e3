#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ammlab/baselines.hpp"
#include "ammlab/pipeline.hpp"

namespace ammlab::cli {

enum class Method { pipeline, krr, sqp, grid, finatics, blanco, elagnitram };

std::string to_string(Method m);
Method parse_method(const std::string& name);
const std::vector<Method>& all_methods();

/// Everything a run needs. `pipeline.market.master_seed` is overwritten per
/// seed of `seeds`.
struct RunConfig {
  PipelineConfig pipeline;
  Method method = Method::pipeline;
  std::vector<std::uint64_t> seeds{4294967143ULL};
  std::size_t grid_points = 10000;
  FinaticsConfig finatics;
  BlancoConfig blanco;
  ElagnitramConfig elagnitram;
  std::string out_dir = "ammlab-out";
  std::string stream_out;  ///< write the drawn EventStream here when set
  std::string hardware;    ///< free text stamped on timing rows
};

/// Thrown for malformed configs; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The Challenge parameters with artifact pool defaults.
RunConfig default_run_config();

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string dump_run_config(const RunConfig& config);

/// "7", "1,2,5" or "1-10" (inclusive).
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

/// Host description: hardware threads and CPU model when available.
std::string detect_hardware();

}  // namespace ammlab::cli
