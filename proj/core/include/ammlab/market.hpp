#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ammlab/pool.hpp"

namespace ammlab {

/// How an all-pools event (type 0) picks its log-volume deviation.
enum class AllPoolSigma {
  common,    ///< sigma[0] for every pool
  per_pool,  ///< sigma[j] for pool j
};

/// Order-flow model. Vectors have n+1 entries; component 0 is the event that
/// hits every pool at once, component j >= 1 is pool j.
struct MarketParams {
  std::vector<double> kappa;  ///< arrival rates
  std::vector<double> p;      ///< probability that an event swaps X -> Y
  std::vector<double> sigma;  ///< log-volume standard deviations
  double t_horizon = 60.0;
  std::size_t b_paths = 1000;
  std::uint64_t master_seed = 0;
  AllPoolSigma allpool_sigma = AllPoolSigma::common;

  std::size_t n_pools() const { return kappa.empty() ? 0 : kappa.size() - 1; }
  double total_rate() const;
};

void validate(const MarketParams& params);

/// kappa, p, sigma of the Challenge market with T = 60 and
/// B = 1000.
MarketParams challenge_market_params(std::uint64_t master_seed = 4294967143ULL);

/// Name of the generator behind every EventStream; persisted with streams.
inline constexpr const char* kRngAlgorithm = "mt19937_64/seed_seq(seed_lo,seed_hi,path_lo,path_hi)";

/// State-independent randomness of one path, in draw order.
struct PathEvents {
  std::vector<std::uint8_t> types;   ///< 0 = all pools, j >= 1 = pool j
  std::vector<std::uint8_t> x_to_y;  ///< 1 if the event swaps X -> Y
  std::vector<double> normals;       ///< n deviates per all-pools event, else 1

  std::size_t size() const { return types.size(); }
  friend bool operator==(const PathEvents&, const PathEvents&) = default;
};

/// Everything random about a batch of market paths that does not depend on
/// the pool state. Replaying it against different initial pools gives common
/// random numbers across allocations.
struct EventStream {
  std::size_t n_pools = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t params_hash = 0;
  std::vector<PathEvents> paths;

  friend bool operator==(const EventStream&, const EventStream&) = default;
};

/// FNV-1a over the parameters that shape an EventStream (kappa, p, T, B, n).
/// sigma is not part of it: deviates are standard normals, scaled only
/// at replay.
std::uint64_t stream_params_hash(const MarketParams& params);

/// Draws one path: N ~ Poisson(T * sum kappa), then per event the type, the
/// direction and the normal deviates. Depends only on (params, path_index).
PathEvents draw_path_events(const MarketParams& params, std::size_t path_index);

EventStream draw_event_stream(const MarketParams& params, unsigned workers = 1);

/// Throws ContractError when stream and params/pools disagree on shape.
void check_compatible(const EventStream& stream, const MarketParams& params, std::size_t n_pools);

/// Recorded trajectory of a single path; matrices are row-major N x n.
struct PathTrajectory {
  std::vector<double> rx;
  std::vector<double> ry;
  std::vector<double> volumes;
  MultiPool final_pools;

  friend bool operator==(const PathTrajectory&, const PathTrajectory&) = default;
};

struct PathRecord {
  std::size_t n_pools = 0;
  std::vector<PathTrajectory> paths;

  friend bool operator==(const PathRecord&, const PathRecord&) = default;
};

/// Applies one path's events to `pools` in place. If `trajectory` is non-null
/// the post-event reserves and the volumes are appended to it.
void replay_path(MultiPool& pools, const PathEvents& events, const MarketParams& params,
                 PathTrajectory* trajectory = nullptr);

PathRecord replay(const MultiPool& initial, const EventStream& stream, const MarketParams& params,
                  unsigned workers = 1);

struct Simulation {
  PathRecord record;
  EventStream stream;
};

/// draw_event_stream followed by replay; the stream is returned for reuse.
Simulation simulate(const MultiPool& initial, const MarketParams& params, unsigned workers = 1);

/// Binary stream persistence. Layout (little-endian):
///   magic "AMMEVS\0\0" | u32 version | u64 params_hash | u64 master_seed
///   | u64 n_pools | u64 B | per path: u64 N, N x u8 type, N x u8 x_to_y,
///   u64 n_normals, n_normals x f64.
void write_event_stream(std::ostream& out, const EventStream& stream);
EventStream read_event_stream(std::istream& in);
void save_event_stream(const std::string& path, const EventStream& stream);
EventStream load_event_stream(const std::string& path);

}  // namespace ammlab
