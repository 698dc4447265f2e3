#include "ammlab/market.hpp"

#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <string>

#include "ammlab/errors.hpp"
#include "ammlab/parallel.hpp"

namespace ammlab {
namespace {

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

std::mt19937_64 path_engine(std::uint64_t master_seed, std::size_t path_index) {
  const auto path = static_cast<std::uint64_t>(path_index);
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

double MarketParams::total_rate() const { return std::accumulate(kappa.begin(), kappa.end(), 0.0); }

void validate(const MarketParams& params) {
  if (params.kappa.size() < 2) throw DomainError("market.kappa needs at least 2 entries (n >= 1 pools)");
  if (params.kappa.size() > 256) throw DomainError("at most 255 pools are supported");
  if (params.p.size() != params.kappa.size() || params.sigma.size() != params.kappa.size()) {
    throw DomainError("market.kappa, market.p and market.sigma must have equal length n+1");
  }
  for (double k : params.kappa) {
    if (!std::isfinite(k) || k < 0.0) throw DomainError("market.kappa entries must be >= 0");
  }
  if (!(params.total_rate() > 0.0)) throw DomainError("market.kappa must have a positive sum");
  for (double v : params.p) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("market.p entries must lie in [0, 1]");
  }
  for (double s : params.sigma) {
    if (!std::isfinite(s) || s <= 0.0) throw DomainError("market.sigma entries must be > 0");
  }
  if (!std::isfinite(params.t_horizon) || params.t_horizon <= 0.0) {
    throw DomainError("market.t_horizon must be > 0");
  }
  if (params.b_paths == 0) throw DomainError("market.b_paths must be positive");
}

MarketParams challenge_market_params(std::uint64_t master_seed) {
  MarketParams params;
  params.kappa = {0.25, 0.5, 0.5, 0.45, 0.45, 0.4, 0.3};
  params.p = {0.45, 0.45, 0.4, 0.38, 0.36, 0.34, 0.3};
  params.sigma = {1.0, 0.3, 0.5, 1.0, 1.25, 2.0, 4.0};
  params.t_horizon = 60.0;
  params.b_paths = 1000;
  params.master_seed = master_seed;
  return params;
}

std::uint64_t stream_params_hash(const MarketParams& params) {
  Fnv1a h;
  h.u64(params.n_pools());
  for (double k : params.kappa) h.f64(k);
  for (double v : params.p) h.f64(v);
  h.f64(params.t_horizon);
  h.u64(params.b_paths);
  return h.value();
}

PathEvents draw_path_events(const MarketParams& params, std::size_t path_index) {
  const std::size_t n = params.n_pools();
  auto engine = path_engine(params.master_seed, path_index);

  std::poisson_distribution<long long> count_dist(params.t_horizon * params.total_rate());
  std::discrete_distribution<int> type_dist(params.kappa.begin(), params.kappa.end());
  std::normal_distribution<double> normal(0.0, 1.0);

  PathEvents events;
  const auto count = static_cast<std::size_t>(count_dist(engine));
  events.types.reserve(count);
  events.x_to_y.reserve(count);
  events.normals.reserve(count + count / 4 * n);

  for (std::size_t m = 0; m < count; ++m) {
    const int type = type_dist(engine);
    std::bernoulli_distribution direction(params.p[static_cast<std::size_t>(type)]);
    events.types.push_back(static_cast<std::uint8_t>(type));
    events.x_to_y.push_back(direction(engine) ? 1 : 0);
    const std::size_t draws = type == 0 ? n : 1;
    for (std::size_t k = 0; k < draws; ++k) events.normals.push_back(normal(engine));
  }
  return events;
}

EventStream draw_event_stream(const MarketParams& params, unsigned workers) {
  validate(params);
  EventStream stream;
  stream.n_pools = params.n_pools();
  stream.master_seed = params.master_seed;
  stream.params_hash = stream_params_hash(params);
  stream.paths.resize(params.b_paths);
  parallel_for(params.b_paths, workers, [&](std::size_t k) { stream.paths[k] = draw_path_events(params, k); });
  return stream;
}

void check_compatible(const EventStream& stream, const MarketParams& params, std::size_t n_pools) {
  if (stream.n_pools != n_pools || params.n_pools() != n_pools) {
    throw ContractError("event stream, market params and pools disagree on the number of pools");
  }
  if (stream.paths.size() != params.b_paths) {
    throw ContractError("event stream path count differs from market.b_paths");
  }
  if (stream.params_hash != stream_params_hash(params)) {
    throw ContractError("event stream was drawn with different kappa/p/T/B");
  }
}

void replay_path(MultiPool& pools, const PathEvents& events, const MarketParams& params,
                 PathTrajectory* trajectory) {
  const std::size_t n = pools.size();
  const bool common_sigma = params.allpool_sigma == AllPoolSigma::common;
  std::size_t z = 0;

  if (trajectory != nullptr) {
    trajectory->rx.assign(events.size() * n, 0.0);
    trajectory->ry.assign(events.size() * n, 0.0);
    trajectory->volumes.assign(events.size() * n, 0.0);
  }

  auto trade = [&](std::size_t j, double sigma, bool x_to_y, std::size_t row) {
    PoolState& pool = pools[j];
    const double drift = x_to_y ? 0.0 : std::log(pool.rx / pool.ry);
    const double volume = std::exp(drift + sigma * events.normals[z++]);
    pool = x_to_y ? swap_x_to_y(pool, volume).pool : swap_y_to_x(pool, volume).pool;
    if (trajectory != nullptr) trajectory->volumes[row * n + j] = volume;
  };

  for (std::size_t m = 0; m < events.size(); ++m) {
    const std::size_t type = events.types[m];
    const bool x_to_y = events.x_to_y[m] != 0;
    if (type == 0) {
      for (std::size_t j = 0; j < n; ++j) trade(j, common_sigma ? params.sigma[0] : params.sigma[j + 1], x_to_y, m);
    } else {
      trade(type - 1, params.sigma[type], x_to_y, m);
    }
    if (trajectory != nullptr) {
      for (std::size_t j = 0; j < n; ++j) {
        trajectory->rx[m * n + j] = pools[j].rx;
        trajectory->ry[m * n + j] = pools[j].ry;
      }
    }
  }
  if (trajectory != nullptr) trajectory->final_pools = pools;
}

PathRecord replay(const MultiPool& initial, const EventStream& stream, const MarketParams& params,
                  unsigned workers) {
  validate(initial);
  check_compatible(stream, params, initial.size());
  PathRecord record;
  record.n_pools = initial.size();
  record.paths.resize(stream.paths.size());
  parallel_for(stream.paths.size(), workers, [&](std::size_t k) {
    MultiPool pools = initial;
    replay_path(pools, stream.paths[k], params, &record.paths[k]);
  });
  return record;
}

Simulation simulate(const MultiPool& initial, const MarketParams& params, unsigned workers) {
  Simulation sim;
  sim.stream = draw_event_stream(params, workers);
  sim.record = replay(initial, sim.stream, params, workers);
  return sim;
}

}  // namespace ammlab
