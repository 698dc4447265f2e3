#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ammlab/market.hpp"
#include "ammlab/pool.hpp"

namespace ammlab {

/// Tolerance on the sum-to-one and non-negativity conditions of a weight
/// vector.
inline constexpr double kSimplexTolerance = 1e-9;

/// Allocation of the LP's wealth across pools: a point on the simplex.
class WeightVector {
 public:
  /// Throws DomainError if any entry is below -kSimplexTolerance, non-finite,
  /// or the sum differs from 1 by more than kSimplexTolerance. Tiny negative
  /// entries are clamped to zero.
  explicit WeightVector(Eigen::VectorXd theta);
  WeightVector(std::initializer_list<double> theta);

  static WeightVector equal(std::size_t n);
  static WeightVector vertex(std::size_t n, std::size_t j);

  const Eigen::VectorXd& values() const { return theta_; }
  std::size_t size() const { return static_cast<std::size_t>(theta_.size()); }
  double operator[](std::size_t j) const { return theta_[static_cast<Eigen::Index>(j)]; }

 private:
  Eigen::VectorXd theta_;
};

struct Deployment {
  std::vector<double> lp_coins;
  MultiPool pools;  ///< state after all swaps and mints
};

/// Allocations below this fraction of x0 are treated as zero.
inline constexpr double kNegligibleAllocation = 1e-12;

/// Splits x0 by theta; in each funded pool swaps (1-psi) of the allocation
/// to Y and mints with the rest.
Deployment deploy(const MultiPool& initial, const WeightVector& theta, double x0);

enum class UnwindRule {
  optimal_split,     ///< split y-bar across pools to maximise X proceeds
  best_single_pool,  ///< swap all of y-bar in the single best pool
};

/// Burns every position, then converts the pooled Y back to X per `rule`.
/// Returns the total X held at the end.
double unwind(const MultiPool& final_pools, std::span<const double> lp_coins,
              UnwindRule rule = UnwindRule::optimal_split);

/// Index of the pool paying the most X for y; ties go to the lowest index.
std::size_t best_single_pool_index(const MultiPool& pools, double y);

/// Per-pool Y amounts that maximise the X received for y_total, subject to
/// sum = y_total and every amount >= 0. Pools with zero reserves get zero.
std::vector<double> optimal_y_split(const MultiPool& pools, double y_total);

struct ReturnDistribution {
  std::vector<double> returns;  ///< log returns, one per path
  double x0 = 0.0;
};

struct RiskReport {
  double alpha = 0.0;
  double xi = 0.0;
  double var_alpha = 0.0;   ///< loss quantile (positive = loss)
  double cvar_alpha = 0.0;  ///< mean of the worst ceil((1-alpha)B) losses
  double prob_above_xi = 0.0;
  double mean_return = 0.0;
  std::size_t tail_size = 0;
};

/// m = ceil((1 - alpha) B), snapping products that are integral up to
/// rounding noise (e.g. 0.05 * 1000) to that integer.
std::size_t tail_size(double alpha, std::size_t b);

RiskReport var_cvar(const ReturnDistribution& dist, double alpha, double xi = 0.05);

/// Everything an objective evaluation needs besides the weights. The event
/// stream is shared and immutable, so contexts are cheap to copy.
struct InvestmentContext {
  MultiPool initial;
  double x0 = 10.0;
  MarketParams params;
  std::shared_ptr<const EventStream> stream;
  double alpha = 0.9;
  double xi = 0.05;
  UnwindRule unwind = UnwindRule::optimal_split;
  unsigned workers = 1;
};

ReturnDistribution return_distribution(const MultiPool& initial, const WeightVector& theta, double x0,
                                       const EventStream& stream, const MarketParams& params,
                                       UnwindRule rule = UnwindRule::optimal_split, unsigned workers = 1);

ReturnDistribution return_distribution(const WeightVector& theta, const InvestmentContext& ctx);

RiskReport evaluate_risk(const WeightVector& theta, const InvestmentContext& ctx);

/// CVaR at theta on the context's cached stream; deterministic in theta.
double objective(const WeightVector& theta, const InvestmentContext& ctx);

}  // namespace ammlab
