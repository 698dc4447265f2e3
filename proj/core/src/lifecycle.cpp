#include "ammlab/lifecycle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "ammlab/errors.hpp"
#include "ammlab/parallel.hpp"

namespace ammlab {

WeightVector::WeightVector(Eigen::VectorXd theta) : theta_(std::move(theta)) {
  if (theta_.size() == 0) throw DomainError("weight vector is empty");
  for (Eigen::Index j = 0; j < theta_.size(); ++j) {
    if (!std::isfinite(theta_[j])) throw DomainError("weight vector has a non-finite entry");
    if (theta_[j] < -kSimplexTolerance) throw DomainError("weight vector has a negative entry");
  }
  if (std::abs(theta_.sum() - 1.0) > kSimplexTolerance) throw DomainError("weights must sum to one");
  theta_ = theta_.cwiseMax(0.0);
}

WeightVector::WeightVector(std::initializer_list<double> theta)
    : WeightVector(Eigen::Map<const Eigen::VectorXd>(theta.begin(), static_cast<Eigen::Index>(theta.size()))) {}

WeightVector WeightVector::equal(std::size_t n) {
  return WeightVector(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)));
}

WeightVector WeightVector::vertex(std::size_t n, std::size_t j) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  v[static_cast<Eigen::Index>(j)] = 1.0;
  return WeightVector(std::move(v));
}

Deployment deploy(const MultiPool& initial, const WeightVector& theta, double x0) {
  if (!std::isfinite(x0) || x0 <= 0.0) throw DomainError("initial wealth x0 must be positive");
  if (theta.size() != initial.size()) throw DomainError("weight vector length differs from pool count");

  Deployment d{std::vector<double>(initial.size(), 0.0), initial};
  for (std::size_t j = 0; j < initial.size(); ++j) {
    const double x = theta[j] * x0;
    if (x < kNegligibleAllocation * x0) continue;
    const double psi = swap_fraction_psi(d.pools[j], x);
    const auto swapped = swap_x_to_y(d.pools[j], (1.0 - psi) * x);
    const auto minted = mint(swapped.pool, psi * x, swapped.out);
    d.lp_coins[j] = minted.lp_coins;
    d.pools[j] = minted.pool;
  }
  return d;
}

std::vector<double> optimal_y_split(const MultiPool& pools, double y_total) {
  const std::size_t n = pools.size();
  std::vector<double> split(n, 0.0);
  if (!(y_total > 0.0)) return split;

  // Output of pool k for y is f_k(y) = rx a y / (ry + a y), a = 1 - phi, with
  // f_k'(y) = a rx ry / (ry + a y)^2. At the optimum every funded pool has the
  // same marginal rate lambda and unfunded pools have f_k'(0) <= lambda.
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < n; ++k) {
    if (pools[k].rx > 0.0 && pools[k].ry > 0.0) order.push_back(k);
  }
  if (order.empty()) throw InvariantViolation("no pool left to unwind into");
  auto rate0 = [&](std::size_t k) { return (1.0 - pools[k].phi) * pools[k].rx / pools[k].ry; };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rate0(a) > rate0(b); });

  double sum_ry_over_a = 0.0;
  double sum_root = 0.0;
  double scale = 0.0;  // 1 / sqrt(lambda)
  std::size_t active = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const PoolState& p = pools[order[i]];
    const double a = 1.0 - p.phi;
    const double next_ry_over_a = sum_ry_over_a + p.ry / a;
    const double next_root = sum_root + std::sqrt(p.rx * p.ry / a);
    const double next_scale = (y_total + next_ry_over_a) / next_root;
    // Pool i joins only if it would receive a positive amount.
    if (i > 0 && next_scale * std::sqrt(a * p.rx * p.ry) <= p.ry) break;
    sum_ry_over_a = next_ry_over_a;
    sum_root = next_root;
    scale = next_scale;
    active = i + 1;
  }

  double assigned = 0.0;
  std::size_t largest = order[0];
  for (std::size_t i = 0; i < active; ++i) {
    const std::size_t k = order[i];
    const double a = 1.0 - pools[k].phi;
    split[k] = std::max(0.0, scale * std::sqrt(pools[k].rx * pools[k].ry / a) - pools[k].ry / a);
    assigned += split[k];
    if (split[k] > split[largest]) largest = k;
  }
  // Rounding residue goes to the largest leg so the legs sum to y_total.
  split[largest] = std::max(0.0, split[largest] + (y_total - assigned));
  return split;
}

std::size_t best_single_pool_index(const MultiPool& pools, double y) {
  std::size_t best = pools.size();
  double best_out = -1.0;
  for (std::size_t k = 0; k < pools.size(); ++k) {
    if (pools[k].rx <= 0.0 || pools[k].ry <= 0.0) continue;
    const double out = swap_y_to_x(pools[k], y).out;
    if (out > best_out) {
      best_out = out;
      best = k;
    }
  }
  if (best == pools.size()) throw InvariantViolation("no pool left to unwind into");
  return best;
}

double unwind(const MultiPool& final_pools, std::span<const double> lp_coins, UnwindRule rule) {
  if (lp_coins.size() != final_pools.size()) throw DomainError("lp coin vector length differs from pool count");
  MultiPool pools = final_pools;
  double x_bar = 0.0;
  double y_bar = 0.0;
  for (std::size_t j = 0; j < pools.size(); ++j) {
    if (lp_coins[j] < 0.0) throw DomainError("lp coin holdings must be non-negative");
    if (lp_coins[j] > pools[j].l_total) throw DomainError("lp coin holdings exceed the pool's supply");
    if (lp_coins[j] == 0.0) continue;
    const auto b = burn(pools[j], lp_coins[j]);
    x_bar += b.x;
    y_bar += b.y;
    pools[j] = b.pool;
  }
  if (y_bar == 0.0) return x_bar;

  if (rule == UnwindRule::best_single_pool) {
    return x_bar + swap_y_to_x(pools[best_single_pool_index(pools, y_bar)], y_bar).out;
  }

  const auto split = optimal_y_split(pools, y_bar);
  double x_swapped = 0.0;
  for (std::size_t k = 0; k < pools.size(); ++k) {
    if (split[k] > 0.0) x_swapped += swap_y_to_x(pools[k], split[k]).out;
  }
  return x_bar + x_swapped;
}

std::size_t tail_size(double alpha, std::size_t b) {
  const double t = (1.0 - alpha) * static_cast<double>(b);
  const double r = std::round(t);
  if (std::abs(t - r) <= 1e-9 * std::max(1.0, t)) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::ceil(t));
}

RiskReport var_cvar(const ReturnDistribution& dist, double alpha, double xi) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  const std::size_t b = dist.returns.size();
  if (b == 0) throw DomainError("return distribution is empty");
  const std::size_t m = tail_size(alpha, b);
  if (m == 0) throw DomainError("tail is empty: need B >= 1/(1-alpha)");

  std::vector<double> losses(b);
  double sum = 0.0;
  std::size_t above = 0;
  for (std::size_t i = 0; i < b; ++i) {
    const double r = dist.returns[i];
    if (!std::isfinite(r)) throw DomainError("return distribution has a non-finite entry");
    losses[i] = -r;
    sum += r;
    if (r > xi) ++above;
  }
  std::sort(losses.begin(), losses.end(), std::greater<>());
  double tail = 0.0;
  for (std::size_t i = 0; i < m; ++i) tail += losses[i];

  RiskReport report;
  report.alpha = alpha;
  report.xi = xi;
  report.tail_size = m;
  report.var_alpha = losses[m - 1];
  report.cvar_alpha = tail / static_cast<double>(m);
  report.prob_above_xi = static_cast<double>(above) / static_cast<double>(b);
  report.mean_return = sum / static_cast<double>(b);
  return report;
}

ReturnDistribution return_distribution(const MultiPool& initial, const WeightVector& theta, double x0,
                                       const EventStream& stream, const MarketParams& params, UnwindRule rule,
                                       unsigned workers) {
  validate(initial);
  check_compatible(stream, params, initial.size());
  const Deployment deployed = deploy(initial, theta, x0);

  ReturnDistribution dist{std::vector<double>(stream.paths.size(), 0.0), x0};
  parallel_for(stream.paths.size(), workers, [&](std::size_t k) {
    MultiPool pools = deployed.pools;
    replay_path(pools, stream.paths[k], params);
    const double x_total = unwind(pools, deployed.lp_coins, rule);
    if (!(x_total > 0.0) || !std::isfinite(x_total)) {
      throw InvariantViolation("unwind produced a non-positive or non-finite amount on path " + std::to_string(k));
    }
    dist.returns[k] = std::log(x_total / x0);
  });
  return dist;
}

ReturnDistribution return_distribution(const WeightVector& theta, const InvestmentContext& ctx) {
  if (!ctx.stream) throw ContractError("investment context has no event stream");
  return return_distribution(ctx.initial, theta, ctx.x0, *ctx.stream, ctx.params, ctx.unwind, ctx.workers);
}

RiskReport evaluate_risk(const WeightVector& theta, const InvestmentContext& ctx) {
  return var_cvar(return_distribution(theta, ctx), ctx.alpha, ctx.xi);
}

double objective(const WeightVector& theta, const InvestmentContext& ctx) {
  return evaluate_risk(theta, ctx).cvar_alpha;
}

}  // namespace ammlab
