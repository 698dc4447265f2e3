#include "ammlab/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ammlab/errors.hpp"
#include "ammlab/parallel.hpp"
#include "ammlab/pipeline.hpp"

namespace ammlab {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed of the k-th regenerated market; never equal to the base seed's stream.
std::uint64_t derived_seed(std::uint64_t seed, std::size_t k) { return splitmix64(seed ^ splitmix64(k + 1)); }

std::shared_ptr<const EventStream> fresh_stream(const InvestmentContext& ctx, std::size_t k) {
  MarketParams p = ctx.params;
  p.master_seed = derived_seed(ctx.params.master_seed, k);
  return std::make_shared<const EventStream>(draw_event_stream(p, ctx.workers));
}

// ceil(x) with products that are integral up to rounding noise snapped.
std::size_t snapped_ceil(double x) {
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, x)) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::ceil(x));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Eigen::VectorXd project_out(const Eigen::VectorXd& g, const Eigen::VectorXd& direction) {
  const double nn = direction.squaredNorm();
  if (nn == 0.0) return g;
  return g - (g.dot(direction) / nn) * direction;
}

double lower_return_quantile(std::span<const double> returns, double q) {
  if (returns.empty()) throw DomainError("quantile of an empty sample");
  std::vector<double> sorted(returns.begin(), returns.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = std::clamp<std::size_t>(tail_size(q, sorted.size()), 1, sorted.size());
  return sorted[m - 1];
}

BlancoLosses blanco_losses(const Eigen::VectorXd& theta, std::span<const double> returns,
                           const BlancoLossParams& params) {
  if (returns.empty()) throw DomainError("blanco_losses needs at least one return");
  const std::size_t b = returns.size();
  BlancoLosses out;

  double mean_sigmoid = 0.0;
  for (double r : returns) mean_sigmoid += sigmoid(params.sigmoid_scale * (r - params.zeta));
  mean_sigmoid /= static_cast<double>(b);
  const double gap = std::max(0.0, params.q - mean_sigmoid);
  out.l[0] = gap * gap;

  out.l[1] = theta.size() == 0 ? 0.0 : (-theta.array()).cwiseMax(0.0).sum() / static_cast<double>(theta.size());
  const double s = theta.sum() - 1.0;
  out.l[2] = s * s;

  std::vector<double> losses(b);
  for (std::size_t i = 0; i < b; ++i) losses[i] = -returns[i];
  std::vector<double> sorted = losses;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t k = std::clamp<std::size_t>(snapped_ceil(params.alpha * static_cast<double>(b)), 1, b);
  const double quantile = sorted[k - 1];
  double sum = 0.0;
  std::size_t count = 0;
  for (double l : losses) {
    if (l > quantile) {
      sum += l;
      ++count;
    }
  }
  if (count == 0) {
    out.l4_fallback = true;
    out.l[3] = sorted.back();
  } else {
    out.l[3] = sum / static_cast<double>(count);
  }
  return out;
}

BurnSnapshot burn_snapshot(const WeightVector& theta, const InvestmentContext& ctx, const EventStream& stream) {
  check_compatible(stream, ctx.params, ctx.initial.size());
  const std::size_t n = ctx.initial.size();
  const std::size_t b = stream.paths.size();
  const Deployment deployed = deploy(ctx.initial, theta, ctx.x0);

  BurnSnapshot snap;
  snap.n_pools = n;
  snap.x0 = ctx.x0;
  snap.x_burn.assign(b * n, 0.0);
  snap.y_burn.assign(b * n, 0.0);
  snap.rx.assign(b * n, 0.0);
  snap.ry.assign(b * n, 0.0);
  for (const auto& p : ctx.initial) snap.phi.push_back(p.phi);

  parallel_for(b, ctx.workers, [&](std::size_t k) {
    MultiPool pools = deployed.pools;
    replay_path(pools, stream.paths[k], ctx.params);
    for (std::size_t j = 0; j < n; ++j) {
      PoolState after = pools[j];
      if (deployed.lp_coins[j] > 0.0) {
        const auto burned = burn(pools[j], deployed.lp_coins[j]);
        snap.x_burn[k * n + j] = burned.x;
        snap.y_burn[k * n + j] = burned.y;
        after = burned.pool;
      }
      snap.rx[k * n + j] = after.rx;
      snap.ry[k * n + j] = after.ry;
    }
  });
  return snap;
}

std::vector<double> blanco_reweighted_returns(const BurnSnapshot& snap, const Eigen::VectorXd& theta_outer,
                                              const Eigen::VectorXd& theta_tilde) {
  const std::size_t n = snap.n_pools;
  if (static_cast<std::size_t>(theta_outer.size()) != n || static_cast<std::size_t>(theta_tilde.size()) != n) {
    throw DomainError("weight vectors differ from the snapshot's pool count");
  }
  std::vector<double> ratio(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    if (theta_outer[jj] > 0.0) ratio[j] = std::max(0.0, theta_tilde[jj] / theta_outer[jj]);
  }
  const std::size_t b = snap.x_burn.size() / std::max<std::size_t>(n, 1);
  std::vector<double> r(b);
  for (std::size_t k = 0; k < b; ++k) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double x = snap.x_burn[k * n + j] * ratio[j];
      const double y = snap.y_burn[k * n + j] * ratio[j];
      const double a = 1.0 - snap.phi[j];
      const double ry = snap.ry[k * n + j];
      const double swapped = y > 0.0 && ry + a * y > 0.0 ? y * a * snap.rx[k * n + j] / (ry + a * y) : 0.0;
      total += x + swapped;
    }
    r[k] = std::log(std::max(total, std::numeric_limits<double>::min()) / snap.x0);
  }
  return r;
}

WeightVector blanco_initial_weights(const InvestmentContext& ctx) {
  if (!ctx.stream) throw ContractError("investment context has no event stream");
  const std::size_t n = ctx.initial.size();
  std::vector<double> mean(n);
  for (std::size_t j = 0; j < n; ++j) mean[j] = evaluate_risk(WeightVector::vertex(n, j), ctx).mean_return;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mean[a] > mean[b]; });
  const std::size_t top = std::min<std::size_t>(3, n);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < top; ++i) w[static_cast<Eigen::Index>(order[i])] = 1.0 / static_cast<double>(top);
  return WeightVector(w);
}

BlancoResult blanco_optimize(const BlancoConfig& config, const InvestmentContext& ctx) {
  if (!ctx.stream) throw ContractError("investment context has no event stream");
  if (!(config.beta > 0.0) || !(config.fd_step > 0.0) || !(config.sigmoid_scale > 0.0)) {
    throw DomainError("blanco beta, fd_step and sigmoid_scale must be positive");
  }
  const auto n = static_cast<Eigen::Index>(ctx.initial.size());
  const BlancoLossParams loss_params{ctx.alpha, config.q, ctx.xi, config.sigmoid_scale};

  BlancoResult out;
  WeightVector outer = config.theta0 ? *config.theta0 : blanco_initial_weights(ctx);
  Eigen::VectorXd tilde = outer.values();
  out.result.trace.push_back({0, outer.values(), objective(outer, ctx)});

  for (std::size_t i = 0; i < config.n_iter; ++i) {
    const auto stream = config.fresh_stream && i > 0 ? fresh_stream(ctx, i) : ctx.stream;
    const BurnSnapshot snap = burn_snapshot(outer, ctx, *stream);
    const Eigen::VectorXd theta_outer = outer.values();
    tilde = theta_outer;
    const auto losses_at = [&](const Eigen::VectorXd& t) {
      return blanco_losses(t, blanco_reweighted_returns(snap, theta_outer, t), loss_params);
    };

    if (i == 0) {
      if (config.omega) {
        out.omega = *config.omega;
      } else {
        // Terms that vanish at the start cannot be matched; they keep weight 1.
        const BlancoLosses l0 = losses_at(tilde);
        const double target = std::abs(l0.l[3]) > 0.0 ? std::abs(l0.l[3]) : 1.0;
        out.omega = {1.0, 1.0, 1.0, 1.0};
        for (std::size_t m = 0; m < 3; ++m) {
          if (std::abs(l0.l[m]) > 1e-12) out.omega[m] = target / std::abs(l0.l[m]);
        }
      }
    }

    for (std::size_t step = 0; step < config.n_gd; ++step) {
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(n);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!(theta_outer[j] > 0.0)) continue;
        Eigen::VectorXd plus = tilde;
        Eigen::VectorXd minus = tilde;
        plus[j] += config.fd_step;
        minus[j] -= config.fd_step;
        grad[j] = (losses_at(plus).weighted(out.omega) - losses_at(minus).weighted(out.omega)) / (2.0 * config.fd_step);
      }
      tilde -= config.beta * grad;
    }
    out.raw_weights = tilde;
    out.final_losses = losses_at(tilde);
    if (tilde != theta_outer) outer = project_simplex(tilde);
    out.result.trace.push_back({i + 1, outer.values(), out.final_losses.weighted(out.omega)});
  }
  if (out.raw_weights.size() == 0) out.raw_weights = outer.values();

  out.result.theta_hat = outer;
  out.result.objective_value = objective(outer, ctx);
  out.result.iterations = config.n_iter;
  out.result.converged = true;
  return out;
}

OptimizeResult projected_gradient_descent(const std::function<SimplexObjective(std::size_t)>& objective_at,
                                          const std::function<IterateAssessment(const WeightVector&, std::size_t)>& assess,
                                          const WeightVector& theta0, const FinaticsConfig& config) {
  if (!(config.eta > 0.0) || !(config.fd_step > 0.0)) throw DomainError("eta and fd_step must be positive");
  OptimizeResult best_admissible;
  OptimizeResult best_any;
  bool have_admissible = false;
  bool have_any = false;
  std::vector<TraceEntry> trace;
  std::size_t evaluations = 0;

  WeightVector theta = theta0;
  for (std::size_t k = 0; k < config.n_iter; ++k) {
    const SimplexObjective f = objective_at(k);
    const IterateAssessment a = assess(theta, k);
    ++evaluations;
    trace.push_back({k, theta.values(), a.value});
    if (!have_any || a.value < best_any.objective_value) {
      best_any.theta_hat = theta;
      best_any.objective_value = a.value;
      have_any = true;
    }
    if (a.admissible && (!have_admissible || a.value < best_admissible.objective_value)) {
      best_admissible.theta_hat = theta;
      best_admissible.objective_value = a.value;
      have_admissible = true;
    }
    const Eigen::VectorXd g = simplex_gradient(f, theta, config.fd_step, &evaluations);
    theta = project_simplex(theta.values() - config.eta * g);
  }

  OptimizeResult out = have_admissible ? best_admissible : best_any;
  if (!have_any) {
    out.theta_hat = theta0;
    out.objective_value = assess(theta0, 0).value;
    ++evaluations;
  }
  out.iterations = config.n_iter;
  out.converged = true;
  out.evaluations = evaluations;
  out.trace = std::move(trace);
  return out;
}

OptimizeResult projected_gradient_descent(const SimplexObjective& f, const WeightVector& theta0,
                                          const FinaticsConfig& config) {
  return projected_gradient_descent([&f](std::size_t) { return f; },
                                    [&f](const WeightVector& theta, std::size_t) { return IterateAssessment{f(theta), true}; },
                                    theta0, config);
}

OptimizeResult finatics_optimize(const FinaticsConfig& config, const InvestmentContext& ctx) {
  if (!ctx.stream) throw ContractError("investment context has no event stream");
  const std::size_t n = ctx.initial.size();
  const WeightVector theta0 = config.theta0 ? *config.theta0 : sample_anchors(config.seed, 1, n).front();

  // The k-th market is drawn once and shared by the iterate and its probes.
  std::size_t current = std::numeric_limits<std::size_t>::max();
  InvestmentContext iteration_ctx = ctx;
  const auto context_for = [&](std::size_t k) -> const InvestmentContext& {
    if (!config.shared_stream && k != current) {
      iteration_ctx.stream = k == 0 ? ctx.stream : fresh_stream(ctx, k);
      current = k;
    }
    return config.shared_stream ? ctx : iteration_ctx;
  };

  OptimizeResult out = projected_gradient_descent(
      [&](std::size_t k) {
        const InvestmentContext& c = context_for(k);
        return SimplexObjective([&c](const WeightVector& theta) { return objective(theta, c); });
      },
      [&](const WeightVector& theta, std::size_t k) {
        const RiskReport risk = evaluate_risk(theta, context_for(k));
        return IterateAssessment{risk.cvar_alpha, risk.prob_above_xi > config.q};
      },
      theta0, config);
  out.objective_value = objective(out.theta_hat, ctx);
  ++out.evaluations;
  return out;
}

ElagnitramResult elagnitram_optimize(const ElagnitramConfig& config, const InvestmentContext& ctx) {
  if (!ctx.stream) throw ContractError("investment context has no event stream");
  if (!(config.delta1 <= config.delta2)) throw DomainError("elagnitram needs delta1 <= delta2");
  if (!(config.learning_rate > 0.0) || !(config.fd_step > 0.0)) {
    throw DomainError("elagnitram learning_rate and fd_step must be positive");
  }
  const auto n = static_cast<Eigen::Index>(ctx.initial.size());
  const double zeta = ctx.xi;
  const double h = config.fd_step;

  struct Eval {
    double cvar;
    double psi;
  };
  std::size_t evaluations = 0;
  const auto eval = [&](const WeightVector& theta) {
    ++evaluations;
    const ReturnDistribution dist = return_distribution(theta, ctx);
    return Eval{var_cvar(dist, ctx.alpha, ctx.xi).cvar_alpha, lower_return_quantile(dist.returns, config.q)};
  };

  ElagnitramResult out;
  WeightVector theta = config.theta0 ? *config.theta0 : WeightVector::equal(static_cast<std::size_t>(n));
  Eval here = eval(theta);
  out.result.trace.push_back({0, theta.values(), here.cvar});
  if (n == 1) {
    out.result.theta_hat = theta;
    out.result.objective_value = here.cvar;
    out.result.converged = true;
    out.result.evaluations = evaluations;
    return out;
  }

  const Eigen::Index last = n - 1;
  for (std::size_t it = 1; it <= config.n_iter; ++it) {
    out.result.iterations = it;

    // Gradients in the n-1 free weights; moving w_j moves theta_last the
    // opposite way.
    Eigen::VectorXd g_cvar = Eigen::VectorXd::Zero(last);
    Eigen::VectorXd g_psi = Eigen::VectorXd::Zero(last);
    for (Eigen::Index j = 0; j < last; ++j) {
      const bool can_plus = theta.values()[last] >= h;
      const bool can_minus = theta.values()[j] >= h;
      if (!can_plus && !can_minus) continue;
      Eigen::VectorXd plus = theta.values();
      Eigen::VectorXd minus = theta.values();
      plus[j] += h;
      plus[last] -= h;
      minus[j] -= h;
      minus[last] += h;
      const Eval ep = can_plus ? eval(WeightVector(plus)) : here;
      const Eval em = can_minus ? eval(WeightVector(minus)) : here;
      const double span = (can_plus ? h : 0.0) + (can_minus ? h : 0.0);
      g_cvar[j] = (ep.cvar - em.cvar) / span;
      g_psi[j] = (ep.psi - em.psi) / span;
    }

    ElagnitramBand band = ElagnitramBand::unconstrained;
    Eigen::VectorXd dir;
    if (here.psi < zeta + config.delta1) {
      band = ElagnitramBand::violated;
      dir = g_psi;
    } else if (here.psi > zeta + config.delta2) {
      dir = -g_cvar;
    } else {
      band = ElagnitramBand::guarded;
      dir = -project_out(g_cvar, g_psi);
    }
    out.bands.push_back(band);

    Eigen::VectorXd delta(n);
    delta.head(last) = config.learning_rate * dir;
    delta[last] = -delta.head(last).sum();

    // Largest admissible fraction of the step that keeps every weight >= 0.
    double scale = 1.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (delta[j] < 0.0) scale = std::min(scale, theta.values()[j] / -delta[j]);
    }

    if (scale * delta.norm() < config.step_tol) {
      out.result.converged = true;
      break;
    }
    bool accepted = false;
    for (std::size_t attempt = 0; attempt <= config.max_rejections; ++attempt, scale *= 0.5) {
      const WeightVector trial = snap_to_simplex(theta.values() + scale * delta);
      const Eval e = eval(trial);
      if (band != ElagnitramBand::violated && e.psi < zeta + config.delta1) {
        ++out.rejected_steps;
        continue;
      }
      theta = trial;
      here = e;
      accepted = true;
      out.result.trace.push_back({it, theta.values(), here.cvar});
      break;
    }
    // Every shortened step left the admissible region: stuck at the guard.
    if (!accepted) break;
  }

  out.result.theta_hat = theta;
  out.result.objective_value = here.cvar;
  out.result.evaluations = evaluations;
  return out;
}

}  // namespace ammlab
