#include "ammlab/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include "ammlab/errors.hpp"

namespace ammlab {
namespace {

std::string describe(const Eigen::VectorXd& theta) {
  std::ostringstream s;
  s << std::setprecision(17) << "(";
  for (Eigen::Index j = 0; j < theta.size(); ++j) s << (j ? ", " : "") << theta[j];
  s << ")";
  return s.str();
}

double evaluate(const SimplexObjective& f, const WeightVector& theta, std::size_t* evaluations) {
  if (evaluations) ++*evaluations;
  const double v = f(theta);
  if (!std::isfinite(v)) throw DomainError("objective is not finite at theta = " + describe(theta.values()));
  return v;
}

// Powell-damped BFGS update; keeps b positive definite.
void damped_bfgs(Eigen::MatrixXd& b, const Eigen::VectorXd& s, Eigen::VectorXd y) {
  const Eigen::VectorXd bs = b * s;
  const double sbs = s.dot(bs);
  if (!(sbs > 1e-300)) return;
  const double sy = s.dot(y);
  if (sy < 0.2 * sbs) {
    const double phi = 0.8 * sbs / (sbs - sy);
    y = phi * y + (1.0 - phi) * bs;
  }
  const double sy_damped = s.dot(y);
  if (!(sy_damped > 0.0)) return;
  b += y * y.transpose() / sy_damped - bs * bs.transpose() / sbs;
  b = 0.5 * (b + b.transpose());
}

}  // namespace

void validate(const SqpConfig& config) {
  if (config.max_iterations == 0) throw DomainError("sqp max_iterations must be positive");
  if (!(config.gradient_fd_step > 0.0) || config.gradient_fd_step >= 0.5) {
    throw DomainError("sqp gradient_fd_step must lie in (0, 0.5)");
  }
  if (!(config.convergence_tol > 0.0)) throw DomainError("sqp convergence_tol must be positive");
}

WeightVector project_simplex(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw DomainError("cannot project an empty vector");
  if (!v.allFinite()) throw DomainError("cannot project a non-finite vector");
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double tau = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumsum += u[j];
    const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) tau = t;
  }
  return snap_to_simplex((v.array() - tau).cwiseMax(0.0).matrix());
}

WeightVector snap_to_simplex(const Eigen::VectorXd& v) {
  Eigen::VectorXd w = v.cwiseMax(0.0);
  const double s = w.sum();
  if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("cannot rescale " + describe(v) + " onto the simplex");
  return WeightVector(w / s);
}

Eigen::VectorXd simplex_gradient(const SimplexObjective& f, const WeightVector& theta, double h,
                                 std::size_t* evaluations) {
  const auto n = static_cast<Eigen::Index>(theta.size());
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  if (n == 1) return g;
  Eigen::Index k = 0;
  theta.values().maxCoeff(&k);
  std::optional<double> f0;

  // D_j: derivative along e_j - e_k; the tangent gradient then satisfies
  // g_j - g_k = D_j and sum g = 0.
  double sum_d = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j == k) continue;
    Eigen::VectorXd plus = theta.values();
    plus[j] += h;
    plus[k] -= h;
    const double fp = evaluate(f, WeightVector(plus), evaluations);
    double dj = 0.0;
    if (theta.values()[j] >= h) {
      Eigen::VectorXd minus = theta.values();
      minus[j] -= h;
      minus[k] += h;
      dj = (fp - evaluate(f, WeightVector(minus), evaluations)) / (2.0 * h);
    } else {
      if (!f0) f0 = evaluate(f, theta, evaluations);
      dj = (fp - *f0) / h;
    }
    g[j] = dj;
    sum_d += dj;
  }
  const double gk = -sum_d / static_cast<double>(n);
  for (Eigen::Index j = 0; j < n; ++j) g[j] = j == k ? gk : g[j] + gk;
  return g;
}

OptimizeResult sqp_minimize(const SimplexObjective& f, const WeightVector& theta0, const SqpConfig& config) {
  validate(config);
  const auto n = static_cast<Eigen::Index>(theta0.size());
  OptimizeResult result;
  result.theta_hat = theta0;
  result.objective_value = evaluate(f, theta0, &result.evaluations);
  result.trace.push_back({0, theta0.values(), result.objective_value});
  if (n == 1) {
    result.converged = true;
    return result;
  }

  Eigen::MatrixXd b = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd g = simplex_gradient(f, result.theta_hat, config.gradient_fd_step, &result.evaluations);
  for (std::size_t it = 1; it <= config.max_iterations; ++it) {
    result.iterations = it;
    const Eigen::VectorXd& theta = result.theta_hat.values();
    const Eigen::VectorXd d = solve_simplex_qp(g, b, theta).d;
    if (d.norm() < config.convergence_tol) {
      result.converged = true;
      break;
    }

    double t = 1.0;
    bool accepted = false;
    WeightVector trial = result.theta_hat;
    double f_trial = 0.0;
    for (std::size_t ls = 0; ls <= config.max_line_search_halvings; ++ls, t *= 0.5) {
      trial = snap_to_simplex(theta + t * d);
      f_trial = evaluate(f, trial, &result.evaluations);
      if (f_trial < result.objective_value) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No decrease along the model direction: treat the point as stationary.
      result.converged = true;
      break;
    }

    const Eigen::VectorXd s = trial.values() - theta;
    const Eigen::VectorXd g_new = simplex_gradient(f, trial, config.gradient_fd_step, &result.evaluations);
    damped_bfgs(b, s, g_new - g);
    g = g_new;
    result.theta_hat = trial;
    result.objective_value = f_trial;
    result.trace.push_back({it, trial.values(), f_trial});
    if (s.norm() < config.convergence_tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

OptimizeResult random_grid_search(const SimplexObjective& f, std::size_t n, std::size_t n_points,
                                  std::uint64_t seed) {
  if (n == 0) throw DomainError("grid search needs at least one pool");
  if (n_points == 0) throw DomainError("grid search needs at least one point");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  std::mt19937_64 rng(seq);
  std::exponential_distribution<double> expo(1.0);

  OptimizeResult result;
  result.objective_value = std::numeric_limits<double>::infinity();
  Eigen::VectorXd e(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n_points; ++i) {
    for (Eigen::Index j = 0; j < e.size(); ++j) e[j] = expo(rng);
    const WeightVector theta(e / e.sum());
    const double v = evaluate(f, theta, &result.evaluations);
    if (v < result.objective_value) {
      result.objective_value = v;
      result.theta_hat = theta;
      result.trace.push_back({i, theta.values(), v});
    }
  }
  result.iterations = n_points;
  result.converged = true;
  return result;
}

void write_trace_csv(std::ostream& out, const OptimizeResult& result) {
  const auto n = result.trace.empty() ? 0 : result.trace.front().theta.size();
  out << "iteration";
  for (Eigen::Index j = 0; j < n; ++j) out << ",theta_" << (j + 1);
  out << ",value\n";
  const auto old = out.precision(17);
  for (const auto& row : result.trace) {
    out << row.iteration;
    for (Eigen::Index j = 0; j < row.theta.size(); ++j) out << ',' << row.theta[j];
    out << ',' << row.value << '\n';
  }
  out.precision(old);
}

}  // namespace ammlab
