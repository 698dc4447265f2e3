#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "ammlab/errors.hpp"
#include "ammlab/optimizer.hpp"

namespace ammlab {
namespace {

// Solves the equality-constrained step: min c'p + p'Bp/2 s.t. sum p = 0 and
// p_i = 0 for i in the working set. Returns p and the multipliers mu of
// B p + A' mu = -c, ordered (sum row, working-set rows).
void equality_step(const Eigen::MatrixXd& b, const Eigen::VectorXd& c, const std::vector<Eigen::Index>& working,
                   Eigen::VectorXd& p, Eigen::VectorXd& mu) {
  const Eigen::Index n = b.rows();
  const auto m = static_cast<Eigen::Index>(working.size()) + 1;
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + m, n + m);
  kkt.topLeftCorner(n, n) = b;
  kkt.block(n, 0, 1, n).setOnes();
  kkt.block(0, n, n, 1).setOnes();
  for (Eigen::Index r = 0; r + 1 < m; ++r) {
    kkt(n + 1 + r, working[static_cast<std::size_t>(r)]) = 1.0;
    kkt(working[static_cast<std::size_t>(r)], n + 1 + r) = 1.0;
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + m);
  rhs.head(n) = -c;
  const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
  if (!sol.allFinite()) throw NumericalError("QP subproblem: singular KKT system");
  p = sol.head(n);
  mu = sol.tail(m);
}

}  // namespace

QpSolution solve_simplex_qp(const Eigen::VectorXd& g, const Eigen::MatrixXd& b, const Eigen::VectorXd& theta) {
  const Eigen::Index n = theta.size();
  if (g.size() != n || b.rows() != n || b.cols() != n) throw DomainError("QP dimensions disagree");

  // Feasible start: put the sum residual on the largest weight.
  Eigen::Index k = 0;
  theta.maxCoeff(&k);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  d[k] = 1.0 - theta.sum();

  std::vector<Eigen::Index> working;
  std::vector<bool> active(static_cast<std::size_t>(n), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i != k && theta[i] <= 0.0) {
      working.push_back(i);
      active[static_cast<std::size_t>(i)] = true;
    }
  }

  QpSolution out;
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
  const std::size_t max_iter = 10 * static_cast<std::size_t>(n) + 50;
  Eigen::VectorXd p;
  Eigen::VectorXd mu;
  for (out.iterations = 1; out.iterations <= max_iter; ++out.iterations) {
    equality_step(b, g + b * d, working, p, mu);
    if (p.lpNorm<Eigen::Infinity>() <= 1e-13 * scale) {
      // Inequality multiplier lambda_i = -mu_i must be >= 0.
      Eigen::Index drop = -1;
      double most_negative = -1e-12 * scale;
      for (std::size_t r = 0; r < working.size(); ++r) {
        const double lambda = -mu[static_cast<Eigen::Index>(r) + 1];
        if (lambda < most_negative) {
          most_negative = lambda;
          drop = static_cast<Eigen::Index>(r);
        }
      }
      if (drop < 0) {
        out.d = d;
        out.sum_multiplier = -mu[0];
        out.bound_multipliers = Eigen::VectorXd::Zero(n);
        for (std::size_t r = 0; r < working.size(); ++r) {
          out.bound_multipliers[working[r]] = -mu[static_cast<Eigen::Index>(r) + 1];
        }
        return out;
      }
      active[static_cast<std::size_t>(working[static_cast<std::size_t>(drop)])] = false;
      working.erase(working.begin() + drop);
      continue;
    }

    double step = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (active[static_cast<std::size_t>(i)] || p[i] >= 0.0) continue;
      const double room = std::max(0.0, theta[i] + d[i]);
      const double t = room / -p[i];
      if (t < step) {
        step = t;
        blocking = i;
      }
    }
    d += step * p;
    if (blocking >= 0) {
      d[blocking] = -theta[blocking];
      working.push_back(blocking);
      active[static_cast<std::size_t>(blocking)] = true;
    }
  }
  // Cycling on a degenerate vertex: d is still feasible, hand it back.
  out.d = d;
  out.bound_multipliers = Eigen::VectorXd::Zero(n);
  return out;
}

}  // namespace ammlab
