#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "ammlab/lifecycle.hpp"

namespace ammlab {

using SimplexObjective = std::function<double(const WeightVector&)>;

struct TraceEntry {
  std::size_t iteration = 0;
  Eigen::VectorXd theta;
  double value = 0.0;
};

struct OptimizeResult {
  WeightVector theta_hat = WeightVector::equal(1);
  double objective_value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t evaluations = 0;
  std::vector<TraceEntry> trace;  ///< accepted iterates, starting point first
};

struct SqpConfig {
  std::size_t max_iterations = 100;
  double gradient_fd_step = 1e-6;
  double convergence_tol = 1e-8;
  std::size_t max_line_search_halvings = 30;
};

void validate(const SqpConfig& config);

/// Euclidean projection onto {theta >= 0, sum theta = 1} by the sorted
/// threshold method. Throws DomainError for empty or non-finite input.
WeightVector project_simplex(const Eigen::VectorXd& v);

/// Clips negatives to zero and rescales to unit sum.
WeightVector snap_to_simplex(const Eigen::VectorXd& v);

/// Finite-difference gradient of f restricted to the simplex tangent space
/// (entries sum to zero). Perturbations move along e_j - e_k where k is the
/// largest weight; a central difference is used when theta_j >= h, a forward
/// one otherwise, so every probe stays feasible.
Eigen::VectorXd simplex_gradient(const SimplexObjective& f, const WeightVector& theta, double h,
                                 std::size_t* evaluations = nullptr);

struct QpSolution {
  Eigen::VectorXd d;
  Eigen::VectorXd bound_multipliers;  ///< one per coordinate, zero when inactive
  double sum_multiplier = 0.0;
  std::size_t iterations = 0;
};

/// Primal active-set solve of
///   min g'd + d'Bd/2  s.t.  sum d = 1 - sum theta,  theta + d >= 0
/// for symmetric positive definite B.
QpSolution solve_simplex_qp(const Eigen::VectorXd& g, const Eigen::MatrixXd& b, const Eigen::VectorXd& theta);

/// SQP with a damped BFGS Hessian and a strict-decrease backtracking line
/// search. Iterates stay on the simplex. Throws DomainError if f is not finite
/// at a probed point.
OptimizeResult sqp_minimize(const SimplexObjective& f, const WeightVector& theta0, const SqpConfig& config = {});

/// Best of n_points flat-Dirichlet samples. Samples are generated in order, so
/// the first k points do not depend on n_points. Ties keep the earlier point.
OptimizeResult random_grid_search(const SimplexObjective& f, std::size_t n, std::size_t n_points, std::uint64_t seed);

/// CSV: iteration, theta_1..theta_n, value (17 significant digits).
void write_trace_csv(std::ostream& out, const OptimizeResult& result);

}  // namespace ammlab
