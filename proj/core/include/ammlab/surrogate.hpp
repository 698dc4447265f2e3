#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ammlab/lifecycle.hpp"

namespace ammlab {

/// Additive chi-squared kernel, -sum_j (a_j - b_j)^2 / (a_j + b_j), with 0/0
/// terms counted as 0. Non-positive on the simplex, zero on the diagonal.
double chi2_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b);
double chi2_kernel(const WeightVector& a, const WeightVector& b);

struct TrainingSample {
  WeightVector theta;
  double target = 0.0;
};

inline constexpr double kDefaultRidgeLambda = 1e-3;

/// Kernel ridge regression model f(theta) = sum_i gamma_i K(theta, anchor_i).
struct SurrogateModel {
  std::vector<WeightVector> anchors;
  Eigen::VectorXd gamma;
  double ridge_lambda = kDefaultRidgeLambda;
  double residual_norm = 0.0;  ///< ||(K + lambda I) gamma - y|| at fit time
};

Eigen::MatrixXd gram_matrix(const std::vector<WeightVector>& anchors);

/// Solves (K + lambda I) gamma = y in the least-squares sense with a
/// rank-revealing factorisation. K has a zero diagonal and is indefinite.
///
/// Throws DomainError for an empty or duplicated anchor set, NumericalError
/// when the system is rank deficient with lambda = 0 or the solution misses
/// the residual bound 1e-8 (||y|| + 1).
SurrogateModel fit(std::span<const TrainingSample> dataset, double ridge_lambda = kDefaultRidgeLambda);

double predict(const SurrogateModel& model, const WeightVector& theta);

/// 1 - SS_res / SS_tot. Throws DomainError for empty input or constant
/// targets.
double r_squared(std::span<const double> targets, std::span<const double> predictions);
double r_squared(const SurrogateModel& model, std::span<const TrainingSample> holdout);

std::string to_json(const SurrogateModel& model);
SurrogateModel surrogate_from_json(const std::string& text);

}  // namespace ammlab
