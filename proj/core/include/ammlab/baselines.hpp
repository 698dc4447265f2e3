#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ammlab/lifecycle.hpp"
#include "ammlab/optimizer.hpp"

namespace ammlab {

/// Removes from g its component along `direction`. A zero direction leaves g
/// unchanged.
Eigen::VectorXd project_out(const Eigen::VectorXd& g, const Eigen::VectorXd& direction);

/// Empirical (1 - q)-quantile of the returns: the ceil((1 - q) B)-th smallest.
double lower_return_quantile(std::span<const double> returns, double q);

// --- Blanco: penalised loss with burn reweighting -------------------------

struct BlancoLossParams {
  double alpha = 0.9;
  double q = 0.8;
  double zeta = 0.05;
  double sigmoid_scale = 1000.0;
};

struct BlancoLosses {
  std::array<double, 4> l{};  ///< l1 probability penalty, l2 negativity, l3 sum, l4 CVaR
  bool l4_fallback = false;   ///< no loss strictly above the quantile; max loss used

  double weighted(const std::array<double, 4>& omega) const {
    return omega[0] * l[0] + omega[1] * l[1] + omega[2] * l[2] + omega[3] * l[3];
  }
};

/// l1 = relu(q - mean_i G(scale (r_i - zeta)))^2 with G the logistic sigmoid,
/// l2 = mean_j relu(-theta_j), l3 = (sum theta - 1)^2, l4 = mean of the losses
/// strictly above the empirical alpha-quantile of losses (the ceil(alpha B)-th
/// smallest).
BlancoLosses blanco_losses(const Eigen::VectorXd& theta, std::span<const double> returns,
                           const BlancoLossParams& params);

/// Per-path, per-pool quantities of one simulated market at fixed weights:
/// the tokens a full burn returns and the post-burn reserves. Row-major B x n.
struct BurnSnapshot {
  std::size_t n_pools = 0;
  std::vector<double> x_burn;
  std::vector<double> y_burn;
  std::vector<double> rx;
  std::vector<double> ry;
  std::vector<double> phi;  ///< per pool
  double x0 = 0.0;
};

BurnSnapshot burn_snapshot(const WeightVector& theta, const InvestmentContext& ctx, const EventStream& stream);

/// Returns when the burned amounts are rescaled by theta_tilde / theta_outer
/// and each pool's Y is swapped back to X in that same pool. Pools with
/// theta_outer_j = 0 contribute nothing.
std::vector<double> blanco_reweighted_returns(const BurnSnapshot& snap, const Eigen::VectorXd& theta_outer,
                                              const Eigen::VectorXd& theta_tilde);

struct BlancoConfig {
  std::optional<std::array<double, 4>> omega;  ///< unset: matched to the start
  double beta = 0.05;
  std::size_t n_iter = 20;
  std::size_t n_gd = 100;
  double sigmoid_scale = 1000.0;
  double fd_step = 1e-6;
  double q = 0.8;
  bool fresh_stream = false;  ///< redraw the market every outer iteration
  std::optional<WeightVector> theta0;  ///< unset: top three single pools
};

struct BlancoResult {
  OptimizeResult result;        ///< theta_hat is the simplex projection of the last iterate
  Eigen::VectorXd raw_weights;  ///< last gradient-descent iterate, unprojected
  std::array<double, 4> omega{};
  BlancoLosses final_losses;    ///< at raw_weights on the last market
};

/// Starting weights: pools ranked by the mean return of putting all wealth
/// in one pool, equal split over the best three (lowest index on ties).
WeightVector blanco_initial_weights(const InvestmentContext& ctx);

BlancoResult blanco_optimize(const BlancoConfig& config, const InvestmentContext& ctx);

// --- Finatics: projected gradient descent ----------------------------------

struct FinaticsConfig {
  double eta = 0.05;
  std::size_t n_iter = 100;
  double fd_step = 1e-6;
  double q = 0.8;
  bool shared_stream = false;  ///< reuse the context stream instead of redrawing
  std::optional<WeightVector> theta0;  ///< unset: flat-Dirichlet draw from `seed`
  std::uint64_t seed = 0;
};

struct IterateAssessment {
  double value = 0.0;
  bool admissible = true;
};

/// Generic loop: theta_{k+1} = proj(theta_k - eta g_k), g_k the tangent
/// finite-difference gradient of objective_at(k). `assess` scores each
/// iterate; the lowest-valued admissible iterate is returned, or the lowest
/// overall if none is admissible. Ties keep the earlier iterate.
OptimizeResult projected_gradient_descent(const std::function<SimplexObjective(std::size_t)>& objective_at,
                                          const std::function<IterateAssessment(const WeightVector&, std::size_t)>& assess,
                                          const WeightVector& theta0, const FinaticsConfig& config);

/// Fixed objective, every iterate admissible.
OptimizeResult projected_gradient_descent(const SimplexObjective& f, const WeightVector& theta0,
                                          const FinaticsConfig& config);

/// objective_value is the CVaR of theta_hat on the context stream.
OptimizeResult finatics_optimize(const FinaticsConfig& config, const InvestmentContext& ctx);

// --- Elagnitram: quantile-guarded gradient descent ------------------------

struct ElagnitramConfig {
  double delta1 = 0.0;
  double delta2 = 0.01;
  double learning_rate = 0.5;
  std::size_t n_iter = 100;
  double fd_step = 1e-6;
  double q = 0.8;
  double step_tol = 1e-8;
  std::size_t max_rejections = 8;  ///< step halvings before an iteration gives up
  std::optional<WeightVector> theta0;  ///< unset: equal weights
};

enum class ElagnitramBand {
  violated,     ///< psi < zeta + delta1: ascend the quantile
  guarded,      ///< between the bands: CVaR gradient with the quantile direction removed
  unconstrained ///< psi > zeta + delta2: plain CVaR gradient
};

struct ElagnitramResult {
  OptimizeResult result;
  std::vector<ElagnitramBand> bands;  ///< band of each iteration's start point
  std::size_t rejected_steps = 0;
};

ElagnitramResult elagnitram_optimize(const ElagnitramConfig& config, const InvestmentContext& ctx);

}  // namespace ammlab
