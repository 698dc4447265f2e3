#include "ammlab/surrogate.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "ammlab/errors.hpp"

namespace ammlab {

double chi2_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw DomainError("kernel arguments differ in length");
  double k = 0.0;
  for (Eigen::Index j = 0; j < a.size(); ++j) {
    const double den = a[j] + b[j];
    if (den == 0.0) continue;
    const double diff = a[j] - b[j];
    k -= diff * diff / den;
  }
  return k;
}

double chi2_kernel(const WeightVector& a, const WeightVector& b) { return chi2_kernel(a.values(), b.values()); }

Eigen::MatrixXd gram_matrix(const std::vector<WeightVector>& anchors) {
  const auto n = static_cast<Eigen::Index>(anchors.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = chi2_kernel(anchors[static_cast<std::size_t>(i)], anchors[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      k(i, j) = k(j, i) = chi2_kernel(anchors[static_cast<std::size_t>(i)], anchors[static_cast<std::size_t>(j)]);
    }
  }
  return k;
}

SurrogateModel fit(std::span<const TrainingSample> dataset, double ridge_lambda) {
  if (dataset.empty()) throw DomainError("surrogate fit needs at least one sample");
  if (!std::isfinite(ridge_lambda) || ridge_lambda < 0.0) throw DomainError("ridge_lambda must be >= 0");

  SurrogateModel model;
  model.ridge_lambda = ridge_lambda;
  const auto n = static_cast<Eigen::Index>(dataset.size());
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = dataset[static_cast<std::size_t>(i)];
    if (s.theta.size() != dataset.front().theta.size()) throw DomainError("anchors differ in dimension");
    if (!std::isfinite(s.target)) throw DomainError("surrogate target is not finite");
    for (Eigen::Index j = 0; j < i; ++j) {
      if (dataset[static_cast<std::size_t>(j)].theta.values() == s.theta.values()) {
        throw DomainError("duplicate surrogate anchors");
      }
    }
    model.anchors.push_back(s.theta);
    y[i] = s.target;
  }

  const Eigen::MatrixXd a = gram_matrix(model.anchors) + ridge_lambda * Eigen::MatrixXd::Identity(n, n);
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  if (ridge_lambda == 0.0 && cod.rank() < n) {
    std::ostringstream msg;
    msg << "kernel system is rank deficient (rank " << cod.rank() << " of " << n << ") with ridge_lambda = 0";
    throw NumericalError(msg.str());
  }
  model.gamma = cod.solve(y);
  model.residual_norm = (a * model.gamma - y).norm();
  if (!model.gamma.allFinite() || model.residual_norm > 1e-8 * (y.norm() + 1.0)) {
    std::ostringstream msg;
    msg << "kernel ridge solve failed: residual " << model.residual_norm << ", rank " << cod.rank() << " of " << n;
    throw NumericalError(msg.str());
  }
  return model;
}

double predict(const SurrogateModel& model, const WeightVector& theta) {
  double f = 0.0;
  for (std::size_t i = 0; i < model.anchors.size(); ++i) {
    f += model.gamma[static_cast<Eigen::Index>(i)] * chi2_kernel(theta, model.anchors[i]);
  }
  return f;
}

double r_squared(std::span<const double> targets, std::span<const double> predictions) {
  if (targets.empty() || targets.size() != predictions.size()) {
    throw DomainError("r_squared needs equally sized, non-empty inputs");
  }
  double mean = 0.0;
  for (double t : targets) mean += t;
  mean /= static_cast<double>(targets.size());
  double ss_tot = 0.0;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    ss_tot += (targets[i] - mean) * (targets[i] - mean);
    ss_res += (targets[i] - predictions[i]) * (targets[i] - predictions[i]);
  }
  if (ss_tot == 0.0) throw DomainError("r_squared is undefined for constant targets");
  return 1.0 - ss_res / ss_tot;
}

double r_squared(const SurrogateModel& model, std::span<const TrainingSample> holdout) {
  std::vector<double> targets;
  std::vector<double> predictions;
  for (const auto& s : holdout) {
    targets.push_back(s.target);
    predictions.push_back(predict(model, s.theta));
  }
  return r_squared(targets, predictions);
}

std::string to_json(const SurrogateModel& model) {
  nlohmann::json j;
  j["ridge_lambda"] = model.ridge_lambda;
  j["residual_norm"] = model.residual_norm;
  j["gamma"] = std::vector<double>(model.gamma.data(), model.gamma.data() + model.gamma.size());
  auto& anchors = j["anchors"] = nlohmann::json::array();
  for (const auto& a : model.anchors) {
    anchors.push_back(std::vector<double>(a.values().data(), a.values().data() + a.values().size()));
  }
  return j.dump(2);
}

SurrogateModel surrogate_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  SurrogateModel model;
  model.ridge_lambda = j.at("ridge_lambda").get<double>();
  model.residual_norm = j.value("residual_norm", 0.0);
  const auto gamma = j.at("gamma").get<std::vector<double>>();
  model.gamma = Eigen::Map<const Eigen::VectorXd>(gamma.data(), static_cast<Eigen::Index>(gamma.size()));
  for (const auto& a : j.at("anchors")) {
    const auto v = a.get<std::vector<double>>();
    model.anchors.emplace_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  if (model.anchors.size() != gamma.size()) throw DomainError("surrogate file: anchors and gamma differ in length");
  return model;
}

}  // namespace ammlab
