#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ammlab/errors.hpp"
#include "ammlab/optimizer.hpp"
#include "test_support.hpp"

using namespace ammlab;
using ammlab::testing::random_simplex;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.begin(), static_cast<Eigen::Index>(v.size()));
}

// KKT conditions of min ||w - v||^2 on the simplex: w = max(v - tau, 0).
void expect_projection_kkt(const Eigen::VectorXd& v, const WeightVector& w) {
  double tau = 0.0;
  int support = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (w.values()[i] > 0.0) {
      tau += v[i] - w.values()[i];
      ++support;
    }
  }
  ASSERT_GT(support, 0);
  tau /= support;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (w.values()[i] > 0.0) {
      ASSERT_NEAR(v[i] - w.values()[i], tau, 1e-12 * (1 + std::abs(tau)));
    } else {
      ASSERT_LE(v[i], tau + 1e-12 * (1 + std::abs(tau)));
    }
  }
  ASSERT_NEAR(w.values().sum(), 1.0, 1e-12);
}

SimplexObjective squared_distance(const Eigen::VectorXd& c) {
  return [c](const WeightVector& t) { return (t.values() - c).squaredNorm(); };
}

}  // namespace

TEST(ProjectSimplex, Examples) {
  EXPECT_TRUE(project_simplex(vec({0.2, 0.3, 0.5})).values().isApprox(vec({0.2, 0.3, 0.5}), 1e-15));
  EXPECT_TRUE(project_simplex(vec({0.8, 0.8})).values().isApprox(vec({0.5, 0.5})));
  EXPECT_TRUE(project_simplex(vec({1.5, -0.5})).values().isApprox(vec({1.0, 0.0})));
  EXPECT_THROW(project_simplex(Eigen::VectorXd()), DomainError);
  EXPECT_THROW(project_simplex(vec({1.0, std::nan("")})), DomainError);
}

TEST(ProjectSimplex, KktOnRandomVectors) {
  std::mt19937 rng(10);
  std::normal_distribution<double> n(0.0, 2.0);
  std::uniform_int_distribution<int> dim(1, 12);
  for (int i = 0; i < 10000; ++i) {
    Eigen::VectorXd v(dim(rng));
    for (auto& x : v) x = n(rng);
    expect_projection_kkt(v, project_simplex(v));
  }
}

TEST(ProjectSimplex, ClosestFeasiblePoint) {
  std::mt19937 rng(12);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd v(5);
  for (auto& x : v) x = n(rng);
  const double d = (project_simplex(v).values() - v).norm();
  for (int i = 0; i < 1000; ++i) EXPECT_LE(d, (random_simplex(rng, 5).values() - v).norm() + 1e-15);
}

TEST(SnapToSimplex, ClipsAndRescales) {
  EXPECT_TRUE(snap_to_simplex(vec({2.0, -1.0, 2.0})).values().isApprox(vec({0.5, 0.0, 0.5})));
  EXPECT_THROW(snap_to_simplex(vec({-1.0, 0.0})), DomainError);
}

TEST(SimplexGradient, MatchesAnalyticTangentGradient) {
  const Eigen::VectorXd a = vec({0.3, -1.2, 2.0, 0.7});
  // f = sum a_j t_j^2 + exp(t_1) t_3, gradient by hand.
  const SimplexObjective f = [&](const WeightVector& t) {
    const auto& x = t.values();
    return (a.array() * x.array().square()).sum() + std::exp(x[0]) * x[2];
  };
  std::mt19937 rng(13);
  for (int i = 0; i < 50; ++i) {
    WeightVector t = random_simplex(rng, 4);
    if (i % 5 == 0) t = WeightVector(vec({0.6, 0.0, 0.4, 0.0}));
    const auto& x = t.values();
    Eigen::VectorXd g = 2.0 * a.cwiseProduct(x);
    g[0] += std::exp(x[0]) * x[2];
    g[2] += std::exp(x[0]);
    g.array() -= g.mean();
    std::size_t evals = 0;
    const Eigen::VectorXd fd = simplex_gradient(f, t, 1e-6, &evals);
    EXPECT_NEAR(fd.sum(), 0.0, 1e-12);
    EXPECT_LE((fd - g).norm(), 1e-4 * std::max(1.0, g.norm())) << "case " << i;
    EXPECT_GE(evals, 3u);
  }
}

TEST(SolveSimplexQp, SatisfiesKkt) {
  std::mt19937 rng(14);
  std::normal_distribution<double> n;
  for (int i = 0; i < 500; ++i) {
    const std::size_t dim = 2 + static_cast<std::size_t>(i % 6);
    Eigen::MatrixXd m(dim, dim);
    for (auto& x : m.reshaped()) x = n(rng);
    const Eigen::MatrixXd b = m * m.transpose() + 0.1 * Eigen::MatrixXd::Identity(dim, dim);
    Eigen::VectorXd g(dim);
    for (auto& x : g) x = n(rng);
    const Eigen::VectorXd theta = random_simplex(rng, dim).values();
    const QpSolution s = solve_simplex_qp(g, b, theta);
    const Eigen::VectorXd t = theta + s.d;
    ASSERT_NEAR(t.sum(), 1.0, 1e-10);
    ASSERT_GE(t.minCoeff(), -1e-10);
    // Stationarity: g + B d = nu 1 + mu, mu >= 0, mu_j t_j = 0.
    const Eigen::VectorXd r = g + b * s.d;
    double nu = 0.0;
    int free = 0;
    for (std::size_t j = 0; j < dim; ++j) {
      if (t[static_cast<Eigen::Index>(j)] > 1e-9) {
        nu += r[static_cast<Eigen::Index>(j)];
        ++free;
      }
    }
    ASSERT_GT(free, 0);
    nu /= free;
    for (std::size_t j = 0; j < dim; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      if (t[jj] > 1e-9) ASSERT_NEAR(r[jj], nu, 1e-8 * (1 + std::abs(nu)));
      else ASSERT_GE(r[jj] - nu, -1e-8 * (1 + std::abs(nu)));
    }
  }
}

TEST(SqpMinimize, InteriorTarget) {
  const auto r = sqp_minimize(squared_distance(vec({0.7, 0.2, 0.1})), WeightVector::equal(3));
  EXPECT_TRUE(r.converged);
  EXPECT_LE((r.theta_hat.values() - vec({0.7, 0.2, 0.1})).norm(), 1e-6);
}

TEST(SqpMinimize, InfeasibleTargetProjects) {
  const auto r = sqp_minimize(squared_distance(vec({1.5, -0.5, 0.0})), WeightVector::equal(3));
  EXPECT_LE((r.theta_hat.values() - vec({1.0, 0.0, 0.0})).norm(), 1e-6);
}

TEST(SqpMinimize, RandomTargetsMatchProjectionOracle) {
  std::mt19937 rng(15);
  std::normal_distribution<double> n(0.2, 0.6);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd c(6);
    if (i % 2 == 0) c = random_simplex(rng, 6).values();
    else for (auto& x : c) x = n(rng);
    const auto r = sqp_minimize(squared_distance(c), WeightVector::equal(6));
    EXPECT_LE((r.theta_hat.values() - project_simplex(c).values()).norm(), 1e-6) << "case " << i;
  }
}

TEST(SqpMinimize, LinearObjectiveFindsVertex) {
  std::mt19937 rng(16);
  std::normal_distribution<double> n;
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd a(5);
    for (auto& x : a) x = n(rng);
    Eigen::Index best = 0;
    a.minCoeff(&best);
    const auto r = sqp_minimize([&](const WeightVector& t) { return a.dot(t.values()); }, WeightVector::equal(5));
    EXPECT_LE((r.theta_hat.values() - WeightVector::vertex(5, static_cast<std::size_t>(best)).values()).norm(),
              1e-6);
  }
}

TEST(SqpMinimize, TraceIsFeasibleAndDescending) {
  std::mt19937 rng(17);
  const SimplexObjective f = [](const WeightVector& t) {
    const auto& x = t.values();
    return std::pow(x[0] - 0.1, 4) + std::pow(x[1] - 0.5, 2) + std::sin(3 * x[2]) + x[3] * x[4];
  };
  for (int i = 0; i < 20; ++i) {
    const auto r = sqp_minimize(f, random_simplex(rng, 5));
    for (std::size_t k = 0; k < r.trace.size(); ++k) {
      ASSERT_GE(r.trace[k].theta.minCoeff(), -1e-10);
      ASSERT_NEAR(r.trace[k].theta.sum(), 1.0, 1e-8);
      if (k > 0) ASSERT_LE(r.trace[k].value, r.trace[k - 1].value + 1e-12);
    }
    EXPECT_EQ(r.objective_value, f(r.theta_hat));
  }
}

TEST(SqpMinimize, StartAtSolutionStaysPut) {
  const Eigen::VectorXd c = vec({0.25, 0.25, 0.5});
  const auto r = sqp_minimize(squared_distance(c), WeightVector(c));
  EXPECT_TRUE(r.converged);
  EXPECT_LE((r.theta_hat.values() - c).norm(), 1e-8);
}

TEST(SqpMinimize, NonFiniteObjectiveNamesTheta) {
  try {
    sqp_minimize([](const WeightVector&) { return std::nan(""); }, WeightVector::equal(2));
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("theta"), std::string::npos);
  }
}

TEST(RandomGridSearch, SinglePointAndNesting) {
  const auto f = squared_distance(vec({0.6, 0.3, 0.1}));
  const auto one = random_grid_search(f, 3, 1, 5);
  EXPECT_EQ(one.objective_value, f(one.theta_hat));
  for (std::size_t k : {1u, 10u, 100u}) {
    const auto a = random_grid_search(f, 3, k, 5);
    const auto b = random_grid_search(f, 3, 2 * k, 5);
    EXPECT_LE(b.objective_value, a.objective_value);
  }
  const auto a = random_grid_search(f, 3, 50, 5);
  EXPECT_EQ(a.theta_hat.values(), random_grid_search(f, 3, 50, 5).theta_hat.values());
}

TEST(RandomGridSearch, DenseCoverage) {
  const auto r = random_grid_search(squared_distance(Eigen::VectorXd::Constant(3, 1.0 / 3.0)), 3, 100000, 1);
  EXPECT_LE(r.objective_value, 1e-2);
}

TEST(TraceCsv, FullPrecision) {
  const auto r = sqp_minimize(squared_distance(vec({0.7, 0.2, 0.1})), WeightVector::equal(3));
  std::ostringstream out;
  write_trace_csv(out, r);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "iteration,theta_1,theta_2,theta_3,value");
  std::string line;
  std::getline(in, line);
  EXPECT_NE(line.find("0.33333333333333331"), std::string::npos);
}
