#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

#include "fbee/fb.hpp"
#include "fbee/uncertainty.hpp"
#include "oracles.hpp"

using namespace fbee;

TEST(FPosterior, IdenticalMembersHaveZeroSpread) {
  Eigen::MatrixXd m(3, 4);
  for (int k = 0; k < 4; ++k) m.col(k) = Eigen::Vector3d(1.0, -2.0, 0.5);
  const auto stats = f_posterior(m);
  EXPECT_LT((stats.mean - Eigen::Vector3d(1.0, -2.0, 0.5)).norm(), 1e-15);
  EXPECT_EQ(stats.covariance.norm(), 0.0);
  EXPECT_EQ(stats.trace, 0.0);
  EXPECT_EQ(stats.determinant, 0.0);
  EXPECT_EQ(q_variance(m, Eigen::Vector3d(1, 1, 1)).variance, 0.0);
}

TEST(FPosterior, TwoOpposedMembers) {
  Eigen::MatrixXd m(2, 2);
  m << 1, -1, 0, 0;
  const auto stats = f_posterior(m);
  EXPECT_LT(stats.mean.norm(), 1e-15);
  Eigen::Matrix2d expected;
  expected << 1, 0, 0, 0;
  EXPECT_LT((stats.covariance - expected).norm(), 1e-15);
  EXPECT_DOUBLE_EQ(stats.trace, 1.0);
  EXPECT_DOUBLE_EQ(stats.max_eigenvalue, 1.0);
  EXPECT_NEAR(stats.determinant, 0.0, 1e-15);
  const auto q = q_variance(m, Eigen::Vector2d(1, 0));
  EXPECT_DOUBLE_EQ(q.variance, 1.0);
  EXPECT_DOUBLE_EQ(q.mean_q, 0.0);
}

TEST(FPosterior, CovarianceMatchesTheLoopReference) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 2 + trial % 7, k = 2 + trial % 5;
    const Eigen::MatrixXd m = Eigen::MatrixXd::Random(d, k) * 3.0;
    const auto stats = f_posterior(m);
    const Eigen::MatrixXd reference = ref::flat_covariance(m);
    EXPECT_LT((stats.covariance - reference).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(stats.trace, reference.trace(), 1e-12);
    EXPECT_NEAR(covariance_trace(m), reference.trace(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(reference);
    EXPECT_NEAR(stats.max_eigenvalue, eig.eigenvalues().maxCoeff(), 1e-10);
    EXPECT_NEAR(stats.determinant, eig.eigenvalues().cwiseMax(0.0).prod(), 1e-10);
  }
}

TEST(FPosterior, SingleMemberIsRejected) {
  const Eigen::MatrixXd m = Eigen::MatrixXd::Random(3, 1);
  EXPECT_THROW(f_posterior(m), std::invalid_argument);
  EXPECT_THROW(q_variance(m, Eigen::VectorXd::Ones(3)), std::invalid_argument);
  EXPECT_THROW(covariance_trace(m), std::invalid_argument);
}

TEST(FPosterior, CoincidingMembersGiveExactZeros) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd f = Eigen::VectorXd::Random(7) * 3.0;
    const Eigen::MatrixXd m = f.replicate(1, 2 + trial % 6);
    const Eigen::VectorXd z = sample_z_sphere(7, rng);
    EXPECT_EQ(q_variance(m, z).variance, 0.0);
    EXPECT_EQ(covariance_trace(m), 0.0);
    EXPECT_EQ(f_posterior(m).covariance.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(QVariance, ScaledIdentityMembers) {
  // Members d * e_k: <F_k - mean, e_1> is d - 1 for k = 0 and -1 otherwise.
  const int d = 4;
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d) * d;
  const auto q = q_variance(m, Eigen::VectorXd::Unit(d, 0));
  EXPECT_NEAR(q.variance, d - 1.0, 1e-12);
  EXPECT_NEAR(q.mean_q, 1.0, 1e-12);
  EXPECT_NEAR(f_posterior(m).trace, d * (d - 1.0), 1e-12);
}

TEST(QVariance, EqualsTheQuadraticFormOfTheCovariance) {
  Rng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = 1 + trial % 9, k = 2 + trial % 6;
    const Eigen::MatrixXd m = Eigen::MatrixXd::Random(d, k) * 2.0;
    const Eigen::VectorXd z = sample_z_sphere(d, rng);
    const double quadratic = z.dot(ref::flat_covariance(m) * z);
    EXPECT_NEAR(q_variance(m, z).variance, quadratic, 1e-10);
  }
}

TEST(QVariance, CovarianceIsPositiveSemidefinite) {
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::MatrixXd m = Eigen::MatrixXd::Random(6, 2 + trial % 8) * 10.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(f_posterior(m).covariance);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10);
  }
}

TEST(QVariance, InvariantUnderMemberPermutation) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::MatrixXd m = Eigen::MatrixXd::Random(5, 6);
    std::vector<int> order(6);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Eigen::MatrixXd permuted(5, 6);
    for (int k = 0; k < 6; ++k) permuted.col(k) = m.col(order[k]);
    const Eigen::VectorXd z = sample_z_sphere(5, rng);
    EXPECT_EQ(q_variance(permuted, z).variance, q_variance(m, z).variance);
    EXPECT_EQ(q_variance(permuted, z).mean_q, q_variance(m, z).mean_q);
    EXPECT_EQ(covariance_trace(permuted), covariance_trace(m));
    EXPECT_EQ(f_posterior(permuted).covariance, f_posterior(m).covariance);
  }
}

TEST(QVariance, ScalesQuadraticallyInZ) {
  Rng rng(4);
  const Eigen::MatrixXd m = Eigen::MatrixXd::Random(4, 5);
  const Eigen::VectorXd z = sample_z_sphere(4, rng);
  for (double c : {-3.0, 0.5, 2.0}) {
    EXPECT_NEAR(q_variance(m, c * z).variance, c * c * q_variance(m, z).variance, 1e-12);
  }
}

TEST(QVariance, ModelQueryUsesTheRequestedPair) {
  ref::PlantedForward model(3, 2, 2, [](int k, StateId s, ActionId a, const Eigen::VectorXd&) {
    return Eigen::Vector2d(k * (s + 1.0), a == 1 ? 5.0 : 0.0).eval();
  });
  EnsembleQuery query{1, 1, Eigen::Vector2d(1.0, 0.0)};
  const Eigen::MatrixXd m = member_outputs(model, query);
  ASSERT_EQ(m.cols(), 3);
  EXPECT_EQ(m(0, 2), 4.0);
  EXPECT_EQ(m(1, 0), 5.0);
  // Member values 0, 2, 4: variance 8/3.
  EXPECT_NEAR(q_variance(model, query).variance, 8.0 / 3.0, 1e-12);
  EXPECT_NEAR(f_posterior(model, query).trace, 8.0 / 3.0, 1e-12);
}

TEST(FQCorrelation, ProportionalSpreadGivesUnitRSquared) {
  // F_k = +-(1 + |z_2|) e_1 with z_1 = 1: Var[Q] equals trace(Cov[F]) for every z.
  ref::PlantedForward model(2, 2, 1, [](int k, StateId, ActionId, const Eigen::VectorXd& z) {
    const double spread = (k == 0 ? 1.0 : -1.0) * (1.0 + std::abs(z(1)));
    return Eigen::Vector2d(spread, 0.0).eval();
  });
  std::vector<Eigen::VectorXd> zs;
  for (double t : {0.1, 0.4, 0.9, 1.3, 2.0}) zs.push_back(Eigen::Vector2d(1.0, t));
  const std::vector<std::pair<StateId, ActionId>> pairs{{0, 0}, {1, 0}};
  const auto result = f_q_correlation(model, zs, pairs);
  EXPECT_FALSE(result.degenerate);
  ASSERT_EQ(result.traces.size(), zs.size());
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const double spread = 1.0 + zs[i](1);
    EXPECT_NEAR(result.traces[i], spread * spread, 1e-12);
    EXPECT_NEAR(result.q_variances[i], spread * spread, 1e-12);
  }
  EXPECT_NEAR(result.r_squared, 1.0, 1e-12);
}

TEST(FQCorrelation, ExactLinearDataHasUnitRSquared) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * v - 1.0);
  bool degenerate = true;
  EXPECT_NEAR(r_squared(x, y, degenerate), 1.0, 1e-12);
  EXPECT_FALSE(degenerate);
  const std::vector<double> flat{2, 2, 2, 2, 2};
  EXPECT_EQ(r_squared(x, flat, degenerate), 1.0);
  EXPECT_THROW(r_squared(x, std::vector<double>{1.0}, degenerate), std::invalid_argument);
}

TEST(FQCorrelation, ConstantRegressorIsDegenerate) {
  ref::PlantedForward model(2, 2, 1, [](int k, StateId, ActionId, const Eigen::VectorXd&) {
    return Eigen::Vector2d(k == 0 ? 1.0 : -1.0, 0.0).eval();
  });
  std::vector<Eigen::VectorXd> zs{Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1), Eigen::Vector2d(1, 1)};
  const std::vector<std::pair<StateId, ActionId>> pairs{{0, 0}};
  const auto result = f_q_correlation(model, zs, pairs);
  EXPECT_TRUE(result.degenerate);
  EXPECT_EQ(result.r_squared, 0.0);
}

TEST(FQCorrelation, RequiresTwoMembers) {
  ref::PlantedForward model(1, 2, 1, [](int, StateId, ActionId, const Eigen::VectorXd&) {
    return Eigen::Vector2d(1.0, 0.0).eval();
  });
  std::vector<Eigen::VectorXd> zs{Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)};
  const std::vector<std::pair<StateId, ActionId>> pairs{{0, 0}};
  EXPECT_THROW(f_q_correlation(model, zs, pairs), std::invalid_argument);
}

TEST(FQCorrelation, PlotColumnsHaveOneLinePerZ) {
  FQCorrelation c;
  c.traces = {1.0, 2.0};
  c.q_variances = {0.5, 0.25};
  std::ostringstream out;
  write_plot_columns(out, c);
  EXPECT_EQ(out.str(), "# trace_cov_f\tvar_q\n1\t0.5\n2\t0.25\n");
}
