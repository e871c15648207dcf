#include <gtest/gtest.h>

#include "flmens/pca.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace flmens;

TEST(FitPca, PointsOnALine) {
  // y = 2x: covariance is var(x) * [[1, 2], [2, 4]], eigenvalues 5 var(x) and 0,
  // leading eigenvector (1, 2) / sqrt(5).
  Matrix x(5, 2);
  x << -2, -4, -1, -2, 0, 0, 1, 2, 2, 4;
  const auto p = fit_pca(x, 2);
  EXPECT_NEAR(p.components(0, 0), 1.0 / std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(p.components(1, 0), 2.0 / std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(p.explained_variance(0), 5.0 * 2.5, 1e-12);  // var(x) = 10 / 4
  EXPECT_NEAR(p.explained_variance(1), 0.0, 1e-12);
}

TEST(FitPca, FullRankReconstructsCenteredData) {
  CounterRng rng(1);
  const Matrix x = testutil::random_matrix(rng, 12, 5);
  const auto p = fit_pca(x, 5);
  const Matrix centered = x.rowwise() - x.colwise().mean();
  const Matrix back = project(p, x) * p.components.transpose();
  EXPECT_LT((back - centered).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FitPca, MeanProjectsToZero) {
  CounterRng rng(2);
  const Matrix x = testutil::random_matrix(rng, 9, 4);
  const auto p = fit_pca(x, 3);
  const Matrix means = p.mean.transpose().replicate(3, 1);
  EXPECT_LT(project(p, means).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FitPca, ComponentsProjectToIdentityRows) {
  CounterRng rng(3);
  const Matrix x = testutil::random_matrix(rng, 20, 4);
  const auto p = fit_pca(x, 3);
  const Matrix rows = p.components.transpose().rowwise() + p.mean.transpose();
  EXPECT_LT((project(p, rows) - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FitPca, LineDataProjectionVarianceEqualsLeadingEigenvalue) {
  Matrix x(6, 2);
  x << 0, 0, 1, 2, 3, 6, -1, -2, 4, 8, 2, 4;
  const auto p = fit_pca(x, 1);
  const Matrix y = project(p, x);
  const double var = (y.array() - y.mean()).square().sum() / (y.rows() - 1);
  const auto eig = oracle::jacobi_eigenvalues(oracle::covariance(testutil::to_table(x)));
  EXPECT_NEAR(var, eig[0], 1e-10);
  EXPECT_NEAR(p.explained_variance(0), eig[0], 1e-10);
}

TEST(FitPca, MatchesJacobiOracleOnRandomMatrices) {
  CounterRng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = static_cast<Eigen::Index>(3 + rng.below(20));
    const auto d = static_cast<Eigen::Index>(1 + rng.below(7));
    const Matrix x = testutil::random_matrix(rng, m, d);
    const auto r = std::min(m, d);
    const auto p = fit_pca(x, r);
    EXPECT_LT((p.components.transpose() * p.components - Matrix::Identity(r, r)).cwiseAbs().maxCoeff(), 1e-8);
    const auto eig = oracle::jacobi_eigenvalues(oracle::covariance(testutil::to_table(x)));
    for (Eigen::Index k = 0; k < r; ++k) {
      EXPECT_NEAR(p.explained_variance(k), std::max(0.0, eig[k]), 1e-8);
      if (k > 0) EXPECT_LE(p.explained_variance(k), p.explained_variance(k - 1));
      // Sign convention: largest-magnitude entry is positive.
      Eigen::Index arg;
      p.components.col(k).cwiseAbs().maxCoeff(&arg);
      EXPECT_GT(p.components(arg, k), 0.0);
    }
  }
}

TEST(FitPca, Errors) {
  Matrix one(1, 3);
  one << 1, 2, 3;
  EXPECT_THROW(fit_pca(one, 1), std::invalid_argument);
  CounterRng rng(5);
  const Matrix x = testutil::random_matrix(rng, 4, 3);
  EXPECT_THROW(fit_pca(x, 0), std::invalid_argument);
  EXPECT_THROW(fit_pca(x, 4), std::invalid_argument);
  EXPECT_THROW(project(fit_pca(x, 2), Matrix::Zero(2, 5)), std::invalid_argument);
}
