#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "svr/metrics.hpp"

using namespace svr;

TEST(Ase, ZeroWhenEstimatesEqualTruth) {
  const std::vector<std::vector<double>> t{{1, 2, 3}, {4, 5}};
  EXPECT_EQ(ase_trajectory(t, t), 0.0);
}

TEST(Ase, SinglePointErrorTwo) {
  EXPECT_EQ(ase_trajectory({{3.0}}, {{1.0}}), 4.0);
}

TEST(Ase, AveragesWithinSubjectsFirst) {
  // Subject 1: errors (1, 1, 1, 1) -> 1. Subject 2: error 3 -> 9. Mean 5.
  const std::vector<std::vector<double>> est{{1, 1, 1, 1}, {3}};
  const std::vector<std::vector<double>> tru{{0, 0, 0, 0}, {0}};
  EXPECT_DOUBLE_EQ(ase_trajectory(est, tru), 5.0);
}

TEST(Ase, RandomInstanceMatchesDirectRecomputation) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  std::uniform_int_distribution<int> len(1, 8);
  std::vector<std::vector<double>> est(30), tru(30);
  double ref = 0.0;
  for (std::size_t i = 0; i < 30; ++i) {
    const int n = len(rng);
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      est[i].push_back(z(rng));
      tru[i].push_back(z(rng));
      s += std::pow(est[i].back() - tru[i].back(), 2);
    }
    ref += s / n;
  }
  EXPECT_NEAR(ase_trajectory(est, tru), ref / 30.0, 1e-14);
}

TEST(Ase, ShapeMismatchThrows) {
  EXPECT_THROW(ase_trajectory({{1.0}}, {{1.0, 2.0}}), std::invalid_argument);
  EXPECT_THROW(ase_trajectory({{1.0}}, {}), std::invalid_argument);
  const std::vector<double> a{1.0}, b{1.0, 2.0};
  EXPECT_THROW(ase_logvol(a, b), std::invalid_argument);
  EXPECT_THROW(se_beta(a, b), std::invalid_argument);
}

TEST(Ase, LogVolatilityAndCoefficients) {
  const std::vector<double> a{0.0, 1.0}, b{1.0, 1.0};
  EXPECT_DOUBLE_EQ(ase_logvol(a, b), 0.5);
  const auto se = se_beta(a, b);
  EXPECT_EQ(se[0], 1.0);
  EXPECT_EQ(se[1], 0.0);
}

TEST(EmpiricalVolatility, Examples) {
  const std::vector<double> t{0, 1, 2};
  EXPECT_EQ(empirical_volatility(std::vector<double>{3, 3, 3}, t), 0.0);
  EXPECT_NEAR(empirical_volatility(std::vector<double>{0, 1, 0}, t), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(empirical_volatility(std::vector<double>{0, 3, 0}, t), 9.0 * 2.0 / 3.0, 1e-14);
  EXPECT_THROW(empirical_volatility(std::vector<double>{1.0}, std::vector<double>{1.0}),
               std::invalid_argument);
}

TEST(TwoStage, InterceptOnlyWithVolatilityE) {
  // U = (0, sqrt(1.5 e), 0) at t = (0, 1, 2) has empirical volatility e.
  const double h = std::sqrt(1.5 * std::exp(1.0));
  std::vector<std::vector<double>> u(5, std::vector<double>{0, h, 0});
  std::vector<std::vector<double>> t(5, std::vector<double>{0, 1, 2});
  const OlsResult r = two_stage_beta(u, t, Eigen::MatrixXd::Ones(5, 1));
  EXPECT_NEAR(r.beta(0), 1.0, 1e-12);
}

TEST(TwoStage, ExcludesZeroVolatilitySubjects) {
  std::vector<std::vector<double>> u{{0, 1, 0}, {2, 2, 2}, {0, 2, 0}, {0, 1, 1}};
  std::vector<std::vector<double>> t(4, std::vector<double>{0, 1, 2});
  const OlsResult r = two_stage_beta(u, t, Eigen::MatrixXd::Ones(4, 1));
  EXPECT_EQ(r.excluded, 1u);
  EXPECT_EQ(r.used, 3u);
}

TEST(TwoStage, CollinearDesignThrows) {
  std::vector<std::vector<double>> u(6, std::vector<double>{0, 1, 0});
  std::vector<std::vector<double>> t(6, std::vector<double>{0, 1, 2});
  Eigen::MatrixXd x(6, 3);
  x.col(0).setOnes();
  x.col(1) << 1, 2, 3, 4, 5, 6;
  x.col(2) = 2.0 * x.col(1);
  EXPECT_THROW(two_stage_beta(u, t, x), std::invalid_argument);
}

TEST(Ols, KnownRegressionAndPValues) {
  Eigen::MatrixXd x(5, 2);
  x << 1, 0, 1, 1, 1, 2, 1, 3, 1, 4;
  Eigen::VectorXd y(5);
  y << 1.1, 2.9, 5.2, 6.8, 9.0;
  const OlsResult r = ordinary_least_squares(x, y);
  // Closed form for simple regression.
  const double xbar = 2.0, ybar = y.mean();
  double sxy = 0, sxx = 0;
  for (int i = 0; i < 5; ++i) {
    sxy += (i - xbar) * (y(i) - ybar);
    sxx += (i - xbar) * (i - xbar);
  }
  EXPECT_NEAR(r.beta(1), sxy / sxx, 1e-12);
  EXPECT_NEAR(r.beta(0), ybar - sxy / sxx * xbar, 1e-12);
  EXPECT_NEAR(r.std_error(1), std::sqrt(r.residual_variance / sxx), 1e-12);
  EXPECT_LT(r.p_value(1), 1e-3);
  EXPECT_GT(r.p_value(1), 0.0);
}
