#include "prx/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include <gtest/gtest.h>

#include "prx/errors.hpp"
#include "prx/normal.hpp"
#include "prx/rng.hpp"

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  return g;
}

TEST(Quantiles, UniformDensityInvertsExactly) {
  const auto y = linspace(0.0, 1.0, 101);
  const std::vector<double> dens(101, 1.0);
  for (double tau : {0.1, 0.25, 0.5, 0.9})
    EXPECT_NEAR(prx::quantile_from_density(dens, y, tau), tau, 1e-12);
}

TEST(Quantiles, StandardNormalQuantile) {
  const auto y = linspace(-8.0, 8.0, 1601);
  std::vector<double> dens(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) dens[i] = prx::norm_pdf(y[i]);
  EXPECT_NEAR(prx::quantile_from_density(dens, y, 0.975), 1.959963984540054,
              1e-2);
  EXPECT_NEAR(prx::quantile_from_density(dens, y, 0.5), 0.0, 1e-10);
  // Monotone in tau.
  double prev = -1e9;
  for (double tau = 0.05; tau < 0.99; tau += 0.05) {
    const double q = prx::quantile_from_density(dens, y, tau);
    EXPECT_GE(q, prev);
    prev = q;
  }
}

TEST(Quantiles, MassConcentratedInOneCell) {
  // All mass between grid points 5 and 6: every quantile lands there.
  const auto y = linspace(0.0, 1.0, 11);
  std::vector<double> dens(11, 0.0);
  dens[5] = 1.0;
  dens[6] = 1.0;
  const double q = prx::quantile_from_density(dens, y, 0.5);
  EXPECT_GE(q, 0.5);
  EXPECT_LE(q, 0.6);
}

TEST(Quantiles, RejectsBadInputs) {
  const auto y = linspace(0.0, 1.0, 11);
  const std::vector<double> dens(11, 1.0);
  EXPECT_THROW(prx::quantile_from_density(dens, y, 0.0), prx::DomainError);
  EXPECT_THROW(prx::quantile_from_density(dens, y, 1.0), prx::DomainError);
  EXPECT_THROW(prx::quantile_from_density({1.0}, {0.0}, 0.5),
               prx::UsageError);
  EXPECT_THROW(
      prx::quantile_from_density(std::vector<double>(11, 0.0), y, 0.5),
      prx::DomainError);
}

TEST(CheckLoss, HandValues) {
  // Residuals {+1, -1} at tau = 0.5: (0.5 + 0.5) / 2 = 0.5.
  EXPECT_DOUBLE_EQ(prx::check_loss(1.0, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(prx::check_loss(-1.0, 0.5), 0.5);
  EXPECT_NEAR(prx::check_score({{1.0, 0.0}, {-1.0, 0.0}}, 0.5), 0.5, 1e-15);
  // Residuals {2, -1} at tau = 0.25: (2*0.25 + 1*0.75) / 2 = 0.625.
  EXPECT_NEAR(prx::check_score({{2.0, 0.0}, {-1.0, 0.0}}, 0.25), 0.625,
              1e-15);
  EXPECT_DOUBLE_EQ(prx::check_loss(0.0, 0.3), 0.0);
  EXPECT_THROW(prx::check_score({}, 0.5), prx::UsageError);
  EXPECT_THROW(prx::check_score({{1.0, 0.0}}, 1.0), prx::DomainError);
}

TEST(CheckLoss, MinimizedByEmpiricalQuantile) {
  // The empirical tau-quantile minimizes the mean check loss; scan candidate
  // predictions and confirm the sample quantile is within one data step of
  // the brute-force minimizer.
  prx::Rng rng(8);
  std::vector<double> ys(201);
  for (double& v : ys) v = rng.normal();
  std::vector<double> sorted = ys;
  std::sort(sorted.begin(), sorted.end());
  for (double tau : {0.25, 0.5, 0.8}) {
    double best_q = 0.0, best_score = 1e300;
    for (double q = -3.0; q <= 3.0; q += 0.01) {
      std::vector<std::pair<double, double>> pairs;
      for (double v : ys) pairs.emplace_back(v, q);
      const double s = prx::check_score(pairs, tau);
      if (s < best_score) {
        best_score = s;
        best_q = q;
      }
    }
    const double emp =
        sorted[static_cast<std::size_t>(tau * (sorted.size() - 1))];
    EXPECT_NEAR(best_q, emp, 0.05) << "tau=" << tau;
  }
}

TEST(Mise, ZeroForPerfectEstimate) {
  const auto y = linspace(-2.0, 2.0, 51);
  std::vector<std::vector<double>> est(3, std::vector<double>(51));
  for (auto& row : est)
    for (std::size_t k = 0; k < 51; ++k) row[k] = prx::norm_pdf(y[k]);
  EXPECT_DOUBLE_EQ(prx::mise(est, est, y), 0.0);
}

TEST(Mise, ConstantOffsetIntegratesExactly) {
  // Error c everywhere integrates to c^2 * range: 0.25 * 4 = 1.
  const auto y = linspace(0.0, 4.0, 81);
  std::vector<std::vector<double>> est(2, std::vector<double>(81, 1.5));
  std::vector<std::vector<double>> truth(2, std::vector<double>(81, 1.0));
  EXPECT_NEAR(prx::mise(est, truth, y), 1.0, 1e-12);
  EXPECT_THROW(prx::mise(est, {truth[0]}, y), prx::UsageError);
  EXPECT_THROW(prx::mise({{1.0}}, {{1.0}}, y), prx::UsageError);
}

TEST(Mise, RefinementConvergesForSmoothError) {
  // est - truth = y^2 on [0, 1]: integral of y^4 = 1/5. A non-periodic
  // integrand keeps the trapezoid rule's O(h^2) error genuinely nonzero,
  // so refining the grid must shrink it.
  double prev_err = 1e9;
  for (int n : {21, 201}) {
    const auto y = linspace(0.0, 1.0, n);
    std::vector<std::vector<double>> est(1, std::vector<double>(y.size()));
    std::vector<std::vector<double>> truth(
        1, std::vector<double>(y.size(), 0.0));
    for (std::size_t k = 0; k < y.size(); ++k) est[0][k] = y[k] * y[k];
    const double err = std::fabs(prx::mise(est, truth, y) - 0.2);
    EXPECT_LT(err, prev_err);
    prev_err = err;
  }
  EXPECT_LT(prev_err, 1e-5);
}

TEST(Kcde, SinglePointIsItsOwnKernel) {
  prx::Observations data;
  data.x = {{0.5}};
  data.y = {1.2};
  const auto y = linspace(-2.0, 4.0, 61);
  const auto dens = prx::kcde(data, {0.5}, y, 0.4, 1.0);
  for (std::size_t k = 0; k < y.size(); ++k)
    EXPECT_NEAR(dens[k], prx::normal_density(y[k], 1.2, 0.4), 1e-14);
}

TEST(Kcde, WideCovariateBandwidthAveragesEqually) {
  prx::Observations data;
  data.x = {{0.0}, {1.0}};
  data.y = {-1.0, 1.0};
  const auto y = linspace(-4.0, 4.0, 81);
  const auto dens = prx::kcde(data, {0.5}, y, 0.5, 1e8);
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double want = 0.5 * prx::normal_density(y[k], -1.0, 0.5) +
                        0.5 * prx::normal_density(y[k], 1.0, 0.5);
    EXPECT_NEAR(dens[k], want, 1e-9);
  }
}

TEST(Kcde, FallbackWhenAllWeightsUnderflow) {
  prx::Observations data;
  data.x = {{0.0}};
  data.y = {0.0};
  const auto y = linspace(0.0, 2.0, 21);
  bool fallback = false;
  const auto dens = prx::kcde(data, {1e6}, y, 1.0, 1e-3, &fallback);
  EXPECT_TRUE(fallback);
  for (double d : dens) EXPECT_DOUBLE_EQ(d, 0.5);  // 1 / span
  EXPECT_THROW(prx::kcde(data, {0.0}, y, 0.0, 1.0), prx::DomainError);
  EXPECT_THROW(prx::kcde(data, {0.0}, y, 1.0, -1.0), prx::DomainError);
}

TEST(CrossValidation, FoldsPartitionTheData) {
  const auto folds = prx::make_folds(23, 5, 99);
  ASSERT_EQ(folds.size(), 5u);
  std::vector<int> seen(23, 0);
  for (const auto& f : folds) {
    EXPECT_GE(f.size(), 4u);
    EXPECT_LE(f.size(), 5u);
    for (std::size_t i : f) seen[i] += 1;
  }
  for (int c : seen) EXPECT_EQ(c, 1);
  // Seeded: same seed reproduces, different seed reshuffles.
  EXPECT_EQ(folds, prx::make_folds(23, 5, 99));
  EXPECT_NE(folds, prx::make_folds(23, 5, 100));
}

TEST(CrossValidation, ConstantPredictorHandScore) {
  // Predictor always answers 0; outcomes are +/-1 alternating. Every test
  // residual is +/-1, so each cell's score at tau is
  // (n_pos * tau + n_neg * (1 - tau)) / n_test and the fold average at
  // tau = 0.5 is exactly 0.5.
  prx::Observations data;
  for (int i = 0; i < 20; ++i) {
    data.x.push_back({static_cast<double>(i)});
    data.y.push_back(i % 2 == 0 ? 1.0 : -1.0);
  }
  prx::CvPlan plan;
  plan.n_folds = 4;
  plan.tau_levels = {0.5};
  plan.seed = 3;
  const prx::FitProcedure fit = [](const prx::Observations&) {
    return [](const std::vector<double>&, double) { return 0.0; };
  };
  const auto table = prx::cross_validate(data, plan, fit);
  ASSERT_EQ(table.cells.size(), 4u);
  for (const auto& cell : table.cells) {
    EXPECT_EQ(cell.n_test, 5u);
    EXPECT_NEAR(cell.score, 0.5, 1e-12);
  }
  ASSERT_EQ(table.fold_avg.size(), 1u);
  EXPECT_NEAR(table.fold_avg[0], 0.5, 1e-12);
}

TEST(CrossValidation, TrainSetsExcludeTestRowsAndErrorsSurface) {
  prx::Observations data;
  for (int i = 0; i < 12; ++i) {
    data.x.push_back({static_cast<double>(i)});
    data.y.push_back(static_cast<double>(i));
  }
  prx::CvPlan plan;
  plan.n_folds = 3;
  plan.tau_levels = {0.5};
  std::vector<std::size_t> train_sizes;
  const prx::FitProcedure fit = [&](const prx::Observations& train) {
    train_sizes.push_back(train.size());
    return [](const std::vector<double>& x, double) { return x[0]; };
  };
  const auto table = prx::cross_validate(data, plan, fit);
  ASSERT_EQ(train_sizes.size(), 3u);
  for (std::size_t s : train_sizes) EXPECT_EQ(s, 8u);
  // Predicting y = x exactly gives zero loss.
  for (const auto& cell : table.cells) EXPECT_NEAR(cell.score, 0.0, 1e-12);

  plan.n_folds = 13;
  EXPECT_THROW(prx::cross_validate(data, plan, fit), prx::UsageError);
  plan.n_folds = 1;
  EXPECT_THROW(prx::cross_validate(data, plan, fit), prx::UsageError);
  plan.n_folds = 3;
  plan.tau_levels = {1.5};
  EXPECT_THROW(prx::cross_validate(data, plan, fit), prx::DomainError);
}

}  // namespace
