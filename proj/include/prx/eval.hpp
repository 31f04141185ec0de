#pragma once

// Scoring of conditional density estimates: quantile extraction from a
// density on a grid, the tau-check (pinball) cross-validation score, MISE
// against a known truth, and a kernel conditional density estimator used as
// a frequentist baseline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "prx/errors.hpp"
#include "prx/normal.hpp"
#include "prx/recursion.hpp"
#include "prx/rng.hpp"

namespace prx {

/// tau-quantile of a density given on a sorted grid: invert the trapezoid
/// CDF with linear interpolation inside the bracketing cell.
inline double quantile_from_density(const std::vector<double>& density,
                                    const std::vector<double>& y_grid,
                                    double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw DomainError("quantile_from_density: tau outside (0,1)");
  if (density.size() != y_grid.size() || density.size() < 2)
    throw UsageError("quantile_from_density: grid/density size mismatch");
  std::vector<double> cdf(density.size(), 0.0);
  for (std::size_t k = 1; k < density.size(); ++k)
    cdf[k] = cdf[k - 1] +
             0.5 * (density[k] + density[k - 1]) * (y_grid[k] - y_grid[k - 1]);
  const double total = cdf.back();
  if (!(total > 0.0))
    throw DomainError("quantile_from_density: density has zero mass");
  const double target = tau * total;
  std::size_t k = 1;
  while (k < cdf.size() - 1 && cdf[k] < target) ++k;
  const double dc = cdf[k] - cdf[k - 1];
  if (dc <= 0.0) return y_grid[k];
  const double frac = (target - cdf[k - 1]) / dc;
  return y_grid[k - 1] + frac * (y_grid[k] - y_grid[k - 1]);
}

/// Check loss rho_tau(r) = r * (tau - 1{r < 0}).
inline double check_loss(double r, double tau) {
  return r * (tau - (r < 0.0 ? 1.0 : 0.0));
}

/// Mean check loss of observed outcomes against predicted tau-quantiles.
inline double check_score(
    const std::vector<std::pair<double, double>>& y_and_qhat, double tau) {
  if (y_and_qhat.empty()) throw UsageError("check_score: empty input");
  if (!(tau > 0.0 && tau < 1.0))
    throw DomainError("check_score: tau outside (0,1)");
  double s = 0.0;
  for (const auto& [y, q] : y_and_qhat) s += check_loss(y - q, tau);
  return s / static_cast<double>(y_and_qhat.size());
}

/// Mean over evaluation points of the trapezoid integral of the squared
/// density error on a shared y-grid.
inline double mise(const std::vector<std::vector<double>>& est,
                   const std::vector<std::vector<double>>& truth,
                   const std::vector<double>& y_grid) {
  if (est.size() != truth.size() || est.empty())
    throw UsageError("mise: estimate/truth shape mismatch");
  double sum = 0.0;
  for (std::size_t e = 0; e < est.size(); ++e) {
    if (est[e].size() != y_grid.size() || truth[e].size() != y_grid.size())
      throw UsageError("mise: grid length mismatch");
    double ise = 0.0;
    for (std::size_t k = 1; k < y_grid.size(); ++k) {
      const double d1 = est[e][k - 1] - truth[e][k - 1];
      const double d2 = est[e][k] - truth[e][k];
      ise += 0.5 * (d1 * d1 + d2 * d2) * (y_grid[k] - y_grid[k - 1]);
    }
    sum += ise;
  }
  return sum / static_cast<double>(est.size());
}

/// Kernel conditional density estimate on a y-grid:
/// f(y|x) = sum_i w_i N(y; y_i, h1^2) / sum_i w_i with
/// w_i = exp(-|x - x_i|^2 / (2 h2^2)). If every weight underflows, falls
/// back to a flat density on the grid span and reports it.
inline std::vector<double> kcde(const Observations& data,
                                const std::vector<double>& target_x,
                                const std::vector<double>& y_grid, double h1,
                                double h2, bool* fallback_used = nullptr) {
  if (!(h1 > 0.0) || !(h2 > 0.0))
    throw DomainError("kcde: bandwidths must be positive");
  data.validate();
  if (data.size() == 0) throw UsageError("kcde: empty data");
  if (fallback_used) *fallback_used = false;

  std::vector<double> w(data.size());
  double wsum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.x[i].size() != target_x.size())
      throw UsageError("kcde: dimension mismatch");
    double q = 0.0;
    for (std::size_t j = 0; j < target_x.size(); ++j) {
      const double d = data.x[i][j] - target_x[j];
      q += d * d;
    }
    w[i] = std::exp(-q / (2.0 * h2 * h2));
    wsum += w[i];
  }
  std::vector<double> out(y_grid.size(), 0.0);
  if (wsum < 1e-300) {
    if (fallback_used) *fallback_used = true;
    const double span = y_grid.back() - y_grid.front();
    std::fill(out.begin(), out.end(), span > 0.0 ? 1.0 / span : 1.0);
    return out;
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (w[i] == 0.0) continue;
    const double wi = w[i] / wsum;
    for (std::size_t k = 0; k < y_grid.size(); ++k) {
      const double z = (y_grid[k] - data.y[i]) / h1;
      out[k] += wi * norm_pdf(z) / h1;
    }
  }
  return out;
}

struct CvPlan {
  int n_folds = 5;
  std::vector<double> tau_levels = {0.1, 0.25, 0.5, 0.75, 0.9};
  std::uint64_t seed = 0;

  void validate() const {
    if (n_folds < 2) throw UsageError("cv: need at least 2 folds");
    for (double t : tau_levels)
      if (!(t > 0.0 && t < 1.0)) throw DomainError("cv: tau outside (0,1)");
  }
};

/// A fitted quantile predictor: (covariate row in original units, tau) ->
/// predicted tau-quantile of y.
using QuantilePredictor =
    std::function<double(const std::vector<double>&, double)>;
/// A fitting procedure: train data -> quantile predictor.
using FitProcedure = std::function<QuantilePredictor(const Observations&)>;

struct CvCell {
  int fold = 0;
  double tau = 0.0;
  double score = 0.0;
  std::size_t n_test = 0;
};

struct CvTable {
  std::vector<CvCell> cells;       ///< one per (fold, tau)
  std::vector<double> tau_levels;
  std::vector<double> fold_avg;    ///< per tau, averaged over folds
};

/// Fold assignment: seeded shuffle of the index set, then contiguous blocks.
inline std::vector<std::vector<std::size_t>> make_folds(std::size_t n,
                                                        int n_folds,
                                                        std::uint64_t seed) {
  Rng rng(seed);
  auto order = random_permutation(n, rng);
  std::vector<std::vector<std::size_t>> folds(
      static_cast<std::size_t>(n_folds));
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t f =
        k * static_cast<std::size_t>(n_folds) / n;  // contiguous blocks
    folds[f].push_back(order[k]);
  }
  return folds;
}

inline CvTable cross_validate(const Observations& data, const CvPlan& plan,
                              const FitProcedure& fit) {
  plan.validate();
  data.validate();
  const std::size_t n = data.size();
  if (n < static_cast<std::size_t>(plan.n_folds))
    throw UsageError("cv: fewer rows than folds");
  const auto folds = make_folds(n, plan.n_folds, plan.seed);

  CvTable table;
  table.tau_levels = plan.tau_levels;
  table.fold_avg.assign(plan.tau_levels.size(), 0.0);
  for (int f = 0; f < plan.n_folds; ++f) {
    const auto& test_idx = folds[static_cast<std::size_t>(f)];
    Observations train;
    for (std::size_t i = 0; i < n; ++i) {
      bool in_test = false;
      for (std::size_t t : test_idx) in_test = in_test || (t == i);
      if (in_test) continue;
      train.x.push_back(data.x[i]);
      train.y.push_back(data.y[i]);
      if (!data.tags.empty()) train.tags.push_back(data.tags[i]);
    }
    const QuantilePredictor predict = fit(train);
    for (std::size_t ti = 0; ti < plan.tau_levels.size(); ++ti) {
      const double tau = plan.tau_levels[ti];
      std::vector<std::pair<double, double>> pairs;
      pairs.reserve(test_idx.size());
      for (std::size_t i : test_idx)
        pairs.emplace_back(data.y[i], predict(data.x[i], tau));
      CvCell cell;
      cell.fold = f;
      cell.tau = tau;
      cell.score = check_score(pairs, tau);
      cell.n_test = test_idx.size();
      table.cells.push_back(cell);
      table.fold_avg[ti] += cell.score / static_cast<double>(plan.n_folds);
    }
  }
  return table;
}

}  // namespace prx
