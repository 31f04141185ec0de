#pragma once

// Covariate localization: the anisotropic Gaussian weight kernel
// beta_i(x) = exp(-sum_j b_j (x_ij - x_j)^2), its running sums S_i(x), and
// the random weight sequence v_i(x) = beta_i(x) * (1 + S_i(x))^(-gamma) that
// drives the recursion at a target covariate value x. With all bandwidths
// zero, beta_i = 1 and v_i collapses to the deterministic sequence
// (1 + i)^(-gamma).

#include <cmath>
#include <vector>

#include "prx/errors.hpp"

namespace prx {

using Matrix = std::vector<std::vector<double>>;

struct LocalizationConfig {
  std::vector<double> bandwidths;  ///< b_1..b_p, each >= 0
  double gamma = 2.0 / 3.0;        ///< decay exponent, in (1/2, 1]

  void validate() const {
    for (double b : bandwidths)
      if (!(b >= 0.0)) throw DomainError("localization: bandwidth < 0");
    if (!(gamma > 0.5 && gamma <= 1.0))
      throw DomainError("localization: gamma outside (1/2, 1]");
  }
};

/// Weight decay h(z) = (1 + z)^(-gamma); the +1 keeps h finite at z = 0 and
/// h(z) <= 1 everywhere.
inline double weight_decay(double z, double gamma) {
  return std::pow(1.0 + z, -gamma);
}

/// beta = exp(-sum_j b_j (x_j - x'_j)^2), clamped below at 1e-300 so long
/// runs never produce denormals. Always in (0, 1].
inline double loc_kernel(const LocalizationConfig& cfg,
                         const std::vector<double>& x,
                         const std::vector<double>& x_prime) {
  if (x.size() != x_prime.size() || x.size() != cfg.bandwidths.size())
    throw UsageError("loc_kernel: dimension mismatch");
  double q = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double d = x[j] - x_prime[j];
    q += cfg.bandwidths[j] * d * d;
  }
  const double b = std::exp(-q);
  return b < 1e-300 ? 1e-300 : b;
}

/// The weight sequence v_1..v_n at one target: v_i = beta_i * h(S_i) with
/// S_i = beta_1 + ... + beta_i (the running sum includes the current beta).
inline std::vector<double> weight_sequence(const LocalizationConfig& cfg,
                                           const Matrix& xs,
                                           const std::vector<double>& target_x) {
  cfg.validate();
  std::vector<double> v(xs.size());
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double b = loc_kernel(cfg, xs[i], target_x);
    s += b;
    v[i] = b * weight_decay(s, cfg.gamma);
  }
  return v;
}

/// Min-max normalization of covariates to [0,1]^p. Fitted constants are kept
/// so prediction-time points in original units map through the same affine
/// transform. A constant column has no scale; it maps to 0 and is reported
/// so callers can pin its bandwidth to 0.
class CovariateScaler {
 public:
  CovariateScaler() = default;

  static CovariateScaler fit(const Matrix& xs) {
    CovariateScaler s;
    if (xs.empty()) return s;
    const std::size_t p = xs[0].size();
    s.lo_.assign(p, 0.0);
    s.range_.assign(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
      double lo = xs[0][j], hi = xs[0][j];
      for (const auto& row : xs) {
        if (row.size() != p) throw UsageError("scaler: ragged covariate rows");
        lo = row[j] < lo ? row[j] : lo;
        hi = row[j] > hi ? row[j] : hi;
      }
      s.lo_[j] = lo;
      s.range_[j] = hi - lo;
    }
    return s;
  }

  std::size_t dim() const { return lo_.size(); }

  bool column_constant(std::size_t j) const { return range_[j] == 0.0; }

  bool any_constant_column() const {
    for (std::size_t j = 0; j < dim(); ++j)
      if (column_constant(j)) return true;
    return false;
  }

  std::vector<double> transform(const std::vector<double>& x) const {
    if (x.size() != dim()) throw UsageError("scaler: dimension mismatch");
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j)
      out[j] = range_[j] == 0.0 ? 0.0 : (x[j] - lo_[j]) / range_[j];
    return out;
  }

  Matrix transform(const Matrix& xs) const {
    Matrix out;
    out.reserve(xs.size());
    for (const auto& row : xs) out.push_back(transform(row));
    return out;
  }

  const std::vector<double>& mins() const { return lo_; }
  const std::vector<double>& ranges() const { return range_; }

  /// Rebuild a scaler from persisted constants (e.g. a stored fit).
  static CovariateScaler from_bounds(std::vector<double> mins,
                                     std::vector<double> ranges) {
    if (mins.size() != ranges.size())
      throw UsageError("scaler: mins/ranges length mismatch");
    CovariateScaler s;
    s.lo_ = std::move(mins);
    s.range_ = std::move(ranges);
    return s;
  }

 private:
  std::vector<double> lo_;
  std::vector<double> range_;
};

}  // namespace prx
