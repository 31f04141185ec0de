#pragma once

// The pseudo-likelihood used to tune unmixed kernel parameters and
// localization bandwidths:
//
//   log L_n = sum_{i=1}^n log m_{i-1}(y_i | x_i),
//
// where m_{i-1}(. | x_i) is the predictive density of the recursion run at
// target x_i over the first i-1 observations in fixed data order. Rather
// than running n separate recursions (O(n^3) kernel work), one pass keeps n
// per-target states alive: observation j first yields its factor from
// state j (which has seen exactly observations 1..j-1), then updates the
// states j+1..n that still need it. That is n(n-1)/2 updates total.
//
// The objective deliberately uses the input data order; permutation
// averaging is reserved for the final fit, not the tuning criterion.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <vector>

#include "prx/errors.hpp"
#include "prx/nelder_mead.hpp"
#include "prx/recursion.hpp"

namespace prx {

enum class FreeParam { sigma, psi, alpha, beta, bandwidth, theta0, sigma0 };

struct FreeParamSpec {
  FreeParam which = FreeParam::sigma;
  std::size_t index = 0;  ///< bandwidth coordinate when which == bandwidth
  ParamTransform transform;
  double init = 1.0;
};

inline FreeParamSpec free_sigma(double init = 1.0, double hi = 100.0) {
  return {FreeParam::sigma, 0, ParamTransform::log_positive(hi), init};
}
inline FreeParamSpec free_psi(double init = 1.0, double hi = 100.0) {
  return {FreeParam::psi, 0, ParamTransform::log_positive(hi), init};
}
inline FreeParamSpec free_alpha(double init = 0.0, double span = 50.0) {
  return {FreeParam::alpha, 0, ParamTransform::identity(-span, span), init};
}
inline FreeParamSpec free_beta(double init = 0.0, double span = 50.0) {
  return {FreeParam::beta, 0, ParamTransform::identity(-span, span), init};
}
/// Bandwidths live in [0, 500] on normalized covariates and are searched on
/// the log scale from a default start of 10.
inline FreeParamSpec free_bandwidth(std::size_t j, double init = 10.0,
                                    double hi = 500.0) {
  return {FreeParam::bandwidth, j, ParamTransform::log_positive(hi), init};
}
// Empirical-null location and scale for the point-null kernel.
inline FreeParamSpec free_theta0(double init = 0.0, double span = 10.0) {
  return {FreeParam::theta0, 0,
          ParamTransform::identity(init - span, init + span), init};
}
inline FreeParamSpec free_sigma0(double init = 1.0, double hi = 100.0) {
  return {FreeParam::sigma0, 0, ParamTransform::log_positive(hi), init};
}

struct PrmlxDiagnostics {
  long underflow_factors = 0;  ///< factors floored at log(1e-300)
};

struct PrmlxObjectiveSpec {
  const Observations* data = nullptr;  ///< covariates already normalized
  KernelSpec kernel;                   ///< values of the fixed parameters
  LocalizationConfig loc;              ///< values of the fixed bandwidths
  std::vector<FreeParamSpec> free_params;
  DominatingMeasure dom;
  std::optional<double> atom_init;  ///< initial spike mass iff dom.atom
  /// Evaluate the objective on a seeded order-preserving subsample of this
  /// size (the same subsample at every evaluation). Absent or >= n: all data.
  std::optional<std::size_t> subsample_size;
  std::uint64_t seed = 0;

  void validate() const {
    if (data == nullptr) throw UsageError("prmlx: no data bound");
    data->validate();
    if (data->size() == 0) throw UsageError("prmlx: empty data");
    dom.validate();
    if (dom.atom.has_value() != atom_init.has_value())
      throw UsageError("prmlx: atom_init must be given exactly when the "
                       "dominating measure has an atom");
    for (const auto& fp : free_params)
      if (fp.which == FreeParam::bandwidth &&
          fp.index >= loc.bandwidths.size())
        throw UsageError("prmlx: bandwidth index out of range");
  }
};

namespace detail {

inline void apply_free_params(const std::vector<double>& values,
                              const PrmlxObjectiveSpec& obj, KernelSpec& k,
                              LocalizationConfig& cfg) {
  if (values.size() != obj.free_params.size())
    throw UsageError("prmlx: wrong number of parameter values");
  k = obj.kernel;
  cfg = obj.loc;
  for (std::size_t j = 0; j < values.size(); ++j) {
    switch (obj.free_params[j].which) {
      case FreeParam::sigma: k.sigma = values[j]; break;
      case FreeParam::psi: k.psi = values[j]; break;
      case FreeParam::alpha: k.alpha = values[j]; break;
      case FreeParam::beta: k.beta = values[j]; break;
      case FreeParam::bandwidth:
        cfg.bandwidths[obj.free_params[j].index] = values[j];
        break;
      case FreeParam::theta0: k.theta0 = values[j]; break;
      case FreeParam::sigma0: k.sigma0 = values[j]; break;
    }
  }
}

/// Order-preserving random subsample: k of n indices, ascending.
inline std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t k,
                                                  std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (k >= n) return idx;
  Rng rng = Rng(seed).fork(0x5u);
  for (std::size_t i = 0; i < k; ++i)
    std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

/// Evaluate the log pseudo-likelihood at one parameter vector.
inline double log_prmlx(const std::vector<double>& values,
                        const PrmlxObjectiveSpec& obj,
                        PrmlxDiagnostics* diag = nullptr,
                        unsigned threads = 1) {
  obj.validate();
  KernelSpec kernel;
  LocalizationConfig cfg;
  detail::apply_free_params(values, obj, kernel, cfg);
  kernel.validate();
  cfg.validate();
  const Observations& d = *obj.data;
  if (kernel.needs_tag() && d.tags.empty())
    throw UsageError("prmlx: kernel family requires per-observation tags");

  const std::size_t n = d.size();
  const std::size_t want = obj.subsample_size.value_or(n);
  const auto take = detail::subsample_indices(n, std::min(want, n), obj.seed);
  const std::size_t m = take.size();

  const MixingMeasure init = uniform_init(obj.dom, obj.atom_init);
  const detail::MassState init_ms = detail::to_mass(init);
  std::vector<detail::MassState> states(m, init_ms);
  std::vector<double> beta_sums(m, 0.0);

  double total = 0.0;
  long underflows = 0;
  for (std::size_t j = 0; j < m; ++j) {
    const auto& xj = d.x[take[j]];
    const double tag = d.tags.empty() ? 0.0 : d.tags[take[j]];
    const auto row = detail::kernel_row(kernel, d.y[take[j]], obj.dom, tag);

    const double factor = detail::predictive(states[j], row);
    if (factor < detail::kUnderflowFloor) {
      total += std::log(detail::kUnderflowFloor);
      ++underflows;
    } else {
      total += std::log(factor);
    }

    auto push_to = [&](std::size_t i) {
      const double b = loc_kernel(cfg, xj, d.x[take[i]]);
      beta_sums[i] += b;
      const double v = b * weight_decay(beta_sums[i], cfg.gamma);
      if (v < detail::kNegligibleWeight) return;
      const double mm = detail::predictive(states[i], row);
      if (mm < detail::kUnderflowFloor) return;
      detail::apply_update(states[i], row, v, mm);
    };
    const std::size_t remaining = m - j - 1;
    if (threads > 1 && remaining >= 256) {
      parallel_for(remaining, threads,
                   [&](std::size_t off) { push_to(j + 1 + off); });
    } else {
      for (std::size_t i = j + 1; i < m; ++i) push_to(i);
    }
  }
  if (diag) diag->underflow_factors = underflows;
  return total;
}

struct PrmlxMaxResult {
  std::vector<double> argmax;
  double log_value = 0.0;
  OptimResult optimizer;         ///< full trace, evaluation count, flags
  PrmlxDiagnostics diagnostics;  ///< underflow count at the argmax
};

/// Maximize the pseudo-likelihood over the declared free parameters with the
/// simplex method (log transform for positive parameters, identity
/// otherwise), budgeted at max_evals objective calls across the multistart.
inline PrmlxMaxResult maximize_prmlx(const PrmlxObjectiveSpec& obj,
                                     const std::vector<double>& init,
                                     int max_evals = 500, double tol = 1e-6,
                                     unsigned threads = 1) {
  obj.validate();
  if (obj.free_params.empty())
    throw UsageError("maximize_prmlx: no free parameters to optimize");
  if (init.size() != obj.free_params.size())
    throw UsageError("maximize_prmlx: init size mismatch");
  std::vector<ParamTransform> transforms;
  transforms.reserve(obj.free_params.size());
  for (const auto& fp : obj.free_params) transforms.push_back(fp.transform);
  for (std::size_t j = 0; j < init.size(); ++j)
    if (!transforms[j].in_box(init[j]))
      throw UsageError("maximize_prmlx: init outside its declared box");
  const double f0 = log_prmlx(init, obj, nullptr, threads);
  if (!std::isfinite(f0))
    throw DomainError("maximize_prmlx: objective not finite at init");

  const auto objective = [&](const std::vector<double>& v) {
    return log_prmlx(v, obj, nullptr, threads);
  };
  PrmlxMaxResult out;
  out.optimizer =
      nelder_mead_maximize(objective, init, transforms, max_evals, tol);
  out.argmax = out.optimizer.argmax;
  out.log_value = out.optimizer.value;
  log_prmlx(out.argmax, obj, &out.diagnostics, threads);
  return out;
}

struct BayesFactor {
  double bf = 1.0;       ///< exp(log_a - log_b); +inf when it overflows
  double log10_bf = 0.0;
  bool overflowed = false;
};

/// Ratio of two pseudo-likelihoods as an approximate Bayes factor.
inline BayesFactor approx_bayes_factor(double log_l_a, double log_l_b) {
  if (!std::isfinite(log_l_a) || !std::isfinite(log_l_b))
    throw DomainError("approx_bayes_factor: non-finite log likelihood");
  const double diff = log_l_a - log_l_b;
  BayesFactor out;
  out.log10_bf = diff / std::numbers::ln10;
  out.bf = std::exp(diff);
  out.overflowed = !std::isfinite(out.bf);
  return out;
}

}  // namespace prx
