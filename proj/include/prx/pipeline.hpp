#pragma once

// High-level orchestration: take raw observations, normalize covariates,
// optionally estimate kernel parameters and bandwidths by maximizing the
// predictive-recursion marginal likelihood, then produce permutation-averaged
// mixing measures at a set of evaluation points. The same machinery backs the
// command-line tool, the cross-validation harness, and the acceptance suite.

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "prx/errors.hpp"
#include "prx/eval.hpp"
#include "prx/kernels.hpp"
#include "prx/localization.hpp"
#include "prx/mixing_measure.hpp"
#include "prx/points.hpp"
#include "prx/prmlx.hpp"
#include "prx/recursion.hpp"

namespace prx {

/// Support interval for the mixing measure taken from the outcome sample:
/// [min(y) - pad*sd, max(y) + pad*sd]. A degenerate sample (sd = 0) is
/// widened by 1 on each side so the interval is never empty.
inline std::pair<double, double> support_from_data(
    const std::vector<double>& y, double pad = 1.5) {
  if (y.empty()) throw UsageError("support_from_data: empty sample");
  double lo = y.front(), hi = y.front(), mean = 0.0;
  for (double v : y) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    mean += v;
  }
  mean /= static_cast<double>(y.size());
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  const double sd =
      y.size() > 1 ? std::sqrt(ss / static_cast<double>(y.size() - 1)) : 0.0;
  const double w = sd > 0.0 ? pad * sd : 1.0;
  return {lo - w, hi + w};
}

struct PipelineConfig {
  KernelSpec kernel;  ///< family + fixed values / initial values

  // Which kernel parameters to estimate by maximizing log-PRMLx. Only the
  // parameters meaningful for the chosen family are consulted.
  bool estimate_sigma = false;
  bool estimate_psi = false;
  bool estimate_alpha = false;
  bool estimate_beta = false;

  /// Localization bandwidths in normalized-covariate units. Empty means
  /// "start every coordinate at bandwidth_init". Constant covariate columns
  /// always get bandwidth 0 regardless.
  std::vector<double> bandwidths;
  bool estimate_bandwidths = true;
  double bandwidth_init = 10.0;
  double gamma = 2.0 / 3.0;

  int n_grid = 200;
  std::optional<double> support_lo, support_hi;  ///< default: from data
  std::optional<double> atom;       ///< spike location, if any
  std::optional<double> atom_init;  ///< initial spike mass (default 0.5)

  int n_perm = 30;
  std::uint64_t seed = 0;
  int max_evals = 500;
  double tol = 1e-6;
  std::optional<std::size_t> subsample;  ///< default min(n, 2000)
  int eval_count = 21;  ///< default evaluation-point count when none given
  int threads = 1;
};

struct PipelineOutput {
  FitResult fit;
  KernelSpec kernel;        ///< with estimated parameters applied
  LocalizationConfig loc;   ///< with estimated bandwidths applied
  CovariateScaler scaler;   ///< raw -> normalized covariate map
  DominatingMeasure dom;
  MixingMeasure init;       ///< the starting measure used for every pass
  std::optional<PrmlxMaxResult> optimum;  ///< present when anything was free
  std::vector<std::string> warnings;
  std::vector<std::string> free_param_names;  ///< parallel to optimum argmax
};

namespace detail {

inline const char* free_param_label(FreeParam which) {
  switch (which) {
    case FreeParam::sigma: return "sigma";
    case FreeParam::psi: return "psi";
    case FreeParam::alpha: return "alpha";
    case FreeParam::beta: return "beta";
    case FreeParam::bandwidth: return "bandwidth";
    case FreeParam::theta0: return "theta0";
    case FreeParam::sigma0: return "sigma0";
  }
  return "?";
}

}  // namespace detail

/// Everything needed to evaluate or maximize the marginal pseudo-likelihood
/// for a dataset under one configuration. The objective's data pointer is
/// bound by the caller (the plan itself owns no observations).
struct EstimationPlan {
  KernelSpec kernel;       ///< base kernel (free parameters at their inits)
  LocalizationConfig loc;  ///< inits, constant columns pinned to 0
  DominatingMeasure dom;
  std::optional<double> atom_init;
  std::vector<FreeParamSpec> free;
  std::vector<double> init_values;  ///< parallel to `free`
  std::vector<std::string> names;   ///< parallel to `free`
  std::vector<std::string> warnings;

  PrmlxObjectiveSpec objective(const Observations& normalized_data,
                               const PipelineConfig& cfg) const {
    PrmlxObjectiveSpec obj;
    obj.data = &normalized_data;
    obj.kernel = kernel;
    obj.loc = loc;
    obj.free_params = free;
    obj.dom = dom;
    obj.atom_init = atom_init;
    obj.subsample_size = cfg.subsample.value_or(
        std::min<std::size_t>(normalized_data.size(), 2000));
    obj.seed = cfg.seed;
    return obj;
  }
};

/// Resolve bandwidth layout, support, spike, and the free-parameter list
/// from a configuration plus the fitted covariate scaler and outcomes.
inline EstimationPlan plan_estimation(const CovariateScaler& scaler,
                                      const std::vector<double>& y,
                                      const PipelineConfig& cfg) {
  cfg.kernel.validate();
  EstimationPlan plan;
  plan.kernel = cfg.kernel;
  const std::size_t p = scaler.dim();

  // Bandwidth layout: user-supplied vector (broadcast a single value), else
  // the shared initial value; constant columns are pinned to 0.
  plan.loc.gamma = cfg.gamma;
  plan.loc.bandwidths.assign(p, cfg.bandwidth_init);
  if (!cfg.bandwidths.empty()) {
    if (cfg.bandwidths.size() == 1) {
      plan.loc.bandwidths.assign(p, cfg.bandwidths[0]);
    } else if (cfg.bandwidths.size() == p) {
      plan.loc.bandwidths = cfg.bandwidths;
    } else {
      throw UsageError("bandwidths: expected 1 or " + std::to_string(p) +
                       " values, got " + std::to_string(cfg.bandwidths.size()));
    }
  }
  for (std::size_t j = 0; j < p; ++j) {
    if (scaler.column_constant(j)) {
      plan.loc.bandwidths[j] = 0.0;
      plan.warnings.push_back("covariate column " + std::to_string(j) +
                              " is constant; its bandwidth is pinned to 0");
    }
  }
  plan.loc.validate();

  // Dominating measure support: explicit bounds win; otherwise from data.
  plan.dom.n_grid = cfg.n_grid;
  if (cfg.support_lo && cfg.support_hi) {
    plan.dom.lo = *cfg.support_lo;
    plan.dom.hi = *cfg.support_hi;
  } else if (cfg.support_lo || cfg.support_hi) {
    throw UsageError("support_lo and support_hi must be given together");
  } else {
    const auto [lo, hi] = support_from_data(y);
    plan.dom.lo = lo;
    plan.dom.hi = hi;
  }
  plan.dom.atom = cfg.atom;
  plan.dom.validate();
  if (cfg.atom) plan.atom_init = cfg.atom_init.value_or(0.5);

  // Assemble the free-parameter list for marginal-likelihood maximization.
  switch (cfg.kernel.family) {
    case KernelFamily::gaussian:
      if (cfg.estimate_sigma) plan.free.push_back(free_sigma(cfg.kernel.sigma));
      break;
    case KernelFamily::skew_normal:
      if (cfg.estimate_psi) plan.free.push_back(free_psi(cfg.kernel.psi));
      if (cfg.estimate_alpha) plan.free.push_back(free_alpha(cfg.kernel.alpha));
      if (cfg.estimate_beta) plan.free.push_back(free_beta(cfg.kernel.beta));
      break;
    case KernelFamily::null_point_gaussian:
    case KernelFamily::custom:
      break;  // nothing estimable in these families
  }
  if (cfg.estimate_bandwidths) {
    for (std::size_t j = 0; j < p; ++j)
      if (!scaler.column_constant(j))
        plan.free.push_back(free_bandwidth(j, plan.loc.bandwidths[j]));
  }
  for (const auto& f : plan.free) {
    plan.init_values.push_back(f.init);
    plan.names.push_back(f.which == FreeParam::bandwidth
                             ? std::string("bandwidth") + std::to_string(f.index)
                             : detail::free_param_label(f.which));
  }
  return plan;
}

/// Full pipeline. `eval_raw` rows are evaluation points in raw covariate
/// units; when empty, a default design is used: a uniform grid for one
/// covariate, a low-discrepancy point set (plus the two extreme corners) in
/// higher dimension, all in normalized units.
inline PipelineOutput run_pipeline(const Observations& raw,
                                   const Matrix& eval_raw,
                                   const PipelineConfig& cfg) {
  raw.validate();
  if (raw.size() == 0) throw UsageError("pipeline needs at least one row");
  cfg.kernel.validate();
  if (cfg.kernel.needs_tag() && raw.tags.empty())
    throw UsageError("skew_normal kernel requires a covariate tag per row");

  PipelineOutput out;
  out.scaler = CovariateScaler::fit(raw.x);

  Observations data = raw;
  data.x = out.scaler.transform(raw.x);
  const std::size_t p = out.scaler.dim();

  EstimationPlan plan = plan_estimation(out.scaler, data.y, cfg);
  out.kernel = plan.kernel;
  out.loc = plan.loc;
  out.dom = plan.dom;
  out.warnings = plan.warnings;
  out.free_param_names = plan.names;
  out.init = uniform_init(out.dom, plan.atom_init);

  if (!plan.free.empty()) {
    const PrmlxObjectiveSpec obj = plan.objective(data, cfg);
    out.optimum = maximize_prmlx(obj, plan.init_values, cfg.max_evals,
                                 cfg.tol, cfg.threads);
    detail::apply_free_params(out.optimum->argmax, obj, out.kernel, out.loc);
    if (out.optimum->diagnostics.underflow_factors > 0)
      out.warnings.push_back(
          "marginal-likelihood factors underflowed at the optimum; the fit "
          "may sit in a floored region of the objective");
  }

  // Evaluation points, in normalized covariate units.
  Matrix eval_points;
  if (!eval_raw.empty()) {
    eval_points = out.scaler.transform(eval_raw);
  } else if (p == 1) {
    eval_points = uniform_grid_points(cfg.eval_count);
  } else {
    eval_points = sobol_with_corners(cfg.eval_count, p);
  }

  out.fit = fit_permuted(data, eval_points, out.loc, out.kernel, out.init,
                         cfg.n_perm, cfg.seed, cfg.threads);
  for (std::size_t t = 0; t < out.fit.eval_points.size(); ++t)
    if (low_effective_weight(out.fit, t))
      out.warnings.push_back(
          "evaluation point " + std::to_string(t) +
          " accumulated total localization weight below 1; the estimate "
          "there is close to the initial measure");
  return out;
}

/// A fitted model that can produce conditional densities and quantiles at
/// arbitrary covariate values by re-running the recursion at that target.
/// Results are cached per target. Not safe for concurrent use.
class DensityModel {
 public:
  DensityModel(Observations normalized_data, KernelSpec kernel,
               LocalizationConfig loc, CovariateScaler scaler,
               MixingMeasure init, int n_perm, std::uint64_t seed,
               int threads = 1)
      : data_(std::move(normalized_data)),
        kernel_(std::move(kernel)),
        loc_(std::move(loc)),
        scaler_(std::move(scaler)),
        init_(std::move(init)),
        n_perm_(n_perm),
        seed_(seed),
        threads_(threads) {}

  static DensityModel from_pipeline(const Observations& raw,
                                    const PipelineOutput& po) {
    Observations data = raw;
    data.x = po.scaler.transform(raw.x);
    return DensityModel(std::move(data), po.kernel, po.loc, po.scaler,
                        po.init, po.fit.permutations_used, po.fit.seed,
                        1);
  }

  const MixingMeasure& measure_at(const std::vector<double>& x_raw) const {
    const std::vector<double> key = scaler_.transform(x_raw);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const FitResult fr = fit_permuted(data_, {key}, loc_, kernel_, init_,
                                      n_perm_, seed_, threads_);
    return cache_.emplace(key, fr.measures[0]).first->second;
  }

  std::vector<double> density(const std::vector<double>& x_raw,
                              const std::vector<double>& y_grid,
                              std::optional<double> tag = std::nullopt) const {
    const MixingMeasure& m = measure_at(x_raw);
    std::vector<double> out(y_grid.size());
    for (std::size_t i = 0; i < y_grid.size(); ++i)
      out[i] = mix_density(m, kernel_, y_grid[i], tag);
    return out;
  }

  double quantile(const std::vector<double>& x_raw, double tau,
                  const std::vector<double>& y_grid,
                  std::optional<double> tag = std::nullopt) const {
    return quantile_from_density(density(x_raw, y_grid, tag), y_grid, tau);
  }

  const DominatingMeasure& dom() const { return init_.dom; }

 private:
  Observations data_;
  KernelSpec kernel_;
  LocalizationConfig loc_;
  CovariateScaler scaler_;
  MixingMeasure init_;
  int n_perm_;
  std::uint64_t seed_;
  int threads_;
  mutable std::map<std::vector<double>, MixingMeasure> cache_;
};

inline std::vector<double> uniform_y_grid(const DominatingMeasure& dom,
                                          int n = 401) {
  if (n < 2) throw UsageError("y grid needs at least 2 points");
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    g[static_cast<std::size_t>(i)] =
        dom.lo + (dom.hi - dom.lo) * i / static_cast<double>(n - 1);
  return g;
}

/// Wrap the pipeline as a cross-validation fit procedure: train on each fold
/// (re-estimating whatever the config leaves free), answer quantile queries
/// by inverting the conditional density at the queried covariate value.
inline FitProcedure make_fit_procedure(PipelineConfig cfg, int y_grid_n = 401) {
  return [cfg, y_grid_n](const Observations& train) -> QuantilePredictor {
    if (cfg.kernel.needs_tag())
      throw UsageError(
          "cross-validation supports kernels that need no per-row tag");
    PipelineConfig fold_cfg = cfg;
    fold_cfg.eval_count = 2;  // the real work happens per query, not here
    PipelineOutput po = run_pipeline(train, Matrix{}, fold_cfg);
    auto model =
        std::make_shared<DensityModel>(DensityModel::from_pipeline(train, po));
    auto grid = std::make_shared<std::vector<double>>(
        uniform_y_grid(po.dom, y_grid_n));
    return [model, grid](const std::vector<double>& x, double tau) {
      return model->quantile(x, tau, *grid);
    };
  };
}

}  // namespace prx
