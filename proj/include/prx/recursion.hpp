#pragma once

// The recursion engine. One step takes the current mixing measure f and an
// observation y with weight v to
//
//   f_new(theta) = (1 - v) f(theta) + v * k(y|theta) f(theta) / m(y),
//   m(y) = integral of k(y|theta) f(theta) d mu(theta),
//
// applied to the spike mass by the same convex rule, then renormalized.
// Weights come from the localization module; with all bandwidths zero the
// engine reproduces the classical deterministic-weight recursion.
//
// Internally densities are carried in "mass coordinates" g_k = f_k * w_k
// (w = trapezoid weights), so a predictive value is one dot product and an
// update is one fused sweep. Conversions happen only at the boundary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "prx/errors.hpp"
#include "prx/kernels.hpp"
#include "prx/localization.hpp"
#include "prx/mixing_measure.hpp"
#include "prx/parallel.hpp"
#include "prx/rng.hpp"

namespace prx {

/// Ordered observations: covariate rows, outcomes, and (optionally) the
/// per-observation kernel tags required by tag-dependent families.
struct Observations {
  Matrix x;                  ///< n rows, p columns
  std::vector<double> y;     ///< n outcomes
  std::vector<double> tags;  ///< empty, or n per-observation kernel tags

  std::size_t size() const { return y.size(); }

  void validate() const {
    if (x.size() != y.size())
      throw UsageError("observations: x and y row counts differ");
    if (!tags.empty() && tags.size() != y.size())
      throw UsageError("observations: tag count differs from row count");
    for (const auto& row : x)
      if (row.size() != x.front().size())
        throw UsageError("observations: ragged covariate rows");
  }
};

namespace detail {

constexpr double kUnderflowFloor = 1e-300;
// Below this weight an update moves the density by less than one part in
// 1e15 and is skipped outright.
constexpr double kNegligibleWeight = 1e-15;

struct KernelRow {
  std::vector<double> k;  ///< k(y | theta_g) over the grid
  double k_atom = 0.0;    ///< k(y | atom location), 0 when no atom
};

inline KernelRow kernel_row(const KernelSpec& spec, double y,
                            const DominatingMeasure& dom, double tag) {
  KernelRow r;
  r.k.resize(static_cast<std::size_t>(dom.n_grid));
  for (int g = 0; g < dom.n_grid; ++g)
    r.k[static_cast<std::size_t>(g)] = kernel_value(spec, y, dom.theta(g), tag);
  if (dom.atom) r.k_atom = kernel_value(spec, y, *dom.atom, tag);
  return r;
}

/// Density in mass coordinates: g_k = density_k * quad_weight_k, plus the
/// spike mass. Total mass is plain summation.
struct MassState {
  std::vector<double> g;
  double atom = 0.0;
  bool has_atom = false;
};

inline MassState to_mass(const MixingMeasure& m) {
  MassState s;
  const auto w = m.dom.quad_weights();
  s.g.resize(m.density.size());
  for (std::size_t i = 0; i < m.density.size(); ++i)
    s.g[i] = m.density[i] * w[i];
  s.has_atom = m.atom_mass.has_value();
  s.atom = m.atom_mass.value_or(0.0);
  return s;
}

inline MixingMeasure to_measure(const MassState& s,
                                const DominatingMeasure& dom) {
  MixingMeasure m;
  m.dom = dom;
  const auto w = dom.quad_weights();
  m.density.resize(s.g.size());
  for (std::size_t i = 0; i < s.g.size(); ++i) m.density[i] = s.g[i] / w[i];
  if (s.has_atom) m.atom_mass = s.atom;
  return m;
}

/// Predictive density m(y) of the observation whose kernel row is r.
inline double predictive(const MassState& s, const KernelRow& r) {
  double m = 0.0;
  const std::size_t n = s.g.size();
  for (std::size_t i = 0; i < n; ++i) m += r.k[i] * s.g[i];
  if (s.has_atom) m += r.k_atom * s.atom;
  return m;
}

/// Convex update with weight v given the precomputed predictive value m;
/// renormalizes in the same sweep. Caller guarantees m >= kUnderflowFloor.
inline void apply_update(MassState& s, const KernelRow& r, double v,
                         double m) {
  const double a = 1.0 - v;
  const double b = v / m;
  double mass = 0.0;
  const std::size_t n = s.g.size();
  for (std::size_t i = 0; i < n; ++i) {
    s.g[i] *= a + b * r.k[i];
    mass += s.g[i];
  }
  if (s.has_atom) {
    s.atom *= a + b * r.k_atom;
    mass += s.atom;
  }
  const double inv = 1.0 / mass;
  for (std::size_t i = 0; i < n; ++i) s.g[i] *= inv;
  if (s.has_atom) s.atom *= inv;
}

}  // namespace detail

/// The recursion's state at one target covariate value.
struct RecursionState {
  std::vector<double> target_x;
  MixingMeasure measure;
  long step = 0;                    ///< number of updates actually applied
  double log_predictive_sum = 0.0;  ///< running sum of log m_{i-1}(y_i | x)
  long underflow_skips = 0;         ///< updates skipped because m underflowed
};

/// One recursion step. On predictive underflow (m < 1e-300) the measure is
/// left untouched and only the skip counter moves.
inline RecursionState prx_step(const RecursionState& state, double y, double v,
                               const KernelSpec& spec,
                               std::optional<double> tag = {}) {
  if (!(v >= 0.0 && v < 1.0))
    throw DomainError("prx_step: weight outside [0,1)");
  spec.validate();
  const double t = resolve_tag(spec, tag);
  RecursionState out = state;
  const auto row = detail::kernel_row(spec, y, state.measure.dom, t);
  auto ms = detail::to_mass(state.measure);
  const double m = detail::predictive(ms, row);
  if (m < detail::kUnderflowFloor) {
    ++out.underflow_skips;
    return out;
  }
  if (v > 0.0) {
    detail::apply_update(ms, row, v, m);
    out.measure = detail::to_measure(ms, state.measure.dom);
  }
  ++out.step;
  out.log_predictive_sum += std::log(m);
  return out;
}

/// Run the full recursion at one target, in data order, with weights
/// v_i = beta_i(x) h(S_i(x)). log_predictive_sum accumulates the predictive
/// factor evaluated just before each applied update.
inline RecursionState run_prx(const Observations& data,
                              const std::vector<double>& target_x,
                              const LocalizationConfig& cfg,
                              const KernelSpec& spec,
                              const MixingMeasure& init) {
  data.validate();
  if (data.size() == 0) throw UsageError("run_prx: empty data");
  spec.validate();
  if (spec.needs_tag() && data.tags.empty())
    throw UsageError("run_prx: kernel family requires per-observation tags");
  const auto v = weight_sequence(cfg, data.x, target_x);

  RecursionState st;
  st.target_x = target_x;
  auto ms = detail::to_mass(init);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double tag = data.tags.empty() ? 0.0 : data.tags[i];
    const auto row = detail::kernel_row(spec, data.y[i], init.dom, tag);
    const double m = detail::predictive(ms, row);
    if (m < detail::kUnderflowFloor) {
      ++st.underflow_skips;
      continue;
    }
    if (v[i] > 0.0) detail::apply_update(ms, row, v[i], m);
    ++st.step;
    st.log_predictive_sum += std::log(m);
  }
  st.measure = detail::to_measure(ms, init.dom);
  return st;
}

/// A fitted family of mixing measures, one per evaluation point, averaged
/// over data permutations.
struct FitResult {
  Matrix eval_points;
  std::vector<MixingMeasure> measures;
  int permutations_used = 1;
  std::uint64_t seed = 0;
  /// Sum of weights v_i at each evaluation point in data order; a value
  /// below 1 means the point sits far outside the covariate hull and the
  /// estimate there is close to the initial measure.
  std::vector<double> weight_sums;
  long underflow_skips = 0;
};

inline bool low_effective_weight(const FitResult& fit, std::size_t idx) {
  return fit.weight_sums[idx] < 1.0;
}

/// Fit at several evaluation points, averaging the recursion output over
/// n_perm data orderings. Ordering 0 is always the identity (so n_perm = 1
/// reproduces run_prx); the rest are seeded Fisher-Yates draws. Jobs run
/// concurrently but are reduced in fixed order, so the result depends only
/// on the seed.
inline FitResult fit_permuted(const Observations& data,
                              const Matrix& eval_points,
                              const LocalizationConfig& cfg,
                              const KernelSpec& spec, const MixingMeasure& init,
                              int n_perm, std::uint64_t seed,
                              unsigned threads = 1) {
  data.validate();
  spec.validate();
  cfg.validate();
  if (data.size() == 0) throw UsageError("fit_permuted: empty data");
  if (n_perm < 1) throw UsageError("fit_permuted: n_perm must be >= 1");
  if (eval_points.empty()) throw UsageError("fit_permuted: no eval points");
  if (spec.needs_tag() && data.tags.empty())
    throw UsageError("fit_permuted: kernel family requires tags");

  const std::size_t n = data.size();
  const std::size_t n_targets = eval_points.size();
  const std::size_t n_perms = static_cast<std::size_t>(n_perm);

  // Kernel rows depend only on the observation, not on target or ordering.
  std::vector<detail::KernelRow> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double tag = data.tags.empty() ? 0.0 : data.tags[i];
    rows[i] = detail::kernel_row(spec, data.y[i], init.dom, tag);
  }

  // Localization kernel values per (target, observation).
  std::vector<std::vector<double>> betas(n_targets);
  for (std::size_t t = 0; t < n_targets; ++t) {
    betas[t].resize(n);
    for (std::size_t i = 0; i < n; ++i)
      betas[t][i] = loc_kernel(cfg, data.x[i], eval_points[t]);
  }

  // Orderings: identity first, then seeded draws.
  const Rng master(seed);
  std::vector<std::vector<std::size_t>> perms(n_perms);
  perms[0].resize(n);
  for (std::size_t i = 0; i < n; ++i) perms[0][i] = i;
  for (std::size_t r = 1; r < n_perms; ++r) {
    Rng lane = master.fork(r);
    perms[r] = random_permutation(n, lane);
  }

  const detail::MassState init_ms = detail::to_mass(init);
  std::vector<detail::MassState> slots(n_targets * n_perms);
  std::vector<long> skip_counts(n_targets * n_perms, 0);

  parallel_for(n_targets * n_perms, threads, [&](std::size_t job) {
    const std::size_t t = job / n_perms;
    const std::size_t r = job % n_perms;
    detail::MassState ms = init_ms;
    const auto& order = perms[r];
    const auto& beta = betas[t];
    double s = 0.0;
    long skips = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = order[k];
      const double b = beta[i];
      s += b;
      const double v = b * weight_decay(s, cfg.gamma);
      if (v < detail::kNegligibleWeight) continue;
      const double m = detail::predictive(ms, rows[i]);
      if (m < detail::kUnderflowFloor) {
        ++skips;
        continue;
      }
      detail::apply_update(ms, rows[i], v, m);
    }
    slots[job] = std::move(ms);
    skip_counts[job] = skips;
  });

  FitResult fit;
  fit.eval_points = eval_points;
  fit.permutations_used = n_perm;
  fit.seed = seed;
  fit.measures.reserve(n_targets);
  fit.weight_sums.resize(n_targets);
  const double inv_r = 1.0 / static_cast<double>(n_perms);
  for (std::size_t t = 0; t < n_targets; ++t) {
    detail::MassState avg = init_ms;
    std::fill(avg.g.begin(), avg.g.end(), 0.0);
    avg.atom = 0.0;
    for (std::size_t r = 0; r < n_perms; ++r) {
      const auto& s = slots[t * n_perms + r];
      for (std::size_t i = 0; i < avg.g.size(); ++i) avg.g[i] += s.g[i];
      avg.atom += s.atom;
      fit.underflow_skips += skip_counts[t * n_perms + r];
    }
    for (double& gi : avg.g) gi *= inv_r;
    avg.atom *= inv_r;
    MixingMeasure m = detail::to_measure(avg, init.dom);
    renormalize(m);
    fit.measures.push_back(std::move(m));

    double wsum = 0.0, s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += betas[t][i];
      wsum += betas[t][i] * weight_decay(s, cfg.gamma);
    }
    fit.weight_sums[t] = wsum;
  }
  return fit;
}

/// Conditional outcome density at one fitted evaluation point over a y-grid.
inline std::vector<double> conditional_density(const FitResult& fit,
                                               std::size_t eval_index,
                                               const KernelSpec& spec,
                                               const std::vector<double>& y_grid,
                                               std::optional<double> tag = {}) {
  if (eval_index >= fit.measures.size())
    throw UsageError("conditional_density: eval_index out of range");
  std::vector<double> out(y_grid.size());
  for (std::size_t i = 0; i < y_grid.size(); ++i)
    out[i] = mix_density(fit.measures[eval_index], spec, y_grid[i], tag);
  return out;
}

}  // namespace prx
