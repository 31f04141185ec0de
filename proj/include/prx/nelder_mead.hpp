#pragma once

// Derivative-free simplex maximizer. The search runs in unconstrained
// coordinates: each parameter declares a transform (identity, or log for
// positive parameters) and a box; points mapping outside the box score -inf
// and are never passed to the objective. Moves use the classic coefficients
// reflect 1, expand 2, contract 0.5, shrink 0.5. Convergence is a simplex
// diameter below `tol` in transformed coordinates. The evaluation budget is
// shared across a three-point multistart: the given start and elementwise
// +/- 0.7 shifts of it in transformed space.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "prx/errors.hpp"

namespace prx {

struct ParamTransform {
  enum class Kind { identity, log_positive };
  Kind kind = Kind::identity;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  static ParamTransform identity(
      double lo = -std::numeric_limits<double>::infinity(),
      double hi = std::numeric_limits<double>::infinity()) {
    return {Kind::identity, lo, hi};
  }
  /// Positive parameter searched on the log scale, optional upper bound.
  static ParamTransform log_positive(
      double hi = std::numeric_limits<double>::infinity()) {
    return {Kind::log_positive, 0.0, hi};
  }

  double unconstrain(double x) const {
    return kind == Kind::log_positive ? std::log(x) : x;
  }
  double constrain(double t) const {
    return kind == Kind::log_positive ? std::exp(t) : t;
  }
  bool in_box(double x) const { return x >= lo && x <= hi; }
};

struct OptimResult {
  std::vector<double> argmax;  ///< original units
  double value = -std::numeric_limits<double>::infinity();
  int evaluations = 0;
  bool converged = false;
  /// Every objective evaluation in order: (params in original units, value).
  std::vector<std::pair<std::vector<double>, double>> trace;
};

inline OptimResult nelder_mead_maximize(
    const std::function<double(const std::vector<double>&)>& objective,
    const std::vector<double>& init,
    const std::vector<ParamTransform>& transforms, int max_evals = 500,
    double tol = 1e-6) {
  const std::size_t d = init.size();
  if (d == 0) throw UsageError("nelder_mead: no free parameters");
  if (transforms.size() != d)
    throw UsageError("nelder_mead: one transform per parameter required");
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  OptimResult res;
  res.argmax = init;

  auto to_original = [&](const std::vector<double>& t) {
    std::vector<double> x(d);
    for (std::size_t j = 0; j < d; ++j) x[j] = transforms[j].constrain(t[j]);
    return x;
  };

  // Evaluate at a transformed point; box violations score -inf without
  // touching the objective. Tracks the running best (strict improvement, so
  // ties keep the earliest point; a flat objective returns the start).
  auto eval = [&](const std::vector<double>& t) {
    const auto x = to_original(t);
    double f = kNegInf;
    bool ok = true;
    for (std::size_t j = 0; j < d; ++j)
      if (!transforms[j].in_box(x[j])) ok = false;
    if (ok) {
      f = objective(x);
      if (std::isnan(f)) f = kNegInf;
    }
    ++res.evaluations;
    res.trace.emplace_back(x, f);
    if (f > res.value) {
      res.value = f;
      res.argmax = x;
    }
    return f;
  };

  std::vector<double> t0(d);
  for (std::size_t j = 0; j < d; ++j) t0[j] = transforms[j].unconstrain(init[j]);

  const double kStartShift[3] = {0.0, 0.7, -0.7};
  for (double shift : kStartShift) {
    if (res.evaluations >= max_evals) break;

    // Initial simplex: start point plus one 0.5-step per coordinate.
    std::vector<std::vector<double>> simplex(d + 1,
                                             std::vector<double>(d, 0.0));
    std::vector<double> f(d + 1, kNegInf);
    for (std::size_t v = 0; v <= d; ++v) {
      for (std::size_t j = 0; j < d; ++j) simplex[v][j] = t0[j] + shift;
      if (v > 0) simplex[v][v - 1] += 0.5;
      if (res.evaluations >= max_evals) break;
      f[v] = eval(simplex[v]);
    }

    while (res.evaluations < max_evals) {
      // Order vertices best-first (stable: earlier vertex wins ties).
      std::vector<std::size_t> idx(d + 1);
      for (std::size_t v = 0; v <= d; ++v) idx[v] = v;
      std::stable_sort(idx.begin(), idx.end(),
                       [&](std::size_t a, std::size_t b) { return f[a] > f[b]; });
      {
        std::vector<std::vector<double>> s2(d + 1);
        std::vector<double> f2(d + 1);
        for (std::size_t v = 0; v <= d; ++v) {
          s2[v] = simplex[idx[v]];
          f2[v] = f[idx[v]];
        }
        simplex.swap(s2);
        f.swap(f2);
      }

      double diameter = 0.0;
      for (std::size_t v = 1; v <= d; ++v)
        for (std::size_t j = 0; j < d; ++j)
          diameter = std::max(diameter,
                              std::fabs(simplex[v][j] - simplex[0][j]));
      if (diameter < tol) {
        res.converged = true;
        break;
      }

      std::vector<double> centroid(d, 0.0);
      for (std::size_t v = 0; v < d; ++v)
        for (std::size_t j = 0; j < d; ++j) centroid[j] += simplex[v][j];
      for (double& c : centroid) c /= static_cast<double>(d);

      auto blend = [&](double coef) {
        std::vector<double> p(d);
        for (std::size_t j = 0; j < d; ++j)
          p[j] = centroid[j] + coef * (centroid[j] - simplex[d][j]);
        return p;
      };

      const auto xr = blend(1.0);  // reflection
      const double fr = eval(xr);
      if (fr > f[0]) {
        if (res.evaluations >= max_evals) {
          simplex[d] = xr;
          f[d] = fr;
          continue;
        }
        const auto xe = blend(2.0);  // expansion
        const double fe = eval(xe);
        if (fe > fr) {
          simplex[d] = xe;
          f[d] = fe;
        } else {
          simplex[d] = xr;
          f[d] = fr;
        }
        continue;
      }
      if (fr > f[d - 1]) {  // better than second worst: accept reflection
        simplex[d] = xr;
        f[d] = fr;
        continue;
      }
      if (res.evaluations >= max_evals) break;
      if (fr > f[d]) {  // outside contraction
        const auto xc = blend(0.5);
        const double fc = eval(xc);
        if (fc >= fr) {
          simplex[d] = xc;
          f[d] = fc;
          continue;
        }
      } else {  // inside contraction
        const auto xc = blend(-0.5);
        const double fc = eval(xc);
        if (fc > f[d]) {
          simplex[d] = xc;
          f[d] = fc;
          continue;
        }
      }
      // Shrink toward the best vertex.
      for (std::size_t v = 1; v <= d; ++v) {
        for (std::size_t j = 0; j < d; ++j)
          simplex[v][j] = simplex[0][j] + 0.5 * (simplex[v][j] - simplex[0][j]);
        if (res.evaluations >= max_evals) break;
        f[v] = eval(simplex[v]);
      }
    }
  }
  return res;
}

}  // namespace prx
