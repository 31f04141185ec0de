#pragma once

// Seeded scenario generators with exact truth evaluators for scoring.
// Every draw flows from one counter-based generator in a fixed order, so a
// (scenario, n, seed) triple always yields the same dataset on any platform.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "prx/errors.hpp"
#include "prx/kernels.hpp"
#include "prx/normal.hpp"
#include "prx/recursion.hpp"
#include "prx/rng.hpp"

namespace prx {

enum class ScenarioKind {
  location_shift,      ///< theta|x ~ N(3 sin(2 pi x), 1), y ~ N(theta, 1)
  mixture_transition,  ///< latent Bernoulli(x) switch between N(+-2, 1)
  beta_concentration,  ///< misspecified: Gamma-mixed Beta(a, 2) outcomes
  high_dim20,          ///< 20 uniform covariates, smooth mean/scale surfaces
  two_groups_fdr,      ///< z-values: spike null N(0,1), shifted slab
  skew_synthetic,      ///< skew-normal outcomes, shape linear in a 0/1 tag
};

struct Scenario {
  ScenarioKind kind = ScenarioKind::location_shift;
  std::size_t n = 500;
  std::uint64_t seed = 0;
};

/// Exact conditional outcome density m(y | x) for a scenario.
struct TruthHandle {
  bool available = false;
  std::function<double(const std::vector<double>&, double)> density;
};

struct SimData {
  Observations obs;
  std::vector<int> is_null;  ///< two_groups_fdr only: 1 = null hypothesis
  TruthHandle truth;
  /// Convention notes worth carrying into manifests (e.g. how a dispersion
  /// argument was read).
  std::vector<std::pair<std::string, std::string>> meta;
};

// --- truth evaluators ------------------------------------------------------

inline double location_shift_truth(double x, double y) {
  const double mean = 3.0 * std::sin(2.0 * std::numbers::pi * x);
  return normal_density(y, mean, std::sqrt(2.0));
}

/// Component dispersion reads "0.5" as a standard deviation, so each branch
/// has variance 1 + 0.25.
inline double mixture_transition_truth(double x, double y) {
  const double sd = std::sqrt(1.25);
  return x * normal_density(y, 2.0, sd) + (1.0 - x) * normal_density(y, -2.0, sd);
}

inline double beta_concentration_shape(double x) { return 0.5 + 4.5 * x; }

/// Gamma(k,1)-mixture of Beta(a,2) densities in closed form:
/// integral of a(a+1) y^(a-1) (1-y) * a^(k-1) e^(-a) / Gamma(k) da
///   = (1-y)/y * k * [ (k+1)/c^(k+2) + 1/c^(k+1) ],   c = 1 - ln y.
/// Diverges (integrably in y, not in y^2) as y -> 0.
inline double beta_concentration_truth(double x, double y) {
  if (y <= 0.0 || y >= 1.0) return 0.0;
  const double k = beta_concentration_shape(x);
  const double c = 1.0 - std::log(y);
  return (1.0 - y) / y * k *
         ((k + 1.0) * std::pow(c, -(k + 2.0)) + std::pow(c, -(k + 1.0)));
}

inline double high_dim_mu(const std::vector<double>& x) {
  double s = 0.0;
  for (double xi : x)
    s += (xi - 0.5) * (xi - 0.5) * (xi - 0.5) +
         0.3 * std::sin(2.0 * std::numbers::pi * xi);
  return s / std::sqrt(20.0);
}

inline double high_dim_sigma(const std::vector<double>& x) {
  double s = 0.0;
  for (double xi : x) s += xi;
  return 0.2 + 0.3 / 20.0 * s;
}

inline double high_dim20_truth(const std::vector<double>& x, double y) {
  const double sig = high_dim_sigma(x);
  return normal_density(y, high_dim_mu(x), std::sqrt(sig * sig + 1.0));
}

inline double two_groups_pi0(double x) { return 1.0 / (1.0 + std::exp(-(2.0 - 4.0 * x))); }

inline double two_groups_mu(double x) { return x < 0.5 ? -4.0 + 4.0 * x : 4.0 * x; }

inline double two_groups_truth(double x, double z) {
  const double p0 = two_groups_pi0(x);
  return p0 * normal_density(z, 0.0, 1.0) +
         (1.0 - p0) * normal_density(z, two_groups_mu(x), std::sqrt(2.0));
}

// Skew-synthetic generating values: location theta | x1 ~ N(0.4 + 0.2 x1,
// 0.05^2), scale psi = 0.1, shape s(t) = -(alpha + beta t) with alpha = -2,
// beta = 4 (so t = 0 skews right, t = 1 skews left).
struct SkewSyntheticParams {
  double alpha = -2.0;
  double beta = 4.0;
  double psi = 0.1;
  double loc_intercept = 0.4;
  double loc_slope = 0.2;
  double loc_sd = 0.05;
};

/// Exact m(y | x1, t) by quadrature over the latent location.
inline double skew_synthetic_truth(const std::vector<double>& x, double y,
                                   const SkewSyntheticParams& p = {}) {
  const double mean = p.loc_intercept + p.loc_slope * x[0];
  const double s = skew_shape(p.alpha, p.beta, x[1]);
  const int n_quad = 201;
  const double lo = mean - 6.0 * p.loc_sd, hi = mean + 6.0 * p.loc_sd;
  const double dth = (hi - lo) / (n_quad - 1);
  double sum = 0.0;
  for (int g = 0; g < n_quad; ++g) {
    const double th = lo + dth * g;
    const double w = (g == 0 || g == n_quad - 1) ? 0.5 : 1.0;
    sum += w * normal_density(th, mean, p.loc_sd) *
           skew_normal_pdf(y, th, p.psi, s);
  }
  return sum * dth;
}

// --- generator ---------------------------------------------------------

inline SimData generate(const Scenario& s) {
  if (s.n < 1) throw UsageError("generate: n must be >= 1");
  SimData out;
  Rng rng(s.seed);
  auto& obs = out.obs;
  obs.x.reserve(s.n);
  obs.y.reserve(s.n);

  switch (s.kind) {
    case ScenarioKind::location_shift: {
      for (std::size_t i = 0; i < s.n; ++i) {
        const double x = rng.uniform();
        const double theta =
            rng.normal(3.0 * std::sin(2.0 * std::numbers::pi * x), 1.0);
        obs.x.push_back({x});
        obs.y.push_back(rng.normal(theta, 1.0));
      }
      out.truth = {true, [](const std::vector<double>& x, double y) {
                     return location_shift_truth(x[0], y);
                   }};
      break;
    }
    case ScenarioKind::mixture_transition: {
      for (std::size_t i = 0; i < s.n; ++i) {
        const double x = rng.uniform();
        const bool c = rng.bernoulli(x);
        const double theta = rng.normal(c ? 2.0 : -2.0, 1.0);
        obs.x.push_back({x});
        obs.y.push_back(rng.normal(theta, 0.5));
      }
      out.truth = {true, [](const std::vector<double>& x, double y) {
                     return mixture_transition_truth(x[0], y);
                   }};
      out.meta.emplace_back("component_dispersion",
                            "0.5 read as standard deviation");
      break;
    }
    case ScenarioKind::beta_concentration: {
      for (std::size_t i = 0; i < s.n; ++i) {
        const double x = rng.uniform();
        const double a = rng.gamma(beta_concentration_shape(x));
        obs.x.push_back({x});
        obs.y.push_back(rng.beta(a, 2.0));
      }
      out.truth = {true, [](const std::vector<double>& x, double y) {
                     return beta_concentration_truth(x[0], y);
                   }};
      break;
    }
    case ScenarioKind::high_dim20: {
      for (std::size_t i = 0; i < s.n; ++i) {
        std::vector<double> x(20);
        for (double& xj : x) xj = rng.uniform();
        const double theta = rng.normal(high_dim_mu(x), high_dim_sigma(x));
        obs.y.push_back(rng.normal(theta, 1.0));
        obs.x.push_back(std::move(x));
      }
      out.truth = {true, high_dim20_truth};
      break;
    }
    case ScenarioKind::two_groups_fdr: {
      out.is_null.reserve(s.n);
      for (std::size_t i = 0; i < s.n; ++i) {
        const double x = rng.uniform();
        const bool null_case = rng.bernoulli(two_groups_pi0(x));
        double z;
        if (null_case) {
          z = rng.normal(0.0, 1.0);
        } else {
          const double u = rng.normal(two_groups_mu(x), 1.0);
          z = rng.normal(u, 1.0);
        }
        obs.x.push_back({x});
        obs.y.push_back(z);
        out.is_null.push_back(null_case ? 1 : 0);
      }
      out.truth = {true, [](const std::vector<double>& x, double z) {
                     return two_groups_truth(x[0], z);
                   }};
      break;
    }
    case ScenarioKind::skew_synthetic: {
      const SkewSyntheticParams p;
      obs.tags.reserve(s.n);
      for (std::size_t i = 0; i < s.n; ++i) {
        const double x1 = rng.uniform();
        const double t = rng.bernoulli(0.5) ? 1.0 : 0.0;
        const double theta =
            rng.normal(p.loc_intercept + p.loc_slope * x1, p.loc_sd);
        const double shape = skew_shape(p.alpha, p.beta, t);
        const double delta = shape / std::sqrt(1.0 + shape * shape);
        const double z0 = rng.normal();
        const double z1 = rng.normal();
        const double y =
            theta + p.psi * (delta * std::fabs(z0) +
                             std::sqrt(1.0 - delta * delta) * z1);
        obs.x.push_back({x1, t});
        obs.y.push_back(y);
        obs.tags.push_back(t);
      }
      out.truth = {true, [](const std::vector<double>& x, double y) {
                     return skew_synthetic_truth(x, y);
                   }};
      break;
    }
  }
  return out;
}

}  // namespace prx
