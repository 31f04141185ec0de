#pragma once

// Observation kernels: the conditional density k(y | theta) linking a latent
// location theta to an observable y. The recursion engine only sees kernels
// through these functions, so adding a family means adding one enum value and
// one case below (or supplying a callback via KernelFamily::custom).

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "prx/errors.hpp"
#include "prx/normal.hpp"

namespace prx {

enum class KernelFamily {
  gaussian,             ///< N(y; theta, sigma^2)
  skew_normal,          ///< Azzalini density with tag-dependent shape
  null_point_gaussian,  ///< N(z; theta0 + u, sigma0^2), grid holds shifts u
  custom,               ///< user callback (y, theta, tag) -> density
};

/// Shape of the skew-normal component as a function of the per-observation
/// tag t (e.g. t = 0/1 group indicator): s(t) = -(alpha + beta * t).
inline double skew_shape(double alpha, double beta, double t) {
  return -(alpha + beta * t);
}

/// Azzalini skew-normal density with location theta, scale psi, shape s:
/// (2/psi) * phi((y-theta)/psi) * Phi(s * (y-theta)/psi).
inline double skew_normal_pdf(double y, double theta, double psi, double s) {
  const double z = (y - theta) / psi;
  return 2.0 / psi * norm_pdf(z) * norm_cdf(s * z);
}

struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;

  double sigma = 1.0;  ///< gaussian scale

  double psi = 1.0;    ///< skew_normal scale
  double alpha = 0.0;  ///< skew_normal shape intercept
  double beta = 0.0;   ///< skew_normal shape slope on the tag

  double theta0 = 0.0;  ///< null_point_gaussian center
  double sigma0 = 1.0;  ///< null_point_gaussian scale

  /// Only read when family == custom. Signature: (y, theta, tag) -> density.
  std::function<double(double, double, double)> custom;

  bool needs_tag() const { return family == KernelFamily::skew_normal; }

  void validate() const {
    if (family == KernelFamily::gaussian && !(sigma > 0.0))
      throw DomainError("kernel: sigma must be positive");
    if (family == KernelFamily::skew_normal && !(psi > 0.0))
      throw DomainError("kernel: psi must be positive");
    if (family == KernelFamily::null_point_gaussian && !(sigma0 > 0.0))
      throw DomainError("kernel: sigma0 must be positive");
    if (family == KernelFamily::custom && !custom)
      throw UsageError("kernel: custom family requires a callback");
  }
};

/// Unchecked scalar evaluation of k(y | theta); hot paths call this after a
/// single up-front validate(). The tag is meaningful for skew_normal and
/// custom families, ignored otherwise.
inline double kernel_value(const KernelSpec& k, double y, double theta,
                           double tag = 0.0) {
  switch (k.family) {
    case KernelFamily::gaussian: {
      const double z = (y - theta) / k.sigma;
      return norm_pdf(z) / k.sigma;
    }
    case KernelFamily::skew_normal:
      return skew_normal_pdf(y, theta, k.psi, skew_shape(k.alpha, k.beta, tag));
    case KernelFamily::null_point_gaussian: {
      const double z = (y - (k.theta0 + theta)) / k.sigma0;
      return norm_pdf(z) / k.sigma0;
    }
    case KernelFamily::custom:
      return k.custom(y, theta, tag);
  }
  return 0.0;  // unreachable
}

/// Resolve the optional per-observation tag, enforcing that families which
/// depend on it actually received one.
inline double resolve_tag(const KernelSpec& k, std::optional<double> tag) {
  if (k.needs_tag() && !tag)
    throw UsageError("kernel: skew-normal family requires a covariate tag");
  return tag.value_or(0.0);
}

/// Evaluate k(y | theta_g) over a grid of latent locations.
inline std::vector<double> eval_kernel(const KernelSpec& k, double y,
                                       const std::vector<double>& theta_grid,
                                       std::optional<double> tag = {}) {
  if (theta_grid.empty()) throw UsageError("eval_kernel: empty theta grid");
  k.validate();
  const double t = resolve_tag(k, tag);
  std::vector<double> out(theta_grid.size());
  for (std::size_t g = 0; g < theta_grid.size(); ++g)
    out[g] = kernel_value(k, y, theta_grid[g], t);
  return out;
}

}  // namespace prx
