#pragma once

// Discretized mixing measures. The dominating measure is Lebesgue on a
// compact interval [lo, hi] represented by an even grid with trapezoid
// quadrature, optionally augmented with a point mass (spike) at a designated
// location. The spike is carried as a separate scalar mass, never as a grid
// cell, so quadrature weights stay unambiguous.

#include <cmath>
#include <optional>
#include <vector>

#include "prx/errors.hpp"
#include "prx/kernels.hpp"

namespace prx {

struct DominatingMeasure {
  double lo = 0.0;
  double hi = 1.0;
  int n_grid = 200;
  std::optional<double> atom;  ///< spike location, if any

  void validate() const {
    if (!(lo < hi)) throw DomainError("dominating measure: need lo < hi");
    if (n_grid < 2) throw DomainError("dominating measure: need n_grid >= 2");
    if (atom && !(*atom >= lo && *atom <= hi))
      throw DomainError("dominating measure: atom outside [lo, hi]");
  }

  double dx() const { return (hi - lo) / (n_grid - 1); }
  double theta(int g) const { return lo + dx() * g; }

  std::vector<double> grid() const {
    std::vector<double> t(static_cast<std::size_t>(n_grid));
    for (int g = 0; g < n_grid; ++g) t[static_cast<std::size_t>(g)] = theta(g);
    return t;
  }

  /// Trapezoid quadrature weights for the Lebesgue part.
  std::vector<double> quad_weights() const {
    std::vector<double> w(static_cast<std::size_t>(n_grid), dx());
    w.front() *= 0.5;
    w.back() *= 0.5;
    return w;
  }

  bool operator==(const DominatingMeasure&) const = default;
};

/// A density w.r.t. the dominating measure: values of the Lebesgue part on
/// the grid plus the mass sitting on the spike (when the measure has one).
struct MixingMeasure {
  DominatingMeasure dom;
  std::vector<double> density;       ///< length dom.n_grid, values >= 0
  std::optional<double> atom_mass;   ///< present iff dom.atom is
};

/// Total mass: spike mass plus trapezoid quadrature of the Lebesgue part.
inline double total_mass(const MixingMeasure& m) {
  const double dx = m.dom.dx();
  double s = 0.0;
  for (double v : m.density) s += v;
  s -= 0.5 * (m.density.front() + m.density.back());
  return s * dx + m.atom_mass.value_or(0.0);
}

/// Divide by total mass so the measure integrates to exactly 1; absorbs
/// quadrature drift after recursion updates. Returns the mass divided out.
inline double renormalize(MixingMeasure& m) {
  const double z = total_mass(m);
  if (!(z > 0.0)) throw DomainError("mixing measure: nonpositive total mass");
  const double inv = 1.0 / z;
  for (double& v : m.density) v *= inv;
  if (m.atom_mass) *m.atom_mass *= inv;
  return z;
}

/// Uniform initial measure: mass atom_mass on the spike (when present) and
/// the rest spread evenly over [lo, hi]. Total mass is exactly 1.
inline MixingMeasure uniform_init(const DominatingMeasure& dom,
                                  std::optional<double> atom_mass = {}) {
  dom.validate();
  if (dom.atom.has_value() != atom_mass.has_value())
    throw UsageError(
        "uniform_init: atom_mass must be given exactly when the dominating "
        "measure has an atom");
  const double am = atom_mass.value_or(0.0);
  if (am < 0.0 || am > 1.0)
    throw DomainError("uniform_init: atom_mass outside [0,1]");
  MixingMeasure m;
  m.dom = dom;
  m.density.assign(static_cast<std::size_t>(dom.n_grid),
                   (1.0 - am) / (dom.hi - dom.lo));
  m.atom_mass = atom_mass;
  return m;
}

/// Mixture density m(y) = integral of k(y|theta) f(theta) d mu(theta):
/// spike contribution plus trapezoid quadrature over the grid. Values below
/// 1e-300 are possible; callers treat those as underflow.
inline double mix_density(const MixingMeasure& m, const KernelSpec& k,
                          double y, std::optional<double> tag = {}) {
  k.validate();
  const double t = resolve_tag(k, tag);
  const double dx = m.dom.dx();
  double s = 0.0;
  std::vector<double> kv(m.density.size());
  for (std::size_t g = 0; g < m.density.size(); ++g) {
    kv[g] = kernel_value(k, y, m.dom.theta(static_cast<int>(g)), t);
    s += kv[g] * m.density[g];
  }
  s -= 0.5 * (kv.front() * m.density.front() + kv.back() * m.density.back());
  double out = s * dx;
  if (m.atom_mass)
    out += *m.atom_mass * kernel_value(k, y, *m.dom.atom, t);
  return out;
}

}  // namespace prx
