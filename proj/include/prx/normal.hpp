#pragma once

// Standard normal primitives built on W. J. Cody's rational Chebyshev
// approximations for erf/erfc (SPECFUN), so that density, CDF and quantile
// values are reproducible across platforms and accurate to ~1e-15.

#include <cmath>
#include <limits>
#include <numbers>

namespace prx {

namespace detail {

// Cody's approximation, region |x| <= 0.46875.
inline double erf_small(double x) {
  static constexpr double p[5] = {
      3.209377589138469472562e3, 3.774852376853020208137e2,
      1.138641541510501556495e2, 3.161123743870565596947e0,
      1.857777061846031526730e-1};
  static constexpr double q[5] = {
      2.844236833439170622273e3, 1.282616526077372275645e3,
      2.440246379344441733056e2, 2.360129095234412093499e1, 1.0};
  const double z = x * x;
  double num = p[4] * z, den = q[4] * z;
  for (int i = 3; i > 0; --i) {
    num = (num + p[i]) * z;
    den = (den + q[i]) * z;
  }
  return x * (num + p[0]) / (den + q[0]);
}

// Cody's approximation, region 0.46875 < x <= 4, returns erfc(x).
inline double erfc_mid(double x) {
  static constexpr double p[9] = {
      1.23033935479799725272e3, 2.05107837782607146532e3,
      1.71204761263407058314e3, 8.81952221241769090411e2,
      2.98635138197400131132e2, 6.61191906371416294775e1,
      8.88314979438837594118e0, 5.64188496988670089180e-1,
      2.15311535474403846343e-8};
  static constexpr double q[9] = {
      1.23033935480374942043e3, 3.43936767414372163696e3,
      4.36261909014324715820e3, 3.29079923573345962678e3,
      1.62138957456669018874e3, 5.37181101862009857509e2,
      1.17693950891312499305e2, 1.57449261107098347253e1, 1.0};
  double num = p[8] * x, den = q[8] * x;
  for (int i = 7; i > 0; --i) {
    num = (num + p[i]) * x;
    den = (den + q[i]) * x;
  }
  const double r = (num + p[0]) / (den + q[0]);
  // exp(-x^2) split to reduce rounding in the argument
  const double xh = std::floor(x * 16.0) / 16.0;
  const double e = std::exp(-xh * xh) * std::exp(-(x - xh) * (x + xh));
  return e * r;
}

// Cody's approximation, region x > 4, returns erfc(x).
inline double erfc_large(double x) {
  static constexpr double p[6] = {
      6.58749161529837803157e-4, 1.60837851487422766278e-2,
      1.25781726111229246204e-1, 3.60344899949804439429e-1,
      3.05326634961232344035e-1, 1.63153871373020978498e-2};
  static constexpr double q[6] = {
      2.33520497626869185443e-3, 6.05183413124413191178e-2,
      5.27905102951428412248e-1, 1.87295284992346047209e0,
      2.56852019228982242072e0,  1.0};
  // erfc stays representable as a subnormal until about 27.2; past 27.5 even
  // the subnormal range is exhausted and the exp factors underflow anyway.
  if (x > 27.5) return 0.0;
  const double z = 1.0 / (x * x);
  double num = p[5] * z, den = q[5] * z;
  for (int i = 4; i > 0; --i) {
    num = (num + p[i]) * z;
    den = (den + q[i]) * z;
  }
  double r = z * (num + p[0]) / (den + q[0]);
  r = (std::numbers::inv_sqrtpi - r) / x;
  const double xh = std::floor(x * 16.0) / 16.0;
  const double e = std::exp(-xh * xh) * std::exp(-(x - xh) * (x + xh));
  return e * r;
}

}  // namespace detail

inline double erf_cody(double x) {
  const double ax = std::fabs(x);
  if (ax <= 0.46875) return detail::erf_small(x);
  const double ec = ax <= 4.0 ? detail::erfc_mid(ax) : detail::erfc_large(ax);
  return x > 0 ? 1.0 - ec : ec - 1.0;
}

inline double erfc_cody(double x) {
  const double ax = std::fabs(x);
  double ec;
  if (ax <= 0.46875)
    ec = 1.0 - detail::erf_small(ax);
  else if (ax <= 4.0)
    ec = detail::erfc_mid(ax);
  else
    ec = detail::erfc_large(ax);
  return x >= 0 ? ec : 2.0 - ec;
}

// Standard normal density.
inline double norm_pdf(double z) {
  return 0.3989422804014326779 * std::exp(-0.5 * z * z);
}

// N(mean, sd^2) density.
inline double normal_density(double y, double mean, double sd) {
  return norm_pdf((y - mean) / sd) / sd;
}

// Standard normal CDF via erfc (stable in the left tail).
inline double norm_cdf(double z) {
  return 0.5 * erfc_cody(-z * std::numbers::sqrt2 * 0.5);
}

// Standard normal quantile: Newton iteration on norm_cdf with an
// asymptotic tail start, accurate to machine precision for p in (0,1).
inline double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) return std::numeric_limits<double>::quiet_NaN();
  const bool flip = p > 0.5;
  const double pl = flip ? 1.0 - p : p;  // work in the left tail
  double x;
  if (pl > 0.1) {
    x = 0.0;
  } else {
    // leading term of the tail expansion of Phi^{-1}
    const double t = std::sqrt(-2.0 * std::log(pl));
    x = -(t - std::log(t * t * 2.506628274631000502) / (2.0 * t));
  }
  for (int it = 0; it < 100; ++it) {
    const double f = norm_cdf(x) - pl;
    const double d = norm_pdf(x);
    if (d <= 0.0) break;
    const double step = f / d;
    x -= step;
    if (std::fabs(step) < 1e-15 * (1.0 + std::fabs(x))) break;
  }
  return flip ? -x : x;
}

}  // namespace prx
