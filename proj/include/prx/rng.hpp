#pragma once

// Counter-based pseudo-random generator (SplitMix64 finalizer applied to a
// Weyl sequence) plus the handful of variate transforms the toolkit needs.
// Counter-based means: state is {seed, counter}, every draw is a pure
// function of both, and independent substreams fork cheaply.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "prx/normal.hpp"

namespace prx {

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(detail::mix64(seed ^ kGamma)) {}

  // Raw 64-bit draw.
  std::uint64_t next_u64() {
    counter_ += kGamma;
    return detail::mix64(seed_ ^ counter_);
  }

  // Uniform on the open interval (0,1): 52-bit mantissa, centered, so the
  // result is never exactly 0 or 1 (safe under log and quantile maps).
  double uniform() {
    return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1p-52;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via quantile inversion (exactly one uniform per draw,
  // which keeps substream alignment simple).
  double normal() { return norm_quantile(uniform()); }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Bernoulli(p).
  bool bernoulli(double p) { return uniform() < p; }

  // Gamma(shape, scale=1) via Marsaglia–Tsang squeeze; shapes below one are
  // boosted with the standard U^{1/shape} trick. For very small shapes the
  // boost factor can underflow past the subnormal range even though the true
  // draw is positive, so underflowed draws are pinned to the smallest
  // representable positive value (the support is the open half-line).
  double gamma(double shape) {
    if (shape < 1.0) {
      const double u = uniform();
      const double draw = gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
      return std::max(draw, std::numeric_limits<double>::denorm_min());
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  // Beta(a, b) as a ratio of gammas. Extreme shape ratios can drive the
  // ratio itself out of representable range (e.g. a tiny gamma numerator
  // against a moderate denominator), so the result is pinned to the open
  // unit interval the distribution actually lives on.
  double beta(double a, double b) {
    const double g1 = gamma(a);
    const double g2 = gamma(b);
    const double r = g1 / (g1 + g2);
    return std::clamp(r, std::numeric_limits<double>::denorm_min(),
                      1.0 - std::numeric_limits<double>::epsilon() / 2.0);
  }

  // Integer in [0, n). Modulo of a 64-bit draw; the bias is < 2^-50 for the
  // small n used here.
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(next_u64() % n);
  }

  // Derive an independent substream keyed by `lane`.
  Rng fork(std::uint64_t lane) const {
    return Rng(detail::mix64(seed_ ^ (lane * 0xD6E8FEB86659FD93ull)));
  }

 private:
  explicit Rng(std::uint64_t mixed, int) : seed_(mixed) {}
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

// Derive an independent 64-bit seed for a keyed sub-task (replicate, fold,
// permutation) from a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t lane) {
  return detail::mix64(detail::mix64(master ^ 0x9E3779B97F4A7C15ull) ^
                       (lane * 0xD6E8FEB86659FD93ull + 0x2545F4914F6CDD1Dull));
}

// In-place Fisher–Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(v[i - 1], v[j]);
  }
}

// A random permutation of {0, ..., n-1}.
inline std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  shuffle(p, rng);
  return p;
}

}  // namespace prx
