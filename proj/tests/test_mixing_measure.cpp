#include "prx/mixing_measure.hpp"

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "prx/errors.hpp"
#include "prx/kernels.hpp"
#include "prx/normal.hpp"

namespace {

TEST(MixingMeasureOps, DominatingMeasureValidation) {
  prx::DominatingMeasure dom;
  dom.lo = 1.0;
  dom.hi = 1.0;
  EXPECT_THROW(dom.validate(), prx::DomainError);
  dom = {};
  dom.n_grid = 1;
  EXPECT_THROW(dom.validate(), prx::DomainError);
  dom = {};
  dom.atom = 2.0;  // outside [0, 1]
  EXPECT_THROW(dom.validate(), prx::DomainError);
  dom = {};
  dom.atom = 0.5;
  EXPECT_NO_THROW(dom.validate());
}

TEST(MixingMeasureOps, TrapezoidWeightsSumToLength) {
  prx::DominatingMeasure dom;
  dom.lo = -3.0;
  dom.hi = 5.0;
  dom.n_grid = 17;
  const auto w = dom.quad_weights();
  ASSERT_EQ(w.size(), 17u);
  double total = 0.0;
  for (double v : w) total += v;
  EXPECT_NEAR(total, 8.0, 1e-12);
  EXPECT_DOUBLE_EQ(w.front(), dom.dx() / 2.0);
  EXPECT_DOUBLE_EQ(w.back(), dom.dx() / 2.0);
  EXPECT_DOUBLE_EQ(dom.theta(0), -3.0);
  EXPECT_DOUBLE_EQ(dom.theta(16), 5.0);
}

TEST(MixingMeasureOps, UniformInitSplitsMassWithSpike) {
  prx::DominatingMeasure dom;
  dom.lo = -8.0;
  dom.hi = 8.0;
  dom.n_grid = 401;
  dom.atom = 0.0;
  const auto m = prx::uniform_init(dom, 0.75);
  EXPECT_DOUBLE_EQ(*m.atom_mass, 0.75);
  for (double d : m.density) EXPECT_DOUBLE_EQ(d, 0.015625);  // 0.25 / 16
  EXPECT_NEAR(prx::total_mass(m), 1.0, 1e-12);
}

TEST(MixingMeasureOps, UniformInitSpikeArgumentMustMatchDomain) {
  prx::DominatingMeasure dom;  // no atom
  EXPECT_THROW(prx::uniform_init(dom, 0.5), prx::UsageError);
  dom.atom = 0.5;
  EXPECT_THROW(prx::uniform_init(dom, std::nullopt), prx::UsageError);
  EXPECT_THROW(prx::uniform_init(dom, 1.5), prx::DomainError);
  EXPECT_THROW(prx::uniform_init(dom, -0.1), prx::DomainError);
}

TEST(MixingMeasureOps, TrapezoidMassExactForLinearDensity) {
  prx::DominatingMeasure dom;
  dom.lo = 0.0;
  dom.hi = 1.0;
  dom.n_grid = 1001;
  prx::MixingMeasure m;
  m.dom = dom;
  m.density.resize(1001);
  for (int g = 0; g < 1001; ++g)
    m.density[static_cast<std::size_t>(g)] = 2.0 * dom.theta(g);
  EXPECT_NEAR(prx::total_mass(m), 1.0, 1e-12);
}

TEST(MixingMeasureOps, RenormalizeReturnsOldMass) {
  auto m = prx::uniform_init(
      [] {
        prx::DominatingMeasure d;
        d.lo = 0.0;
        d.hi = 2.0;
        d.n_grid = 11;
        return d;
      }(),
      std::nullopt);
  for (double& d : m.density) d *= 3.0;
  EXPECT_NEAR(prx::renormalize(m), 3.0, 1e-12);
  EXPECT_NEAR(prx::total_mass(m), 1.0, 1e-12);
  for (double& d : m.density) d = 0.0;
  EXPECT_THROW(prx::renormalize(m), prx::DomainError);
}

TEST(MixingMeasureOps, MixDensityAgainstClosedForm) {
  // Uniform mixing density on [0, 1], unit Gaussian kernel, y = 0:
  // integral of phi(theta) over [0,1] = Phi(1) - Phi(0).
  prx::DominatingMeasure dom;
  dom.lo = 0.0;
  dom.hi = 1.0;
  dom.n_grid = 2001;
  const auto m = prx::uniform_init(dom, std::nullopt);
  prx::KernelSpec k;
  EXPECT_NEAR(prx::mix_density(m, k, 0.0),
              prx::norm_cdf(1.0) - prx::norm_cdf(0.0), 1e-7);
}

TEST(MixingMeasureOps, MixDensityPureSpike) {
  prx::DominatingMeasure dom;
  dom.lo = -1.0;
  dom.hi = 1.0;
  dom.n_grid = 5;
  dom.atom = 0.0;
  prx::MixingMeasure m;
  m.dom = dom;
  m.density.assign(5, 0.0);
  m.atom_mass = 1.0;
  prx::KernelSpec k;
  EXPECT_NEAR(prx::mix_density(m, k, 0.0), 0.3989422804014327, 1e-15);
  EXPECT_NEAR(prx::mix_density(m, k, 2.0), 0.05399096651318806, 1e-15);
}

TEST(MixingMeasureOps, MixDensityConstantKernelGivesConstant) {
  prx::DominatingMeasure dom;
  dom.lo = 0.0;
  dom.hi = 4.0;
  dom.n_grid = 33;
  dom.atom = 1.0;
  const auto m = prx::uniform_init(dom, 0.3);
  prx::KernelSpec k;
  k.family = prx::KernelFamily::custom;
  k.custom = [](double, double, double) { return 2.5; };
  EXPECT_NEAR(prx::mix_density(m, k, 1.7), 2.5, 1e-12);
}

TEST(MixingMeasureOps, MixDensityLinearInTheMeasure) {
  prx::DominatingMeasure dom;
  dom.lo = -2.0;
  dom.hi = 2.0;
  dom.n_grid = 101;
  prx::MixingMeasure f, g, blend;
  f.dom = g.dom = blend.dom = dom;
  f.density.resize(101);
  g.density.resize(101);
  blend.density.resize(101);
  for (int i = 0; i < 101; ++i) {
    const double t = dom.theta(i);
    f.density[i] = std::exp(-t * t);
    g.density[i] = 1.0 + 0.2 * t;
    blend.density[i] = 0.3 * f.density[i] + 0.7 * g.density[i];
  }
  prx::KernelSpec k;
  const double y = 0.4;
  EXPECT_NEAR(prx::mix_density(blend, k, y),
              0.3 * prx::mix_density(f, k, y) +
                  0.7 * prx::mix_density(g, k, y),
              1e-12);
}

TEST(MixingMeasureOps, QuadratureStableUnderRefinement) {
  prx::KernelSpec k;
  double prev = 0.0;
  for (int n : {501, 1001}) {
    prx::DominatingMeasure dom;
    dom.lo = -6.0;
    dom.hi = 6.0;
    dom.n_grid = n;
    prx::MixingMeasure m;
    m.dom = dom;
    m.density.resize(static_cast<std::size_t>(n));
    for (int g = 0; g < n; ++g)
      m.density[static_cast<std::size_t>(g)] =
          prx::normal_density(dom.theta(g), 0.0, 2.0);
    prx::renormalize(m);
    const double v = prx::mix_density(m, k, 0.7);
    if (prev != 0.0) {
      EXPECT_NEAR(v, prev, 1e-4);
    }
    prev = v;
  }
}

}  // namespace
