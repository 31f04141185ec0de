#include "prx/fdr.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include <gtest/gtest.h>

#include "prx/errors.hpp"
#include "prx/normal.hpp"
#include "prx/rng.hpp"
#include "prx/sim.hpp"

namespace {

constexpr double kPhi0 = 0.3989422804014327;   // standard normal pdf at 0
constexpr double kPhiAt1 = 0.8413447460685429;  // standard normal cdf at 1

prx::TwoGroupsFit hand_built_fit(double atom_mass, double slab_density) {
  prx::DominatingMeasure dom;
  dom.lo = -1.0;
  dom.hi = 1.0;
  dom.n_grid = 2001;
  dom.atom = 0.0;
  prx::MixingMeasure m;
  m.dom = dom;
  m.density.assign(2001, slab_density);
  m.atom_mass = atom_mass;

  prx::TwoGroupsFit f;
  f.fit.eval_points = {{0.5}};
  f.fit.measures = {m};
  f.fit.weight_sums = {3.0};
  f.kernel.family = prx::KernelFamily::null_point_gaussian;
  return f;
}

TEST(LocalFdr, HandMeasureOracle) {
  // Spike mass 1/2 at the null plus mass 1/2 spread on [-1,1]:
  // lfdr(0) = (phi(0)/2) / (phi(0)/2 + (Phi(1) - Phi(-1))/4).
  const auto f = hand_built_fit(0.5, 0.25);
  const double slab_part = 0.25 * (2.0 * kPhiAt1 - 1.0);
  const double want = 0.5 * kPhi0 / (0.5 * kPhi0 + slab_part);
  long overshoots = 0;
  EXPECT_NEAR(prx::local_fdr(f, 0.0, 0, &overshoots), want, 1e-6);
  EXPECT_EQ(overshoots, 0);
  EXPECT_THROW(prx::local_fdr(f, 0.0, 1), prx::UsageError);
}

TEST(LocalFdr, DegenerateProportions) {
  // All mass on the spike: every z is certainly null.
  const auto all_null = hand_built_fit(1.0, 0.0);
  EXPECT_DOUBLE_EQ(prx::local_fdr(all_null, 0.3, 0), 1.0);
  // No spike mass: nothing is null.
  const auto no_null = hand_built_fit(0.0, 0.5);
  EXPECT_DOUBLE_EQ(prx::local_fdr(no_null, 0.3, 0), 0.0);
}

TEST(LocalFdr, FarTailUnderflowNeverRejects) {
  const auto f = hand_built_fit(0.5, 0.25);
  // phi(50 - u) underflows for every u in [-1, 1]: report lfdr 1.
  EXPECT_DOUBLE_EQ(prx::local_fdr(f, 50.0, 0), 1.0);
}

// Literal restatement of the step-up rule for cross-checking.
std::vector<bool> stepup_reference(const std::vector<double>& lfdrs,
                                   double alpha) {
  std::vector<double> sorted = lfdrs;
  std::sort(sorted.begin(), sorted.end());
  std::size_t k_star = 0;
  for (std::size_t k = sorted.size(); k >= 1; --k) {
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += sorted[i];
    if (s / static_cast<double>(k) < alpha) {
      k_star = k;
      break;
    }
  }
  std::vector<bool> out(lfdrs.size(), false);
  if (k_star == 0) return out;
  for (std::size_t i = 0; i < lfdrs.size(); ++i)
    out[i] = lfdrs[i] <= sorted[k_star - 1];
  return out;
}

TEST(StepUp, HandExample) {
  const auto rej = prx::stepup_reject({0.01, 0.02, 0.2, 0.9}, 0.1);
  // Prefix means 0.01, 0.015, 0.0767, 0.2825: k* = 3.
  EXPECT_TRUE(rej[0]);
  EXPECT_TRUE(rej[1]);
  EXPECT_TRUE(rej[2]);
  EXPECT_FALSE(rej[3]);
}

TEST(StepUp, StrictInequalityAndTies) {
  // Prefix mean exactly alpha does not count.
  const auto none = prx::stepup_reject({0.1, 0.1}, 0.1);
  EXPECT_FALSE(none[0]);
  EXPECT_FALSE(none[1]);
  // Values tied with the threshold are all rejected.
  const auto tied = prx::stepup_reject({0.05, 0.2, 0.2, 0.2, 0.9}, 0.25);
  EXPECT_TRUE(tied[0]);
  EXPECT_TRUE(tied[1]);
  EXPECT_TRUE(tied[2]);
  EXPECT_TRUE(tied[3]);
  EXPECT_FALSE(tied[4]);

  EXPECT_TRUE(prx::stepup_reject({}, 0.1).empty());
  EXPECT_THROW(prx::stepup_reject({0.5}, 0.0), prx::DomainError);
  EXPECT_THROW(prx::stepup_reject({0.5}, 1.0), prx::DomainError);
}

TEST(StepUp, MatchesReferenceOnRandomInputs) {
  prx::Rng rng(61);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> lfdrs(1 + rng.below(12));
    for (double& v : lfdrs) v = rng.uniform();
    for (double alpha : {0.05, 0.1, 0.3}) {
      const auto got = prx::stepup_reject(lfdrs, alpha);
      const auto want = stepup_reference(lfdrs, alpha);
      EXPECT_EQ(got, want) << "rep " << rep << " alpha " << alpha;
      // Down-set property: rejecting i implies rejecting anything smaller.
      for (std::size_t i = 0; i < lfdrs.size(); ++i)
        for (std::size_t j = 0; j < lfdrs.size(); ++j)
          if (got[i] && lfdrs[j] <= lfdrs[i]) {
            EXPECT_TRUE(got[j]);
          }
    }
  }
}

TEST(PValues, TwoSidedFromZ) {
  EXPECT_NEAR(prx::two_sided_p(1.959963984540054), 0.05, 1e-12);
  EXPECT_NEAR(prx::two_sided_p(0.0), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(prx::two_sided_p(-2.3), prx::two_sided_p(2.3));
  EXPECT_LT(prx::two_sided_p(6.0), 1e-8);
}

std::vector<bool> bh_reference(const std::vector<double>& pv, double alpha) {
  const std::size_t n = pv.size();
  std::vector<double> sorted = pv;
  std::sort(sorted.begin(), sorted.end());
  double threshold = -1.0;
  for (std::size_t k = n; k >= 1; --k)
    if (sorted[k - 1] <=
        alpha * static_cast<double>(k) / static_cast<double>(n)) {
      threshold = sorted[k - 1];
      break;
    }
  std::vector<bool> out(n, false);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = threshold >= 0.0 && pv[i] <= threshold;
  return out;
}

TEST(BenjaminiHochberg, HandExampleAndValidation) {
  const auto rej = prx::bh_reject({0.001, 0.02, 0.03, 0.5}, 0.1);
  // Cutoffs alpha k / n = 0.025, 0.05, 0.075, 0.1: largest k with
  // p_(k) <= cutoff is 3.
  EXPECT_TRUE(rej[0]);
  EXPECT_TRUE(rej[1]);
  EXPECT_TRUE(rej[2]);
  EXPECT_FALSE(rej[3]);

  const auto none = prx::bh_reject({0.9, 0.95}, 0.1);
  EXPECT_FALSE(none[0]);
  EXPECT_FALSE(none[1]);
  EXPECT_TRUE(prx::bh_reject({}, 0.1).empty());
  EXPECT_THROW(prx::bh_reject({1.5}, 0.1), prx::DomainError);
  EXPECT_THROW(prx::bh_reject({-0.1}, 0.1), prx::DomainError);
  EXPECT_THROW(prx::bh_reject({0.5}, 0.0), prx::DomainError);
}

TEST(BenjaminiHochberg, MatchesReferenceOnRandomInputs) {
  prx::Rng rng(62);
  for (int rep = 0; rep < 60; ++rep) {
    std::vector<double> pv(1 + rng.below(10));
    for (double& v : pv) v = rng.uniform();
    for (double alpha : {0.05, 0.1, 0.25})
      EXPECT_EQ(prx::bh_reject(pv, alpha), bh_reference(pv, alpha))
          << "rep " << rep << " alpha " << alpha;
  }
}

prx::DominatingMeasure slab_domain() {
  prx::DominatingMeasure dom;
  dom.lo = -8.0;
  dom.hi = 8.0;
  dom.n_grid = 401;
  dom.atom = 0.0;
  return dom;
}

TEST(TwoGroups, SingleObservationUpdatesSpikeByHand) {
  // One z = 0 at the evaluation point itself: beta = 1, v = 2^(-2/3).
  // m0 = 0.75 phi(0) + (0.25/16) * 1; the spike then moves to
  // (1 - v) 0.75 + v * 0.75 phi(0) / m0.
  prx::Observations z_x;
  z_x.x = {{0.5}};
  z_x.y = {0.0};
  prx::LocalizationConfig cfg;
  cfg.bandwidths = {2.0};
  const auto init = prx::uniform_init(slab_domain(), 0.75);
  const auto fit =
      prx::fit_two_groups(z_x, {}, cfg, init, {{0.5}}, 1, 0);

  const double v = std::pow(2.0, -2.0 / 3.0);
  const double m0 = 0.75 * kPhi0 + 0.25 / 16.0;
  const double want = (1.0 - v) * 0.75 + v * 0.75 * kPhi0 / m0;
  EXPECT_NEAR(prx::pi0_at(fit, 0), want, 1e-9);
  EXPECT_NEAR(want, 0.87622, 1e-4);  // sanity on the hand arithmetic

  prx::MixingMeasure no_atom = prx::uniform_init(
      [] {
        auto d = slab_domain();
        d.atom.reset();
        return d;
      }(),
      std::nullopt);
  EXPECT_THROW(prx::fit_two_groups(z_x, {}, cfg, no_atom, {{0.5}}, 1, 0),
               prx::UsageError);
  EXPECT_THROW(
      prx::fit_two_groups(z_x, {0.0, -1.0}, cfg, init, {{0.5}}, 1, 0),
      prx::DomainError);
}

TEST(TwoGroups, FarEvaluationPointKeepsThePrior) {
  prx::Observations z_x;
  for (int i = 0; i < 30; ++i) {
    z_x.x.push_back({0.0});
    z_x.y.push_back(0.1 * i - 1.5);
  }
  prx::LocalizationConfig cfg;
  cfg.bandwidths = {5.0};
  const auto init = prx::uniform_init(slab_domain(), 0.75);
  const auto fit =
      prx::fit_two_groups(z_x, {}, cfg, init, {{1000.0}}, 1, 0);
  EXPECT_NEAR(prx::pi0_at(fit, 0), 0.75, 1e-12);
  EXPECT_TRUE(prx::low_effective_weight(fit.fit, 0));
}

TEST(TwoGroups, PureNullDataPushesSpikeMassUp) {
  const auto init = prx::uniform_init(slab_domain(), 0.75);
  prx::LocalizationConfig cfg;
  cfg.bandwidths = {2.0};
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    prx::Rng rng(seed);
    prx::Observations z_x;
    for (int i = 0; i < 800; ++i) {
      z_x.x.push_back({rng.uniform()});
      z_x.y.push_back(rng.normal());
    }
    prx::Matrix grid;
    for (int g = 0; g < 5; ++g) grid.push_back({0.1 + 0.2 * g});
    const auto fit = prx::fit_two_groups(z_x, {}, cfg, init, grid, 3, seed);
    double mean_pi0 = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g)
      mean_pi0 += prx::pi0_at(fit, g) / static_cast<double>(grid.size());
    EXPECT_GE(mean_pi0, 0.8) << "seed " << seed;
  }
}

TEST(FdrAnalysis, ReplicateOutputIsInternallyConsistent) {
  const auto sim = prx::generate({prx::ScenarioKind::two_groups_fdr, 120, 42});
  prx::FdrSimConfig knobs;
  knobs.n_perm = 2;
  knobs.prmlx_subsample = 80;
  knobs.prmlx_max_evals = 25;
  knobs.n_grid = 201;
  const auto rep = prx::fdr_analyze(sim.obs, 0.1, 42, knobs);

  ASSERT_EQ(rep.lfdr.size(), 120u);
  for (double v : rep.lfdr) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_EQ(rep.reject_prx, prx::stepup_reject(rep.lfdr, 0.1));

  std::vector<double> pv;
  for (double z : sim.obs.y) pv.push_back(prx::two_sided_p(z));
  EXPECT_EQ(rep.reject_bh, prx::bh_reject(pv, 0.1));

  EXPECT_GT(rep.bandwidth, 0.0);
  ASSERT_EQ(rep.pi0_curve.size(), 21u);
  for (double p : rep.pi0_curve) {
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
  // The declared null passes through untouched when estimation is off.
  EXPECT_DOUBLE_EQ(rep.null_used.theta, 0.0);
  EXPECT_DOUBLE_EQ(rep.null_used.sigma, 1.0);

  // Determinism of the full analysis.
  const auto rep2 = prx::fdr_analyze(sim.obs, 0.1, 42, knobs);
  EXPECT_EQ(rep.lfdr, rep2.lfdr);
  EXPECT_EQ(rep.reject_prx, rep2.reject_prx);
}

TEST(FdrAnalysis, EmpiricalNullEstimationStaysInItsBox) {
  const auto sim = prx::generate({prx::ScenarioKind::two_groups_fdr, 100, 7});
  prx::FdrSimConfig knobs;
  knobs.n_perm = 1;
  knobs.prmlx_subsample = 60;
  knobs.prmlx_max_evals = 30;
  knobs.n_grid = 201;
  knobs.estimate_null = true;
  const auto rep = prx::fdr_analyze(sim.obs, 0.1, 7, knobs);
  EXPECT_GE(rep.null_used.theta, -10.0);
  EXPECT_LE(rep.null_used.theta, 10.0);
  EXPECT_GT(rep.null_used.sigma, 0.0);
  EXPECT_LE(rep.null_used.sigma, 100.0);
}

TEST(FdrSimulation, ZeroAlphaShortCircuits) {
  const auto res = prx::fdr_simulation(2, 50, 0.0, 9);
  EXPECT_DOUBLE_EQ(res.fdr_prx, 0.0);
  EXPECT_DOUBLE_EQ(res.power_prx, 0.0);
  EXPECT_DOUBLE_EQ(res.fdr_bh, 0.0);
  EXPECT_DOUBLE_EQ(res.power_bh, 0.0);
  ASSERT_EQ(res.fdp_prx.size(), 2u);
  ASSERT_EQ(res.bandwidths.size(), 2u);
  EXPECT_THROW(prx::fdr_simulation(0, 50, 0.1, 9), prx::UsageError);
  EXPECT_THROW(prx::fdr_simulation(1, 50, 1.0, 9), prx::DomainError);
}

}  // namespace
