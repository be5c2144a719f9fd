#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "ubpf/errors.hpp"
#include "ubpf/milstein.hpp"

using namespace ubpf;

TEST(MilsteinStep, GbmMatchesHandExpansion) {
  const GbmModel m = default_gbm();
  const double x = 1.3, z = 0.17, dt = 0.125;
  const auto out = milstein_step(m, std::array<double, 1>{x}, std::array<double, 1>{z}, dt);
  const double expected = x + 0.02 * x * dt + 0.2 * x * z + 0.5 * 0.04 * x * (z * z - dt);
  EXPECT_NEAR(out[0], expected, 1e-15);
}

TEST(MilsteinStep, ClarkCameronCrossTermAndModes) {
  const ClarkCameronModel m = default_clark_cameron();
  const std::array<double, 2> x{0.4, -0.3}, z{0.2, -0.5};
  const double dt = 0.25;
  const auto k = milstein_step(m, x, z, dt, CorrectionMode::kronecker);
  EXPECT_NEAR(k[0], 0.4 + 0.2, 1e-15);
  EXPECT_NEAR(k[1], -0.3 + 0.4 * -0.5 + 0.5 * (-0.5 * 0.2), 1e-15);
  const auto lit = milstein_step(m, x, z, dt, CorrectionMode::literal);
  EXPECT_NEAR(lit[1], -0.3 + 0.4 * -0.5 + 0.5 * (-0.5 * 0.2 - dt), 1e-15);
}

TEST(MilsteinStep, NonFiniteResultThrows) {
  const GbmModel m = gbm_model(0.02, 0.2, 1.0, 0.02);
  const std::array<double, 1> x{1e308}, z{10.0};
  EXPECT_THROW(milstein_step(m, x, z, 1.0), NumericalError);
}

TEST(Costs, CountStepsPerUnitInterval) {
  EXPECT_EQ(single_cost(Level{3}), 8u);
  EXPECT_EQ(pair_cost(Level{3}), 12u);
  EXPECT_EQ(antithetic_cost(Level{3}), 20u);
  const GbmModel m = default_gbm();
  Rng rng = make_rng(1);
  CostMeter meter;
  std::vector<double> f{1.0}, c{1.0}, a{1.0};
  propagate_antithetic(m, Level{4}, f, c, a, rng, meter);
  EXPECT_EQ(meter.steps(), antithetic_cost(Level{4}));
  propagate_single(m, Level{4}, f, rng, meter);
  EXPECT_EQ(meter.steps(), antithetic_cost(Level{4}) + 16u);
}

TEST(Rho, SwapsConsecutivePairs) {
  // 0-based step k uses the 1-based increment ρ_k.
  const std::vector<std::size_t> expected{2, 1, 4, 3, 6, 5};
  for (std::size_t k = 0; k < expected.size(); ++k) EXPECT_EQ(rho(k), expected[k]);
}

TEST(Grids, PairSumAndAntitheticPermutation) {
  Rng rng = make_rng(2);
  const NoiseGrid g = draw_noise(Level{3}, 2, rng);
  ASSERT_EQ(g.size(), 8u);
  const NoiseGrid coarse = pair_sum_grid(g);
  EXPECT_EQ(coarse.level.value, 2u);
  for (std::size_t m = 1; m <= 4; ++m)
    for (std::size_t c = 0; c < 2; ++c)
      EXPECT_DOUBLE_EQ(coarse.at(m)[c], g.at(2 * m - 1)[c] + g.at(2 * m)[c]);
  const NoiseGrid anti = antithetic_grid(g);
  for (std::size_t m = 1; m <= 4; ++m)
    for (std::size_t c = 0; c < 2; ++c) {
      EXPECT_EQ(anti.at(2 * m - 1)[c], g.at(2 * m)[c]);
      EXPECT_EQ(anti.at(2 * m)[c], g.at(2 * m - 1)[c]);
    }
}

TEST(RunAntithetic, MatchesComponentRecursions) {
  const NlmModel m = default_nlm();
  Rng rng = make_rng(3);
  const NoiseGrid g = draw_noise(Level{5}, 2, rng);
  std::vector<double> f{0.1, 0.2}, c = f, a = f;
  run_antithetic(m, f, c, a, g);
  std::vector<double> f1{0.1, 0.2}, c1 = f1, a1 = f1;
  run_single(m, f1, g);
  run_single(m, c1, pair_sum_grid(g));
  run_single(m, a1, antithetic_grid(g));
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(f[i], f1[i]);
    EXPECT_NEAR(c[i], c1[i], 1e-12);
    EXPECT_EQ(a[i], a1[i]);
  }
}

TEST(PropagateAntithetic, GridOutReproducesThePaths) {
  const ClarkCameronModel m = default_clark_cameron();
  Rng rng = make_rng(4);
  CostMeter meter;
  NoiseGrid g;
  std::vector<double> f{0.3, 0.1}, c = f, a = f;
  propagate_antithetic(m, Level{4}, f, c, a, rng, meter, {}, &g);
  std::vector<double> f1{0.3, 0.1}, c1 = f1, a1 = f1;
  run_antithetic(m, f1, c1, a1, g);
  EXPECT_EQ(f, f1);
  EXPECT_EQ(c, c1);
  EXPECT_EQ(a, a1);
}

TEST(PropagateAntithetic, TiedPairsMakeAntitheticEqualFine) {
  const ClarkCameronModel m = default_clark_cameron();
  Rng rng = make_rng(5);
  CostMeter meter;
  KernelOptions options;
  options.tie_pairs = true;
  std::vector<double> f{0.3, 0.1}, c = f, a = f;
  propagate_antithetic(m, Level{3}, f, c, a, rng, meter, options);
  EXPECT_EQ(f, a);
}

namespace {

// Mean squared difference of the coupled quantities over one unit interval.
std::array<double, 2> coupling_moments(const StateSpaceModel& m, unsigned level, int paths) {
  Rng rng = make_rng(100 + level);
  CostMeter meter;
  double anti = 0.0, plain = 0.0;
  for (int i = 0; i < paths; ++i) {
    std::vector<double> f(m.x0().begin(), m.x0().end()), c = f, a = f;
    propagate_antithetic(m, Level{level}, f, c, a, rng, meter);
    const double d_anti = 0.5 * (f[1] + a[1]) - c[1];
    const double d_plain = f[1] - c[1];
    anti += d_anti * d_anti;
    plain += d_plain * d_plain;
  }
  return {anti / paths, plain / paths};
}

}  // namespace

TEST(AntitheticCoupling, ClarkCameronAverageIsExactOverOneInterval) {
  // X_1 is additive and X_2 linear in the pair terms, so the antithetic
  // average reproduces the coarse path exactly (up to rounding).
  const ClarkCameronModel m = default_clark_cameron();
  const auto moments = coupling_moments(m, 5, 2000);
  EXPECT_LT(moments[0], 1e-25);
  EXPECT_GT(moments[1], 1e-3);
}

TEST(AntitheticCoupling, NonlinearModelRates) {
  // Without Lévy areas the fine-coarse difference decays like Δ, the
  // antithetic average like Δ².
  const NlmModel m = default_nlm();
  const auto lo = coupling_moments(m, 4, 20000);
  const auto hi = coupling_moments(m, 8, 20000);
  const double anti_rate = std::log2(lo[0] / hi[0]) / 4.0;
  const double plain_rate = std::log2(lo[1] / hi[1]) / 4.0;
  // The Lévy-area term is small near x_1 = 0, so the baseline is still
  // approaching its asymptotic rate at these levels.
  EXPECT_GT(plain_rate, 0.8);
  EXPECT_LT(plain_rate, 1.6);
  EXPECT_NEAR(anti_rate, 2.0, 0.3);
  EXPECT_GT(anti_rate, plain_rate + 0.5);
}
