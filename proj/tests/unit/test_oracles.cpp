#include <cmath>
#include <filesystem>
#include <numbers>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "ubpf/errors.hpp"
#include "ubpf/oracles.hpp"

using namespace ubpf;

namespace {

// Grid-based Bayes filter on u = log x, independent of the Kalman recursion.
double grid_filter_mean(const GbmModel& m, const std::vector<double>& ys) {
  const std::size_t g = 2001;
  const double lo = -2.0, hi = 2.0, du = (hi - lo) / (g - 1);
  const double drift = m.mu() - 0.5 * m.sigma() * m.sigma();
  const double s2 = m.sigma() * m.sigma();
  std::vector<double> u(g), p(g, 0.0);
  for (std::size_t i = 0; i < g; ++i) u[i] = lo + du * static_cast<double>(i);
  // First step from the point mass at log x0.
  for (std::size_t i = 0; i < g; ++i) {
    const double d = u[i] - std::log(m.initial()) - drift;
    p[i] = std::exp(-d * d / (2 * s2));
  }
  for (std::size_t k = 0; k < ys.size(); ++k) {
    if (k > 0) {
      std::vector<double> q(g, 0.0);
      for (std::size_t i = 0; i < g; ++i)
        for (std::size_t j = 0; j < g; ++j) {
          const double d = u[i] - u[j] - drift;
          q[i] += p[j] * std::exp(-d * d / (2 * s2));
        }
      p = q;
    }
    double z = 0;
    for (std::size_t i = 0; i < g; ++i) {
      const double e = ys[k] - u[i];
      p[i] *= std::exp(-e * e / (2 * m.tau2()));
      z += p[i];
    }
    for (double& v : p) v /= z;
  }
  double mean = 0;
  for (std::size_t i = 0; i < g; ++i) mean += p[i] * std::exp(u[i]);
  return mean;
}

}  // namespace

TEST(GbmKalman, AgreesWithGridFilter) {
  const GbmModel m = default_gbm();
  const std::vector<double> ys{0.05, -0.1, 0.2, 0.12};
  const auto moments = gbm_exact_filter(m, ys);
  EXPECT_NEAR(moments.filter_mean(4), grid_filter_mean(m, ys), 1e-6);
  EXPECT_NEAR(moments.filter_mean(1), grid_filter_mean(m, {0.05}), 1e-6);
}

TEST(GbmKalman, FirstStepByHand) {
  const GbmModel m = default_gbm();
  const auto s = gbm_kalman_step(m, KalmanState{0.0, 0.0, 0.0, 0.0}, 0.3);
  const double pm = 0.02 - 0.02, pv = 0.04;
  const double k = pv / (pv + 0.02);
  EXPECT_NEAR(s.pred_mean, pm, 1e-15);
  EXPECT_NEAR(s.mean, pm + k * (0.3 - pm), 1e-15);
  EXPECT_NEAR(s.variance, (1 - k) * pv, 1e-15);
}

TEST(GbmMoments, MatchExactSolutionMonteCarlo) {
  const GbmModel m = gbm_model(0.1, 0.3, 2.0, 0.02);
  const auto [mean, var] = gbm_moments(m, 1.5);
  Rng rng = make_rng(4);
  std::normal_distribution<double> n01;
  const int n = 400000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = 2.0 * std::exp((0.1 - 0.045) * 1.5 + 0.3 * std::sqrt(1.5) * n01(rng));
    s += x;
    s2 += x * x;
  }
  const double mc_mean = s / n, mc_var = s2 / n - mc_mean * mc_mean;
  EXPECT_NEAR(mean, mc_mean, 5 * std::sqrt(var / n));
  EXPECT_NEAR(var, mc_var, 0.02 * var);
}

TEST(Enumeration, MarginalsEqualInputs) {
  const std::vector<double> w1{0.5, 0.5}, w2{0.8, 0.2}, w3{0.5, 0.5};
  const auto joint = enumerate_coupled_resampling(w1, w2, w3);
  double total = 0;
  for (const auto& [k, p] : joint) total += p;
  EXPECT_NEAR(total, 1.0, 1e-15);
  const auto m1 = joint_marginal(joint, 0, 2), m2 = joint_marginal(joint, 1, 2);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(m1[i], w1[i], 1e-12);
    EXPECT_NEAR(m2[i], w2[i], 1e-12);
  }
  // Common draw mass: min(0.5, 0.8, 0.5) + min(0.5, 0.2, 0.5).
  const double common = joint.at({0, 0, 0}) + joint.at({1, 1, 1});
  EXPECT_GE(common, 0.7 - 1e-15);
  EXPECT_THROW(enumerate_coupled_resampling(std::vector<double>(5, 0.2),
                                            std::vector<double>(5, 0.2),
                                            std::vector<double>(5, 0.2)),
               ConfigError);
}

TEST(ReferencePf, ConvergesToKalman) {
  const GbmModel m = default_gbm();
  const Dataset data = simulate_dataset(m, 3, Level{8}, 5);
  ReferenceSettings s;
  s.level = 6;
  s.particles = 4000;
  s.repetitions = 8;
  const auto ref = reference_pf(m, data, 3, TestFunction::coordinate(0), s);
  EXPECT_EQ(ref.repetitions.size(), 8u);
  EXPECT_NEAR(ref.mean, gbm_exact_filter(m, data).filter_mean(3), 4 * ref.std_error + 3e-3);
}

TEST(OracleCache, RoundTripAndKeySensitivity) {
  const auto dir = std::filesystem::temp_directory_path() / "ubpf-tests" / "oracle-cache";
  std::filesystem::remove_all(dir);
  const ClarkCameronModel m = default_clark_cameron();
  const Dataset data = simulate_dataset(m, 3, Level{6}, 1);
  ReferenceSettings s;
  const auto key = OracleCache::key(m, data, 3, TestFunction::coordinate(0), s);
  OracleCache cache(dir);
  EXPECT_FALSE(cache.load(key).has_value());
  cache.store(key, ReferenceEstimate{0.25, 0.01, {0.2, 0.3}});
  const auto hit = cache.load(key);
  ASSERT_TRUE(hit.has_value());
  EXPECT_EQ(hit->mean, 0.25);
  EXPECT_EQ(hit->repetitions.size(), 2u);
  s.particles += 1;
  EXPECT_NE(OracleCache::key(m, data, 3, TestFunction::coordinate(0), s), key);
  EXPECT_NE(OracleCache::key(m, data, 2, TestFunction::coordinate(0), ReferenceSettings{}), key);
}
