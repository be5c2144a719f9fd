#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "ubpf/errors.hpp"
#include "ubpf/estimators.hpp"
#include "ubpf/oracles.hpp"

using namespace ubpf;

namespace {

struct GbmFixture {
  GbmModel model = default_gbm();
  Dataset data = simulate_dataset(model, 5, Level{10}, 8);

  Problem problem(TestFunction phi = TestFunction::coordinate(0)) const {
    Problem p;
    p.model = &model;
    p.data = &data;
    p.time = 5;
    p.phi = phi;
    return p;
  }
};

}  // namespace

TEST(DiscretePmf, GeometricOnTruncatedSupport) {
  const auto pmf = DiscretePmf::make(DiscretePmf::Shape::geometric, 1.0, 2, 5);
  const double z = 0.25 + 0.125 + 0.0625 + 0.03125;
  EXPECT_NEAR(pmf(2), 0.25 / z, 1e-15);
  EXPECT_NEAR(pmf(5), 0.03125 / z, 1e-15);
  EXPECT_EQ(pmf(1), 0.0);
  EXPECT_EQ(pmf(6), 0.0);
  Rng rng = make_rng(1);
  std::vector<double> freq(4);
  for (int i = 0; i < 200000; ++i) freq[pmf.sample(rng) - 2] += 1;
  for (unsigned l = 2; l <= 5; ++l) EXPECT_NEAR(freq[l - 2] / 200000, pmf(l), 0.004);
}

TEST(DiscretePmf, LogCorrectedAndUnbounded) {
  const auto pmf = DiscretePmf::make(DiscretePmf::Shape::log_corrected, 1.0, 0, std::nullopt);
  EXPECT_FALSE(pmf.bounded());
  const auto& p = pmf.probabilities();
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-14);
  EXPECT_NEAR(pmf(1) / pmf(0), 0.5 * 2.0 * std::pow(std::log2(3.0), 2), 1e-12);
  EXPECT_THROW(DiscretePmf::make(DiscretePmf::Shape::geometric, 0.0, 0, std::nullopt),
               ConfigError);
  EXPECT_THROW(DiscretePmf::make(DiscretePmf::Shape::geometric, 1.0, 4, 3), ConfigError);
}

TEST(DefaultConfig, FollowsTheAccuracyTarget) {
  const auto c = default_config(0.05, Method::ub_amlpf);
  EXPECT_EQ(c.max_level(), 5u);
  EXPECT_EQ(c.max_p(), 5u);
  EXPECT_EQ(c.replicates, 400u);
  EXPECT_DOUBLE_EQ(c.tau, 1.0);
  EXPECT_TRUE(c.antithetic);
  EXPECT_EQ(c.n0, static_cast<std::size_t>(std::ceil(25.0 * 1024.0 / 64.0)));
  EXPECT_NEAR(c.level_pmf(1) / c.level_pmf(0), 0.5, 1e-15);
  const auto m = default_config(0.3, Method::ub_mlpf);
  EXPECT_EQ(m.max_level(), 2u);
  EXPECT_DOUBLE_EQ(m.tau, 0.5);
  EXPECT_FALSE(m.antithetic);
  EXPECT_EQ(m.n0, 50u);
  EXPECT_NEAR(m.level_pmf(1) / m.level_pmf(0), std::sqrt(0.5), 1e-15);
  EXPECT_THROW(default_config(1.5, Method::ub_amlpf), ConfigError);
  EXPECT_THROW(default_config(0.1, Method::amlpf), ConfigError);
}

TEST(Nesting, WeightsSumToOne) {
  const auto w = nesting_weights(50, 3);
  ASSERT_EQ(w.size(), 4u);
  EXPECT_DOUBLE_EQ(w[0], 50.0 / 400.0);
  EXPECT_DOUBLE_EQ(w[3], 200.0 / 400.0);
  EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-15);
}

TEST(Nesting, PfEstimatePoolsConstituentRuns) {
  GbmFixture f;
  const auto e0 = nested_pf_estimate(f.problem(), Level{3}, 0, 40, 17);
  EXPECT_EQ(e0.at_prev, 0.0);
  EXPECT_EQ(e0.runs_at_p.size(), 1u);
  EXPECT_EQ(e0.cost, 5u * 40u * 8u);
  const auto e2 = nested_pf_estimate(f.problem(), Level{3}, 2, 40, 17);
  EXPECT_EQ(e2.runs_at_prev.size(), 2u);
  EXPECT_EQ(e2.runs_at_p.size(), 3u);
  EXPECT_EQ(e2.cost, 5u * 160u * 8u);
  // The first run is shared, so p = 0 at_p equals the first run of any p.
  const auto e1 = nested_pf_estimate(f.problem(), Level{3}, 1, 40, 17);
  EXPECT_EQ(e1.at_prev, e0.at_p);
  EXPECT_EQ(e2.at_prev, e1.at_p);
}

TEST(Nesting, ConstantFunctionIsExact) {
  GbmFixture f;
  const auto p = f.problem(TestFunction::constant(1.0));
  const auto e = nested_pf_estimate(p, Level{2}, 3, 20, 1);
  EXPECT_EQ(e.at_p, 1.0);
  EXPECT_EQ(e.at_prev, 1.0);
  const auto c = nested_cpf_estimate(p, Level{3}, 3, 20, 1, true);
  EXPECT_EQ(c.at_p, 0.0);
  EXPECT_EQ(c.at_prev, 0.0);
}

TEST(XiTerm, ScalesByTheSampleSizePmf) {
  GbmFixture f;
  auto config = default_config(0.2, Method::ub_amlpf);
  config.n0 = 20;
  const auto rec = xi_term(f.problem(), config, 2, 1, 33);
  const auto nested = nested_cpf_estimate(f.problem(), Level{2}, 1, 20, 33, true);
  EXPECT_DOUBLE_EQ(rec.xi, (nested.at_p - nested.at_prev) / config.p_pmf(1));
  EXPECT_EQ(rec.cost, nested.cost);
  EXPECT_THROW(xi_term(f.problem(), config, 9, 0, 1), ConfigError);
}

TEST(UnbiasedEstimate, IndependentOfParallelWidth) {
  GbmFixture f;
  auto config = default_config(0.2, Method::ub_amlpf);
  config.n0 = 20;
  config.replicates = 24;
  config.seed = 5;
  const auto a = unbiased_estimate(f.problem(), config, 1);
  const auto b = unbiased_estimate(f.problem(), config, 4);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].xi, b.records[i].xi);
    EXPECT_EQ(a.records[i].level, b.records[i].level);
    EXPECT_EQ(a.records[i].seed_tag, b.records[i].seed_tag);
  }
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_EQ(UnbiasedResult::reconstruct(a.records, config), a.estimate);
  EXPECT_EQ(a.total_cost, b.total_cost);
}

TEST(UnbiasedEstimate, ConstantFunctionGivesOne) {
  GbmFixture f;
  auto config = default_config(0.2, Method::ub_mlpf);
  config.n0 = 10;
  config.replicates = 200;
  const auto r = unbiased_estimate(f.problem(TestFunction::constant(1.0)), config);
  for (const auto& rec : r.records)
    if (rec.level > config.base_level || rec.p > 0) EXPECT_EQ(rec.xi, 0.0);
  // Only (L, P) = (L̲, 0) contributes, with value 1/ℙ_P(0); the average is
  // close to 1 up to Monte Carlo error in the draw frequencies.
  EXPECT_NEAR(r.estimate, 1.0, 5 * r.std_error + 1e-12);
}

TEST(UnbiasedEstimate, GbmAgreesWithKalman) {
  GbmFixture f;
  auto config = default_config(0.1, Method::ub_amlpf);
  config.n0 = 30;
  config.replicates = 1500;
  config.seed = 77;
  const auto r = unbiased_estimate(f.problem(), config);
  const double truth = gbm_exact_filter(f.model, f.data).filter_mean(5);
  EXPECT_NEAR(r.estimate, truth, 4 * r.std_error + 2e-3);
}

TEST(Amlpf, AllocationFormula) {
  const auto n = amlpf_allocation(0, 4, 0.1, 2.0, 10);
  ASSERT_EQ(n.size(), 5u);
  EXPECT_EQ(n[0], 1000u);
  EXPECT_EQ(n[1], 500u);
  EXPECT_EQ(n[4], 63u);
  EXPECT_EQ(amlpf_allocation(0, 9, 0.5, 1.0, 10).back(), 10u);
}

TEST(Amlpf, TelescopesToKalman) {
  GbmFixture f;
  std::vector<double> est;
  const std::vector<std::size_t> samples{800, 400, 200, 100, 60};
  for (int r = 0; r < 20; ++r)
    est.push_back(amlpf_estimate(f.problem(), 0, 4, samples, split_seed(3, r)).estimate);
  const double mean = std::accumulate(est.begin(), est.end(), 0.0) / 20;
  double ss = 0;
  for (double v : est) ss += (v - mean) * (v - mean);
  const double se = std::sqrt(ss / 19 / 20);
  const double truth = gbm_exact_filter(f.model, f.data).filter_mean(5);
  EXPECT_NEAR(mean, truth, 4 * se + 5e-3);
}

TEST(VarianceProbe, DoublingSamplesHalvesTheSecondMoment) {
  const ClarkCameronModel m = default_clark_cameron();
  const Dataset data = simulate_dataset(m, 5, Level{8}, 4);
  Problem p;
  p.model = &m;
  p.data = &data;
  p.time = 5;
  const auto r0 = variance_probe(p, 0, 3, 0, 40, 400, true, 0.0, 1);
  const auto r1 = variance_probe(p, 0, 3, 1, 40, 400, true, 0.0, 2);
  const double ratio = r1.second_moment / r0.second_moment;
  EXPECT_GT(ratio, 0.3);
  EXPECT_LT(ratio, 0.8);
  EXPECT_THROW(variance_probe(p, 0, 3, 0, 40, 10, true, 0.0, 1), ConfigError);
}

TEST(FitSlope, ExactLine) {
  const std::vector<double> x{1, 2, 3, 4}, y{1, -1, -3, -5};
  const auto s = fit_slope(x, y);
  EXPECT_NEAR(s.slope, -2.0, 1e-14);
  EXPECT_NEAR(s.intercept, 3.0, 1e-14);
  EXPECT_NEAR(s.std_error, 0.0, 1e-12);
  EXPECT_THROW(fit_slope(std::vector<double>{1}, std::vector<double>{1}), ConfigError);
}

TEST(Methods, NamesRoundTrip) {
  for (Method m : {Method::pf, Method::amlpf, Method::ub_mlpf, Method::ub_amlpf})
    EXPECT_EQ(parse_method(to_string(m)), m);
  EXPECT_THROW(parse_method("mlmc"), ConfigError);
}
