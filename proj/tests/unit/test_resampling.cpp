#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "ubpf/errors.hpp"
#include "ubpf/oracles.hpp"
#include "ubpf/resampling.hpp"

using namespace ubpf;

TEST(NormalizeLogWeights, ShiftsByMaximum) {
  const std::vector<double> lw{-1000.0, -1001.0, -1002.0};
  const auto w = normalize_log_weights(lw);
  const double z = 1 + std::exp(-1.0) + std::exp(-2.0);
  EXPECT_NEAR(w[0], 1 / z, 1e-15);
  EXPECT_NEAR(w[2], std::exp(-2.0) / z, 1e-15);
}

TEST(NormalizeLogWeights, CollapseIsReported) {
  const double ninf = -std::numeric_limits<double>::infinity();
  try {
    normalize_log_weights(std::vector<double>{ninf, ninf}, 7, "coarse");
    FAIL();
  } catch (const WeightCollapse& e) {
    EXPECT_EQ(e.time(), 7u);
    EXPECT_EQ(e.ensemble(), "coarse");
  }
  EXPECT_THROW(normalize_log_weights(std::vector<double>{0.0, std::nan("")}), WeightCollapse);
}

TEST(ValidateWeights, RejectsBadInput) {
  EXPECT_NO_THROW(validate_weights(std::vector<double>{0.25, 0.75}));
  EXPECT_THROW(validate_weights(std::vector<double>{0.5, 0.6}), ConfigError);
  EXPECT_THROW(validate_weights(std::vector<double>{-0.1, 1.1}), ConfigError);
}

TEST(Ess, Extremes) {
  EXPECT_DOUBLE_EQ(ess(std::vector<double>{0.25, 0.25, 0.25, 0.25}), 4.0);
  EXPECT_DOUBLE_EQ(ess(std::vector<double>{1.0, 0.0, 0.0}), 1.0);
}

namespace {

double chi_square_p(const std::map<std::array<std::size_t, 3>, double>& expected,
                    const std::map<std::array<std::size_t, 3>, std::size_t>& counts,
                    std::size_t total) {
  double stat = 0.0;
  for (const auto& [key, p] : expected) {
    const double e = p * static_cast<double>(total);
    const auto it = counts.find(key);
    const double o = it == counts.end() ? 0.0 : static_cast<double>(it->second);
    stat += (o - e) * (o - e) / e;
  }
  for (const auto& [key, c] : counts)
    if (!expected.count(key)) return 0.0;  // impossible cell observed
  const boost::math::chi_squared dist(static_cast<double>(expected.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace

TEST(CoupledResample3, MatchesEnumerationOnThreeParticles) {
  const std::vector<double> w1{0.2, 0.5, 0.3}, w2{0.4, 0.4, 0.2}, w3{0.1, 0.6, 0.3};
  const auto joint = enumerate_coupled_resampling(w1, w2, w3);
  Rng rng = make_rng(11);
  std::map<std::array<std::size_t, 3>, std::size_t> counts;
  std::size_t total = 0;
  for (int rep = 0; rep < 20000; ++rep) {
    const auto idx = coupled_resample3(w1, w2, w3, rng);
    for (std::size_t i = 0; i < 3; ++i) {
      ++counts[{idx.a1[i], idx.a2[i], idx.a3[i]}];
      ++total;
    }
  }
  EXPECT_GT(chi_square_p(joint, counts, total), 1e-3);
}

TEST(CoupledResample3, OverlapAndIdenticalWeights) {
  const std::vector<double> w{0.1, 0.2, 0.3, 0.4};
  Rng rng = make_rng(12);
  const auto idx = coupled_resample3(w, w, w, rng);
  EXPECT_NEAR(idx.overlap, 1.0, 1e-15);
  EXPECT_EQ(idx.common_count, 4u);
  EXPECT_EQ(idx.a1, idx.a2);
  EXPECT_EQ(idx.a1, idx.a3);
}

TEST(CoupledResample3, DisjointSupportsNeverShareAncestors) {
  const std::vector<double> w1{1.0, 0.0}, w2{0.0, 1.0}, w3{0.5, 0.5};
  Rng rng = make_rng(13);
  const auto idx = coupled_resample3(w1, w2, w3, rng);
  EXPECT_EQ(idx.common_count, 0u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(idx.a1[i], 0u);
    EXPECT_EQ(idx.a2[i], 1u);
  }
}

TEST(CoupledResample2, MarginalsAndCommonDraws) {
  const std::vector<double> w1{0.7, 0.2, 0.1}, w2{0.3, 0.3, 0.4};
  Rng rng = make_rng(14);
  std::array<double, 3> f1{}, f2{};
  double common = 0;
  const int reps = 40000;
  for (int r = 0; r < reps; ++r) {
    const auto idx = coupled_resample2(w1, w2, rng);
    for (std::size_t i = 0; i < 3; ++i) {
      f1[idx.a1[i]] += 1;
      f2[idx.a2[i]] += 1;
    }
    common += static_cast<double>(idx.common_count);
  }
  const double n = 3.0 * reps;
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_NEAR(f1[j] / n, w1[j], 5 * std::sqrt(0.25 / n));
    EXPECT_NEAR(f2[j] / n, w2[j], 5 * std::sqrt(0.25 / n));
  }
  EXPECT_NEAR(common / n, 0.3 + 0.2 + 0.1, 5 * std::sqrt(0.25 / n));
}

TEST(MultinomialResample, Frequencies) {
  const std::vector<double> w{0.1, 0.6, 0.3};
  Rng rng = make_rng(15);
  const auto idx = multinomial_resample(w, 300000, rng);
  std::array<double, 3> f{};
  for (auto i : idx) f[i] += 1;
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(f[j] / 300000, w[j], 0.005);
}
