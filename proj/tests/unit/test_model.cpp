#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "ubpf/errors.hpp"
#include "ubpf/model.hpp"

using namespace ubpf;

namespace {

std::vector<double> tensor(const StateSpaceModel& m, std::vector<double> x) {
  const std::size_t d = m.dim();
  std::vector<double> h(d * d * d);
  m.corr_tensor(x, h);
  return h;
}

std::vector<double> fd_tensor(const StateSpaceModel& m, std::vector<double> x) {
  const std::size_t d = m.dim();
  std::vector<double> h(d * d * d);
  finite_difference_corr_tensor(
      d, [&](std::span<const double> p, std::span<double> out) { m.diffusion(p, out); }, x, h);
  return h;
}

double normal_log_pdf(double y, double mean, double var) {
  return -0.5 * std::log(2 * std::numbers::pi * var) - (y - mean) * (y - mean) / (2 * var);
}

}  // namespace

TEST(GbmModel, CoefficientsAndTensor) {
  const GbmModel m = default_gbm();
  std::array<double, 1> a{}, b{}, h{};
  const std::array<double, 1> x{1.7};
  m.drift(x, a);
  m.diffusion(x, b);
  m.corr_tensor(x, h);
  EXPECT_DOUBLE_EQ(a[0], 0.02 * 1.7);
  EXPECT_DOUBLE_EQ(b[0], 0.2 * 1.7);
  EXPECT_DOUBLE_EQ(h[0], 0.5 * 0.04 * 1.7);
  EXPECT_NEAR(fd_tensor(m, {1.7})[0], h[0], 1e-8);
}

TEST(GbmModel, ObservationDensityIsGaussianInLogX) {
  const GbmModel m = default_gbm();
  const std::array<double, 1> x{1.3}, y{0.1};
  EXPECT_NEAR(m.obs_log_density(x, y), normal_log_pdf(0.1, std::log(1.3), 0.02), 1e-12);
  const std::array<double, 1> negative{-0.5};
  EXPECT_TRUE(std::isfinite(m.obs_log_density(negative, y)));
}

TEST(ClarkCameronModel, TensorHasSingleEntry) {
  const ClarkCameronModel m = default_clark_cameron();
  const auto h = tensor(m, {0.3, -1.2});
  for (std::size_t idx = 0; idx < h.size(); ++idx)
    EXPECT_DOUBLE_EQ(h[idx], idx == (1 * 2 + 1) * 2 + 0 ? 0.5 : 0.0) << idx;
  const auto fd = fd_tensor(m, {0.3, -1.2});
  for (std::size_t idx = 0; idx < h.size(); ++idx) EXPECT_NEAR(fd[idx], h[idx], 1e-8);
  const std::array<double, 2> x{0.4, 1.0};
  const std::array<double, 1> y{0.2};
  EXPECT_NEAR(m.obs_log_density(x, y), normal_log_pdf(0.2, 0.7, 0.1), 1e-12);
}

TEST(NlmModel, AnalyticTensorMatchesFiniteDifferences) {
  const NlmModel m = nlm_model({1.0, 0.5}, {0.3, -0.2}, {1.2, 0.7}, 0.4);
  for (const auto& x : std::vector<std::vector<double>>{{0.0, 0.0}, {0.8, -1.0}, {-2.5, 3.0}}) {
    const auto h = tensor(m, x);
    const auto fd = fd_tensor(m, x);
    for (std::size_t idx = 0; idx < h.size(); ++idx) EXPECT_NEAR(fd[idx], h[idx], 1e-8);
  }
  std::array<double, 2> a{}, b{};
  m.drift(std::array<double, 2>{0.5, 2.0}, a);
  EXPECT_DOUBLE_EQ(a[0], 1.0 * (0.3 - 0.5));
  EXPECT_DOUBLE_EQ(a[1], 0.5 * (-0.2 - 0.5));
  std::array<double, 4> beta{};
  m.diffusion(std::array<double, 2>{0.5, 2.0}, beta);
  EXPECT_DOUBLE_EQ(beta[1], 0.0);
  EXPECT_DOUBLE_EQ(beta[2], 0.0);
  EXPECT_NEAR(beta[3], 0.7 / std::sqrt(1.25), 1e-15);
}

TEST(NlmModel, LaplaceObservations) {
  const NlmModel m = default_nlm();
  const double s = std::sqrt(0.1);
  const std::array<double, 2> x{0.6, -0.2};
  const std::array<double, 1> y{0.5};
  EXPECT_NEAR(m.obs_log_density(x, y), -std::log(2 * s) - std::abs(0.5 - 0.2) / s, 1e-12);

  Rng rng = make_rng(5);
  const int n = 200000;
  double mean = 0, abs_dev = 0;
  for (int i = 0; i < n; ++i) {
    std::array<double, 1> out{};
    m.sample_obs(x, rng, out);
    mean += out[0];
    abs_dev += std::abs(out[0] - 0.2);
  }
  mean /= n;
  abs_dev /= n;
  EXPECT_NEAR(mean, 0.2, 5 * std::sqrt(2 * s * s / n));
  EXPECT_NEAR(abs_dev, s, 5 * s / std::sqrt(n));
}

TEST(CallbackModel, FiniteDifferenceTensorReproducesGbm) {
  CallbackModel::Callbacks cb;
  cb.drift = [](std::span<const double> x, std::span<double> o) { o[0] = 0.02 * x[0]; };
  cb.diffusion = [](std::span<const double> x, std::span<double> o) { o[0] = 0.2 * x[0]; };
  cb.obs_log_density = [](std::span<const double>, std::span<const double>) { return 0.0; };
  cb.sample_obs = [](std::span<const double> x, Rng&, std::span<double> y) { y[0] = x[0]; };
  const CallbackModel m("custom", 1, 1, {1.0}, cb);
  std::array<double, 1> h{};
  m.corr_tensor(std::array<double, 1>{2.0}, h);
  EXPECT_NEAR(h[0], 0.5 * 0.04 * 2.0, 1e-8);
}

TEST(MakeModel, BuildsFromJsonAndRejectsUnknownIds) {
  auto gbm = make_model({{"id", "gbm"}, {"mu", 0.1}});
  EXPECT_EQ(gbm->name(), "gbm");
  EXPECT_DOUBLE_EQ(gbm->params().at("mu").get<double>(), 0.1);
  EXPECT_DOUBLE_EQ(gbm->params().at("sigma").get<double>(), 0.2);
  EXPECT_EQ(make_model({{"id", "clark-cameron"}})->dim(), 2u);
  EXPECT_EQ(make_model({{"id", "nlm"}})->dim(), 2u);
  EXPECT_THROW(make_model({{"id", "heston"}}), ConfigError);
}

TEST(TestFunction, ParsesTags) {
  const std::array<double, 2> x{1.0, 3.0};
  EXPECT_DOUBLE_EQ(TestFunction::parse("x2")(x), 3.0);
  EXPECT_DOUBLE_EQ(TestFunction::parse("mean")(x), 2.0);
  EXPECT_DOUBLE_EQ(TestFunction::parse("const:1")(x), 1.0);
  EXPECT_TRUE(TestFunction::parse("const:1").is_constant());
  EXPECT_DOUBLE_EQ(TestFunction::parse("x2").with_clip(2.5)(x), 2.5);
  EXPECT_EQ(TestFunction::parse("x2").tag(), "x2");
  EXPECT_THROW(TestFunction::parse("x0"), ConfigError);
  EXPECT_THROW(TestFunction::parse("y1"), ConfigError);
  EXPECT_THROW(TestFunction::parse("const:abc"), ConfigError);
}
