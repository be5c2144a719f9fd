#include "ubpf/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "ubpf/errors.hpp"

namespace ubpf {

namespace {

double gaussian_log_density(double y, double mean, double variance) {
  const double r = y - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * variance) - 0.5 * r * r / variance;
}

void require(bool condition, const std::string& message) {
  if (!condition) throw ConfigError(message);
}

}  // namespace

StateSpaceModel::StateSpaceModel(std::size_t dim, std::size_t obs_dim, std::vector<double> x0)
    : dim_(dim), obs_dim_(obs_dim), x0_(std::move(x0)) {
  require(dim >= 1 && dim <= kMaxDim,
          "state dimension must lie in [1, " + std::to_string(kMaxDim) + "]");
  require(obs_dim >= 1, "observation dimension must be positive");
  require(x0_.size() == dim, "initial state has the wrong dimension");
}

void finite_difference_corr_tensor(
    std::size_t dim,
    const std::function<void(std::span<const double>, std::span<double>)>& diffusion,
    std::span<const double> x, std::span<double> out, double delta) {
  std::vector<double> beta(dim * dim);
  std::vector<double> plus(dim * dim);
  std::vector<double> minus(dim * dim);
  std::vector<double> shifted(x.begin(), x.end());
  // dbeta[m][i*d + j] = ∂β_ij/∂x_m
  std::vector<double> dbeta(dim * dim * dim);
  diffusion(x, beta);
  for (std::size_t m = 0; m < dim; ++m) {
    shifted[m] = x[m] + delta;
    diffusion(shifted, plus);
    shifted[m] = x[m] - delta;
    diffusion(shifted, minus);
    shifted[m] = x[m];
    for (std::size_t e = 0; e < dim * dim; ++e)
      dbeta[m * dim * dim + e] = (plus[e] - minus[e]) / (2.0 * delta);
  }
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j)
      for (std::size_t k = 0; k < dim; ++k) {
        double acc = 0.0;
        for (std::size_t m = 0; m < dim; ++m)
          acc += beta[m * dim + k] * dbeta[m * dim * dim + i * dim + j];
        out[(i * dim + j) * dim + k] = 0.5 * acc;
      }
}

// ---------------------------------------------------------------------------
// GBM

GbmModel::GbmModel(double mu, double sigma, double x0, double tau2)
    : StateSpaceModel(1, 1, {x0}), mu_(mu), sigma_(sigma), tau2_(tau2) {
  require(std::isfinite(mu), "gbm: mu must be finite");
  require(sigma > 0.0 && std::isfinite(sigma), "gbm: sigma must be positive");
  require(x0 > 0.0 && std::isfinite(x0), "gbm: x0 must be positive");
  require(tau2 > 0.0 && std::isfinite(tau2), "gbm: tau2 must be positive");
}

nlohmann::json GbmModel::params() const {
  return {{"id", "gbm"}, {"mu", mu_}, {"sigma", sigma_}, {"x0", initial()}, {"tau2", tau2_}};
}

void GbmModel::drift(std::span<const double> x, std::span<double> out) const {
  out[0] = mu_ * x[0];
}

void GbmModel::diffusion(std::span<const double> x, std::span<double> out) const {
  out[0] = sigma_ * x[0];
}

void GbmModel::corr_tensor(std::span<const double> x, std::span<double> out) const {
  out[0] = 0.5 * sigma_ * sigma_ * x[0];
}

double GbmModel::obs_log_density(std::span<const double> x, std::span<const double> y) const {
  return gaussian_log_density(y[0], std::log(std::max(x[0], kPositiveFloor)), tau2_);
}

void GbmModel::sample_obs(std::span<const double> x, Rng& rng, std::span<double> y) const {
  std::normal_distribution<double> noise(0.0, std::sqrt(tau2_));
  y[0] = std::log(std::max(x[0], kPositiveFloor)) + noise(rng);
}

// ---------------------------------------------------------------------------
// Clark-Cameron

ClarkCameronModel::ClarkCameronModel(double tau2)
    : StateSpaceModel(2, 1, {0.0, 0.0}), tau2_(tau2) {
  require(tau2 > 0.0 && std::isfinite(tau2), "clark-cameron: tau2 must be positive");
}

nlohmann::json ClarkCameronModel::params() const {
  return {{"id", "clark-cameron"}, {"tau2", tau2_}};
}

void ClarkCameronModel::drift(std::span<const double>, std::span<double> out) const {
  out[0] = 0.0;
  out[1] = 0.0;
}

void ClarkCameronModel::diffusion(std::span<const double> x, std::span<double> out) const {
  out[0] = 1.0;
  out[1] = 0.0;
  out[2] = 0.0;
  out[3] = x[0];
}

void ClarkCameronModel::corr_tensor(std::span<const double>, std::span<double> out) const {
  std::fill(out.begin(), out.begin() + 8, 0.0);
  out[(1 * 2 + 1) * 2 + 0] = 0.5;  // h_{2,2,1}
}

double ClarkCameronModel::obs_log_density(std::span<const double> x,
                                          std::span<const double> y) const {
  return gaussian_log_density(y[0], 0.5 * (x[0] + x[1]), tau2_);
}

void ClarkCameronModel::sample_obs(std::span<const double> x, Rng& rng,
                                   std::span<double> y) const {
  std::normal_distribution<double> noise(0.0, std::sqrt(tau2_));
  y[0] = 0.5 * (x[0] + x[1]) + noise(rng);
}

// ---------------------------------------------------------------------------
// Nonlinear diffusion model

NlmModel::NlmModel(std::array<double, 2> theta, std::array<double, 2> mu,
                   std::array<double, 2> sigma, double scale)
    : StateSpaceModel(2, 1, {0.0, 0.0}), theta_(theta), mu_(mu), sigma_(sigma), scale_(scale) {
  require(scale > 0.0 && std::isfinite(scale), "nlm: Laplace scale must be positive");
  for (double v : {theta[0], theta[1], mu[0], mu[1], sigma[0], sigma[1]})
    require(std::isfinite(v), "nlm: parameters must be finite");
}

nlohmann::json NlmModel::params() const {
  return {{"id", "nlm"}, {"theta", theta_}, {"mu", mu_}, {"sigma", sigma_}, {"s", scale_}};
}

void NlmModel::drift(std::span<const double> x, std::span<double> out) const {
  out[0] = theta_[0] * (mu_[0] - x[0]);
  out[1] = theta_[1] * (mu_[1] - x[0]);
}

void NlmModel::diffusion(std::span<const double> x, std::span<double> out) const {
  const double s = 1.0 / std::sqrt(1.0 + x[0] * x[0]);
  out[0] = sigma_[0] * s;
  out[1] = 0.0;
  out[2] = 0.0;
  out[3] = sigma_[1] * s;
}

void NlmModel::corr_tensor(std::span<const double> x, std::span<double> out) const {
  std::fill(out.begin(), out.begin() + 8, 0.0);
  const double q = 1.0 + x[0] * x[0];
  const double c = -0.5 * sigma_[0] * x[0] / (q * q);
  out[(0 * 2 + 0) * 2 + 0] = c * sigma_[0];  // h_{1,1,1}
  out[(1 * 2 + 1) * 2 + 0] = c * sigma_[1];  // h_{2,2,1}
}

double NlmModel::obs_log_density(std::span<const double> x, std::span<const double> y) const {
  return -std::log(2.0 * scale_) - std::abs(y[0] - 0.5 * (x[0] + x[1])) / scale_;
}

void NlmModel::sample_obs(std::span<const double> x, Rng& rng, std::span<double> y) const {
  std::exponential_distribution<double> magnitude(1.0 / scale_);
  std::bernoulli_distribution sign(0.5);
  const double e = magnitude(rng);
  y[0] = 0.5 * (x[0] + x[1]) + (sign(rng) ? e : -e);
}

// ---------------------------------------------------------------------------
// Callback model

CallbackModel::CallbackModel(std::string name, std::size_t dim, std::size_t obs_dim,
                             std::vector<double> x0, Callbacks callbacks, double fd_step)
    : StateSpaceModel(dim, obs_dim, std::move(x0)),
      name_(std::move(name)),
      callbacks_(std::move(callbacks)),
      fd_step_(fd_step) {
  require(callbacks_.drift && callbacks_.diffusion && callbacks_.obs_log_density &&
              callbacks_.sample_obs,
          "callback model: every callback must be set");
  require(fd_step > 0.0, "callback model: finite-difference step must be positive");
}

nlohmann::json CallbackModel::params() const { return {{"id", name_}}; }

void CallbackModel::drift(std::span<const double> x, std::span<double> out) const {
  callbacks_.drift(x, out);
}

void CallbackModel::diffusion(std::span<const double> x, std::span<double> out) const {
  callbacks_.diffusion(x, out);
}

void CallbackModel::corr_tensor(std::span<const double> x, std::span<double> out) const {
  finite_difference_corr_tensor(dim(), callbacks_.diffusion, x, out, fd_step_);
}

double CallbackModel::obs_log_density(std::span<const double> x,
                                      std::span<const double> y) const {
  return callbacks_.obs_log_density(x, y);
}

void CallbackModel::sample_obs(std::span<const double> x, Rng& rng,
                               std::span<double> y) const {
  callbacks_.sample_obs(x, rng, y);
}

// ---------------------------------------------------------------------------
// Factories

GbmModel gbm_model(double mu, double sigma, double x0, double tau2) {
  return GbmModel(mu, sigma, x0, tau2);
}

ClarkCameronModel clark_cameron_model(double tau2) { return ClarkCameronModel(tau2); }

NlmModel nlm_model(std::array<double, 2> theta, std::array<double, 2> mu,
                   std::array<double, 2> sigma, double scale) {
  return NlmModel(theta, mu, sigma, scale);
}

GbmModel default_gbm() { return gbm_model(0.02, 0.2, 1.0, 0.02); }
ClarkCameronModel default_clark_cameron() { return clark_cameron_model(0.1); }
NlmModel default_nlm() { return nlm_model({1.0, 1.0}, {0.0, 0.0}, {1.0, 1.0}, std::sqrt(0.1)); }

std::unique_ptr<StateSpaceModel> make_model(const nlohmann::json& cfg) {
  const std::string id = cfg.value("id", std::string("gbm"));
  if (id == "gbm") {
    return std::make_unique<GbmModel>(cfg.value("mu", 0.02), cfg.value("sigma", 0.2),
                                      cfg.value("x0", 1.0), cfg.value("tau2", 0.02));
  }
  if (id == "clark-cameron") {
    return std::make_unique<ClarkCameronModel>(cfg.value("tau2", 0.1));
  }
  if (id == "nlm") {
    using Pair = std::array<double, 2>;
    return std::make_unique<NlmModel>(cfg.value("theta", Pair{1.0, 1.0}),
                                      cfg.value("mu", Pair{0.0, 0.0}),
                                      cfg.value("sigma", Pair{1.0, 1.0}),
                                      cfg.value("s", std::sqrt(0.1)));
  }
  throw ConfigError("unknown model id '" + id + "'");
}

// ---------------------------------------------------------------------------
// Test functions

TestFunction TestFunction::coordinate(std::size_t index) {
  return TestFunction(Kind::coordinate, index, 0.0);
}

TestFunction TestFunction::mean_of_coordinates() {
  return TestFunction(Kind::mean_of_coordinates, 0, 0.0);
}

TestFunction TestFunction::constant(double value) {
  return TestFunction(Kind::constant, 0, value);
}

TestFunction TestFunction::parse(std::string_view tag) {
  if (tag == "mean") return mean_of_coordinates();
  if (tag.starts_with("const:")) {
    const std::string value(tag.substr(6));
    try {
      std::size_t used = 0;
      const double c = std::stod(value, &used);
      if (used == value.size()) return constant(c);
    } catch (const std::exception&) {
    }
    throw ConfigError("bad constant test function '" + std::string(tag) + "'");
  }
  if (tag.size() >= 2 && tag[0] == 'x') {
    const std::string digits(tag.substr(1));
    if (std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      const auto index = std::stoul(digits);
      if (index >= 1) return coordinate(index - 1);
    }
  }
  throw ConfigError("unknown test function '" + std::string(tag) + "'");
}

TestFunction TestFunction::with_clip(double bound) const {
  if (!(bound > 0.0)) throw ConfigError("clip bound must be positive");
  TestFunction copy = *this;
  copy.clip_ = bound;
  return copy;
}

double TestFunction::operator()(std::span<const double> x) const {
  double v = 0.0;
  switch (kind_) {
    case Kind::coordinate:
      v = x[index_];
      break;
    case Kind::mean_of_coordinates:
      for (double xi : x) v += xi;
      v /= static_cast<double>(x.size());
      break;
    case Kind::constant:
      return value_;
  }
  if (clip_) v = std::clamp(v, -*clip_, *clip_);
  return v;
}

std::string TestFunction::tag() const {
  switch (kind_) {
    case Kind::coordinate:
      return "x" + std::to_string(index_ + 1);
    case Kind::mean_of_coordinates:
      return "mean";
    case Kind::constant: {
      nlohmann::json j = value_;
      return "const:" + j.dump();
    }
  }
  return {};
}

}  // namespace ubpf
