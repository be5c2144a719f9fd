#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ubpf/rng.hpp"

namespace ubpf {

/// Largest state dimension the kernels support; buffers for α, β and h live
/// on the stack in the inner loop.
inline constexpr std::size_t kMaxDim = 6;

/// A diffusion dX = α(X)dt + β(X)dW observed at integer times through g(x, y).
///
/// Layouts: diffusion writes β row-major (out[i*d + j] = β_ij); the Milstein
/// correction tensor writes out[(i*d + j)*d + k] = h_ijk with
/// h_ijk(x) = ½ Σ_m β_mk(x) ∂β_ij(x)/∂x_m.
///
/// Implementations are immutable after construction and safe to share
/// between threads.
class StateSpaceModel {
 public:
  StateSpaceModel(std::size_t dim, std::size_t obs_dim, std::vector<double> x0);
  virtual ~StateSpaceModel() = default;

  virtual std::string_view name() const = 0;
  virtual nlohmann::json params() const = 0;

  virtual void drift(std::span<const double> x, std::span<double> out) const = 0;
  virtual void diffusion(std::span<const double> x, std::span<double> out) const = 0;
  virtual void corr_tensor(std::span<const double> x, std::span<double> out) const = 0;
  virtual double obs_log_density(std::span<const double> x,
                                 std::span<const double> y) const = 0;
  virtual void sample_obs(std::span<const double> x, Rng& rng,
                          std::span<double> y) const = 0;

  std::size_t dim() const noexcept { return dim_; }
  std::size_t obs_dim() const noexcept { return obs_dim_; }
  std::span<const double> x0() const noexcept { return x0_; }

 private:
  std::size_t dim_;
  std::size_t obs_dim_;
  std::vector<double> x0_;
};

/// Finite-difference approximation of h_ijk from a diffusion callback,
/// central differences with step `delta` in every coordinate.
void finite_difference_corr_tensor(
    std::size_t dim,
    const std::function<void(std::span<const double>, std::span<double>)>& diffusion,
    std::span<const double> x, std::span<double> out, double delta = 1e-5);

/// dX = μX dt + σX dW, Y | X=x ~ N(log x, τ²).
class GbmModel final : public StateSpaceModel {
 public:
  /// log() is clamped below at this value in the observation density.
  static constexpr double kPositiveFloor = 1e-300;

  GbmModel(double mu, double sigma, double x0, double tau2);

  std::string_view name() const override { return "gbm"; }
  nlohmann::json params() const override;
  void drift(std::span<const double> x, std::span<double> out) const override;
  void diffusion(std::span<const double> x, std::span<double> out) const override;
  void corr_tensor(std::span<const double> x, std::span<double> out) const override;
  double obs_log_density(std::span<const double> x,
                         std::span<const double> y) const override;
  void sample_obs(std::span<const double> x, Rng& rng,
                  std::span<double> y) const override;

  double mu() const noexcept { return mu_; }
  double sigma() const noexcept { return sigma_; }
  double tau2() const noexcept { return tau2_; }
  double initial() const noexcept { return x0()[0]; }

 private:
  double mu_;
  double sigma_;
  double tau2_;
};

/// dX_1 = dW_1, dX_2 = X_1 dW_2 from (0, 0); Y | X ~ N((x_1 + x_2)/2, τ²).
class ClarkCameronModel final : public StateSpaceModel {
 public:
  explicit ClarkCameronModel(double tau2);

  std::string_view name() const override { return "clark-cameron"; }
  nlohmann::json params() const override;
  void drift(std::span<const double> x, std::span<double> out) const override;
  void diffusion(std::span<const double> x, std::span<double> out) const override;
  void corr_tensor(std::span<const double> x, std::span<double> out) const override;
  double obs_log_density(std::span<const double> x,
                         std::span<const double> y) const override;
  void sample_obs(std::span<const double> x, Rng& rng,
                  std::span<double> y) const override;

  double tau2() const noexcept { return tau2_; }

 private:
  double tau2_;
};

/// Two-dimensional SDE with mean-reverting drift θ_i(μ_i − x_1) and
/// diffusion σ_i/√(1 + x_1²) on the diagonal, observed through a Laplace
/// law with location (x_1 + x_2)/2 and scale s.
class NlmModel final : public StateSpaceModel {
 public:
  NlmModel(std::array<double, 2> theta, std::array<double, 2> mu,
           std::array<double, 2> sigma, double scale);

  std::string_view name() const override { return "nlm"; }
  nlohmann::json params() const override;
  void drift(std::span<const double> x, std::span<double> out) const override;
  void diffusion(std::span<const double> x, std::span<double> out) const override;
  void corr_tensor(std::span<const double> x, std::span<double> out) const override;
  double obs_log_density(std::span<const double> x,
                         std::span<const double> y) const override;
  void sample_obs(std::span<const double> x, Rng& rng,
                  std::span<double> y) const override;

 private:
  std::array<double, 2> theta_;
  std::array<double, 2> mu_;
  std::array<double, 2> sigma_;
  double scale_;
};

/// User-defined model from callbacks. The correction tensor comes from
/// central finite differences of the diffusion callback.
class CallbackModel final : public StateSpaceModel {
 public:
  using VectorField = std::function<void(std::span<const double>, std::span<double>)>;
  using LogDensity =
      std::function<double(std::span<const double>, std::span<const double>)>;
  using Sampler = std::function<void(std::span<const double>, Rng&, std::span<double>)>;

  struct Callbacks {
    VectorField drift;
    VectorField diffusion;
    LogDensity obs_log_density;
    Sampler sample_obs;
  };

  CallbackModel(std::string name, std::size_t dim, std::size_t obs_dim,
                std::vector<double> x0, Callbacks callbacks, double fd_step = 1e-5);

  std::string_view name() const override { return name_; }
  nlohmann::json params() const override;
  void drift(std::span<const double> x, std::span<double> out) const override;
  void diffusion(std::span<const double> x, std::span<double> out) const override;
  void corr_tensor(std::span<const double> x, std::span<double> out) const override;
  double obs_log_density(std::span<const double> x,
                         std::span<const double> y) const override;
  void sample_obs(std::span<const double> x, Rng& rng,
                  std::span<double> y) const override;

 private:
  std::string name_;
  Callbacks callbacks_;
  double fd_step_;
};

GbmModel gbm_model(double mu, double sigma, double x0, double tau2);
ClarkCameronModel clark_cameron_model(double tau2);
NlmModel nlm_model(std::array<double, 2> theta, std::array<double, 2> mu,
                   std::array<double, 2> sigma, double scale);

/// Benchmark instances with the published parameter values.
GbmModel default_gbm();
ClarkCameronModel default_clark_cameron();
NlmModel default_nlm();

/// Build a model from `{"id": "gbm"|"clark-cameron"|"nlm", ...params}`.
/// Missing parameters fall back to the benchmark instance.
std::unique_ptr<StateSpaceModel> make_model(const nlohmann::json& cfg);

/// The quantity φ whose filter expectation is estimated.
class TestFunction {
 public:
  enum class Kind { coordinate, mean_of_coordinates, constant };

  static TestFunction coordinate(std::size_t index);
  static TestFunction mean_of_coordinates();
  static TestFunction constant(double value);

  /// Parses "x1".."xd", "mean" or "const:<value>".
  static TestFunction parse(std::string_view tag);

  /// Values are clamped to [-bound, bound] when a bound is set.
  TestFunction with_clip(double bound) const;

  double operator()(std::span<const double> x) const;
  std::string tag() const;
  Kind kind() const noexcept { return kind_; }
  std::size_t index() const noexcept { return index_; }
  bool is_constant() const noexcept { return kind_ == Kind::constant; }
  double constant_value() const noexcept { return value_; }
  std::optional<double> clip() const noexcept { return clip_; }

 private:
  TestFunction(Kind kind, std::size_t index, double value)
      : kind_(kind), index_(index), value_(value) {}

  Kind kind_;
  std::size_t index_ = 0;
  double value_ = 0.0;
  std::optional<double> clip_;
};

}  // namespace ubpf
