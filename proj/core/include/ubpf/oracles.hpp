#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "ubpf/dataset.hpp"
#include "ubpf/filters.hpp"
#include "ubpf/model.hpp"

namespace ubpf {

/// Posterior of U_k = log X_k given y_{1:k} for the GBM model.
struct KalmanState {
  double mean = 0.0;
  double variance = 0.0;
  /// Predictive moments before assimilating y_k.
  double pred_mean = 0.0;
  double pred_variance = 0.0;
};

struct GbmFilterMoments {
  std::vector<KalmanState> states;

  /// E[X_k | y_{1:k}] = exp(m_k + s_k²/2); k is 1-based.
  double filter_mean(std::size_t k) const;
  double log_mean(std::size_t k) const { return states.at(k - 1).mean; }
  double log_variance(std::size_t k) const { return states.at(k - 1).variance; }
};

/// One Kalman step: U_k = U_{k-1} + (μ − σ²/2) + σ ξ, Y_k = U_k + τ ε.
KalmanState gbm_kalman_step(const GbmModel& model, const KalmanState& previous,
                            double y);

/// Exact filter of the continuous-time GBM model at the observation times.
GbmFilterMoments gbm_exact_filter(const GbmModel& model, std::span<const double> observations);
GbmFilterMoments gbm_exact_filter(const GbmModel& model, const Dataset& data);

/// E X_t = x0 e^{μt}, Var X_t = x0² e^{2μt}(e^{σ²t} − 1).
std::array<double, 2> gbm_moments(const GbmModel& model, double t);

struct ReferenceSettings {
  unsigned level = 9;
  std::size_t particles = 100000;
  std::size_t repetitions = 20;
  std::uint64_t seed = 0x5eed;
  std::size_t parallel_width = 1;
  FilterOptions filter;
};

struct ReferenceEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::vector<double> repetitions;
};

/// High-resolution bootstrap PF, averaged over independent repetitions.
ReferenceEstimate reference_pf(const StateSpaceModel& model, const Dataset& data,
                               std::size_t time, const TestFunction& phi,
                               const ReferenceSettings& settings = {});

/// Exact joint pmf of one particle's (a_1, a_2, a_3) under coupled_resample3,
/// keyed by 0-based index triples. N ≤ 4.
std::map<std::array<std::size_t, 3>, double> enumerate_coupled_resampling(
    std::span<const double> w1, std::span<const double> w2, std::span<const double> w3);

/// Marginal pmf of coordinate m (0, 1 or 2) of an enumerated joint pmf.
std::vector<double> joint_marginal(const std::map<std::array<std::size_t, 3>, double>& joint,
                                   std::size_t m, std::size_t n);

/// On-disk cache of reference values keyed by (model, dataset hash, settings).
class OracleCache {
 public:
  explicit OracleCache(std::filesystem::path directory);

  static std::string key(const StateSpaceModel& model, const Dataset& data,
                         std::size_t time, const TestFunction& phi,
                         const ReferenceSettings& settings);

  std::optional<ReferenceEstimate> load(const std::string& key) const;
  void store(const std::string& key, const ReferenceEstimate& value) const;

 private:
  std::filesystem::path directory_;
};

}  // namespace ubpf
