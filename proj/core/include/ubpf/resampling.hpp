#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ubpf/rng.hpp"

namespace ubpf {

/// Normalized weights from log-weights via a max shift. Throws WeightCollapse
/// (tagged with `time` and `ensemble`) if nothing is normalizable.
std::vector<double> normalize_log_weights(std::span<const double> log_weights,
                                          std::size_t time = 0,
                                          const std::string& ensemble = "single");

/// Checks w_i ≥ 0 and Σ w_i = 1 within 1e-12; throws ConfigError otherwise.
void validate_weights(std::span<const double> w);

/// Effective sample size 1 / Σ w_i².
double ess(std::span<const double> w);

/// N i.i.d. draws from the pmf w (0-based indices).
std::vector<std::size_t> multinomial_resample(std::span<const double> w, Rng& rng);
std::vector<std::size_t> multinomial_resample(std::span<const double> w, std::size_t count,
                                              Rng& rng);

struct CoupledIndices {
  std::vector<std::size_t> a1;
  std::vector<std::size_t> a2;
  std::vector<std::size_t> a3;
  /// Σ_j min(w1_j, w2_j, w3_j), the per-particle probability of a common draw.
  double overlap = 0.0;
  std::size_t common_count = 0;
};

/// Maximal coupling-type resampling of three weight vectors. Per particle, one
/// uniform decides between a common ancestor drawn from the min-pmf and
/// independent draws from the three residual pmfs.
CoupledIndices coupled_resample3(std::span<const double> w1, std::span<const double> w2,
                                 std::span<const double> w3, Rng& rng);

struct PairedIndices {
  std::vector<std::size_t> a1;
  std::vector<std::size_t> a2;
  double overlap = 0.0;
  std::size_t common_count = 0;
};

/// Two-marginal analogue of coupled_resample3.
PairedIndices coupled_resample2(std::span<const double> w1, std::span<const double> w2,
                                Rng& rng);

}  // namespace ubpf
