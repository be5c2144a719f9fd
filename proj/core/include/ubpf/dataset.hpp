#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ubpf/milstein.hpp"
#include "ubpf/model.hpp"

namespace ubpf {

struct DatasetMetadata {
  std::string model_id;
  nlohmann::json model_params;
  unsigned data_level = 10;
  std::uint64_t seed = 0;

  friend bool operator==(const DatasetMetadata&, const DatasetMetadata&) = default;
};

/// Observations y_1..y_n (row-major, n × obs_dim) and, for synthetic data,
/// the latent states at the observation times (n × dim).
struct Dataset {
  std::size_t obs_dim = 1;
  std::vector<double> observations;
  std::size_t state_dim = 0;
  std::vector<double> latent;
  DatasetMetadata meta;

  std::size_t size() const noexcept {
    return obs_dim == 0 ? 0 : observations.size() / obs_dim;
  }
  /// Observation at time k, 1-based as in the filtering recursion.
  std::span<const double> y(std::size_t k) const {
    return {observations.data() + (k - 1) * obs_dim, obs_dim};
  }
  bool has_latent() const noexcept { return !latent.empty(); }
  std::span<const double> x(std::size_t k) const {
    return {latent.data() + (k - 1) * state_dim, state_dim};
  }
};

/// Simulates the latent path with the truncated Milstein kernel at
/// `data_level` over n unit intervals from x0 and draws y_k ~ g(x_k, ·).
/// Requires n ≥ 1 and data_level ≥ 6.
Dataset simulate_dataset(const StateSpaceModel& model, std::size_t n, Level data_level,
                         std::uint64_t seed,
                         CorrectionMode mode = CorrectionMode::kronecker);

/// Writes `<path>` as CSV (k,y1..yd) and metadata to `<path stem>.meta.json`.
void write_dataset(const Dataset& data, const std::filesystem::path& csv_path);
Dataset read_dataset(const std::filesystem::path& csv_path);
std::filesystem::path metadata_path(const std::filesystem::path& csv_path);

nlohmann::json to_json(const DatasetMetadata& meta);
DatasetMetadata metadata_from_json(const nlohmann::json& j);

/// Stable FNV-1a hash of the observations; keys oracle caches.
std::uint64_t dataset_hash(const Dataset& data);

}  // namespace ubpf
