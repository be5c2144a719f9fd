#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ubpf/dataset.hpp"
#include "ubpf/estimators.hpp"
#include "ubpf/model.hpp"
#include "ubpf/oracles.hpp"

namespace ubpf {

/// Experiment configuration: a JSON document with defaults filled in.
///
/// Recognized keys (all optional):
///   model            {"id": "gbm"|"clark-cameron"|"nlm", ...parameters}
///   dataset          {"path", "n", "data_level", "seed"}
///   method           "pf" | "amlpf" | "ub-mlpf" | "ub-amlpf"
///   epsilon          target accuracy for `run`
///   epsilons         strictly decreasing grid for `sweep`
///   methods          methods compared by `sweep`
///   repetitions      R for `sweep`
///   time             observation time k (0 = last)
///   phi              "x1".."xd" | "mean" | "const:<c>"
///   resample         {"mode": "always"|"adaptive", "threshold"}
///   randomization    {"base_level", "max_level", "max_p", "n0", "replicates",
///                     "c_n", "c_m", "n0_min", "n0_cap", "level_shape"}
///   amlpf            {"c", "n_min"}
///   pf               {"c", "n_min"}
///   oracle           {"level", "particles", "repetitions", "cache_dir"}
///   probe            {"levels", "ps", "n0", "reps", "reference_particles",
///                     "reference_reps"}
///   seed, output_dir, parallel_width, literal_h, trace
class ExperimentConfig {
 public:
  ExperimentConfig();
  explicit ExperimentConfig(nlohmann::json overrides);

  static ExperimentConfig load(const std::filesystem::path& path);

  /// Applies "a.b.c=value"; value is parsed as JSON when possible and kept
  /// as a string otherwise.
  void set(std::string_view assignment);

  const nlohmann::json& json() const noexcept { return json_; }
  nlohmann::json& json() noexcept { return json_; }

  /// Hash of the settings that influence results (parallel_width and
  /// output_dir excluded), as 16 hex digits.
  std::string hash() const;

  std::filesystem::path output_dir() const;
  std::filesystem::path dataset_path() const;
  std::uint64_t seed() const;
  std::size_t parallel_width() const;
  Method method() const;
  TestFunction phi() const;
  FilterOptions filter_options() const;
  std::unique_ptr<StateSpaceModel> model() const;
  RandomizationConfig randomization(double epsilon, Method method) const;
  ReferenceSettings oracle_settings() const;

  /// Throws ConfigError on inconsistent values.
  void validate() const;

 private:
  nlohmann::json json_;
};

nlohmann::json default_experiment_json();

struct RunSummary {
  Method method = Method::ub_amlpf;
  double estimate = 0.0;
  double std_error = 0.0;
  std::uint64_t cost = 0;
  double wall_seconds = 0.0;
  std::vector<IncrementRecord> records;
};

/// Runs one estimator of π_k(φ) at accuracy ε with the given seed.
RunSummary run_method(const ExperimentConfig& config, const StateSpaceModel& model,
                      const Dataset& data, Method method, double epsilon, std::uint64_t seed);

struct SweepRow {
  Method method = Method::ub_amlpf;
  double epsilon = 0.0;
  double mse = 0.0;
  double cost = 0.0;
  double wall_seconds = 0.0;
  std::size_t reps = 0;
};

struct RateRow {
  Method method = Method::ub_amlpf;
  Slope fit;
  std::size_t points = 0;
};

/// Published log(cost)/log(MSE) slopes: unbiased MLPF, unbiased AMLPF, AMLPF.
struct PublishedRates {
  std::string model;
  std::array<double, 3> rates;
};
const std::vector<PublishedRates>& published_rates();

/// Oracle value of π_k(φ): Kalman for GBM, cached reference PF otherwise.
/// Throws ConfigError when a reference is needed and `compute` is false and
/// nothing is cached.
double oracle_value(const ExperimentConfig& config, const StateSpaceModel& model,
                    const Dataset& data, bool compute);

// Subcommands. Each writes its outputs under config.output_dir().
Dataset cmd_simulate_data(const ExperimentConfig& config);
nlohmann::json cmd_oracle(const ExperimentConfig& config);
nlohmann::json cmd_run(const ExperimentConfig& config);
std::vector<SweepRow> cmd_sweep(const ExperimentConfig& config);
std::vector<RateRow> cmd_rates(const std::vector<std::filesystem::path>& sweep_files,
                               std::ostream& report);
nlohmann::json cmd_variance_probe(const ExperimentConfig& config);

/// Reads sweep.csv rows; the config hash embedded in the header is returned
/// through `hash`.
std::vector<SweepRow> read_sweep(const std::filesystem::path& path, std::string* hash);
std::vector<RateRow> fit_rates(std::span<const SweepRow> rows);

/// log10-log10 scatter of cost against MSE, one series per method.
void write_sweep_svg(std::span<const SweepRow> rows, const std::filesystem::path& path);

}  // namespace ubpf
