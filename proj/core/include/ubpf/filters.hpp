#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ubpf/dataset.hpp"
#include "ubpf/milstein.hpp"
#include "ubpf/model.hpp"
#include "ubpf/rng.hpp"

namespace ubpf {

struct ResamplePolicy {
  enum class Mode { always, adaptive };

  Mode mode = Mode::adaptive;
  /// Resample when ESS < threshold · N (adaptive mode). Must lie in (0, 1].
  double threshold = 0.5;

  static ResamplePolicy always() { return {Mode::always, 1.0}; }
  static ResamplePolicy adaptive(double threshold = 0.5) {
    return {Mode::adaptive, threshold};
  }
  void validate() const;
  bool should_resample(double min_ess, std::size_t n) const noexcept;
};

/// Particle cloud at an observation time, taken after propagation and before
/// reweighting/resampling.
///
/// log_carry holds the normalized log-weights carried from earlier times
/// (−log N right after a resample); log_lik holds log g(x_i, y_k). The pair is
/// the discretized predictor: η(f) = Σ exp(log_carry_i) f(x_i).
struct Cloud {
  std::size_t dim = 0;
  std::vector<double> x;
  std::vector<double> log_carry;
  std::vector<double> log_lik;

  std::size_t size() const noexcept { return log_lik.size(); }
  std::span<const double> particle(std::size_t i) const { return {x.data() + i * dim, dim}; }
  /// Normalized weights of the filter approximation at this time.
  std::vector<double> weights(std::size_t time = 0, const std::string& tag = "cloud") const;
};

/// η(gφ) and η(g), both scaled by exp(−log_scale) so sums stay finite.
struct PredictorSums {
  double log_scale = 0.0;
  double g = 0.0;
  double g_phi = 0.0;
};

PredictorSums predictor_sums(const Cloud& cloud, const TestFunction& phi);

/// Self-normalized estimate Σ W_i φ(x_i).
double cloud_estimate(const Cloud& cloud, const TestFunction& phi);

struct Ensemble {
  Level level;
  std::size_t time = 0;
  Cloud cloud;
};

struct CoupledEnsemble {
  Level level;
  std::size_t time = 0;
  bool antithetic = true;
  Cloud fine;
  Cloud coarse;
  /// Empty for the non-antithetic baseline.
  Cloud anti;
};

struct TraceRow {
  std::size_t time = 0;
  double ess_fine = 0.0;
  double ess_coarse = 0.0;
  double ess_anti = 0.0;
  bool resampled = false;
  double estimate = 0.0;
};

struct FilterOptions {
  ResamplePolicy policy;
  KernelOptions kernel;
  /// Run up to this observation time; 0 means the full dataset.
  std::size_t horizon = 0;
  /// Keep every snapshot, or only the one at the horizon.
  bool keep_all = true;
  /// Debug trace: called at every observation time with ESS values and the
  /// estimate of `trace_phi`.
  std::function<void(const TraceRow&)> trace;
  TestFunction trace_phi = TestFunction::coordinate(0);
};

struct PfRun {
  std::vector<Ensemble> snapshots;
  std::uint64_t cost = 0;
  std::size_t resample_count = 0;

  const Ensemble& at(std::size_t time) const;
};

struct CpfRun {
  std::vector<CoupledEnsemble> snapshots;
  std::uint64_t cost = 0;
  std::size_t resample_count = 0;

  const CoupledEnsemble& at(std::size_t time) const;
};

/// Bootstrap particle filter at a single level.
PfRun pf_run(const StateSpaceModel& model, Level level, std::size_t n, const Dataset& data,
             const FilterOptions& options, Rng& rng);

double pf_estimate(const Ensemble& ensemble, const TestFunction& phi);

/// Coupled particle filter with antithetic kernel and three-way coupled
/// resampling; level ≥ 1.
CpfRun cpf_run(const StateSpaceModel& model, Level level, std::size_t n, const Dataset& data,
               const FilterOptions& options, Rng& rng);

/// Non-antithetic coupled filter: fine and coarse share increments and are
/// resampled with two-way coupled resampling.
CpfRun cpf2_run(const StateSpaceModel& model, Level level, std::size_t n, const Dataset& data,
                const FilterOptions& options, Rng& rng);

/// ½(π^l + π^{l,a})(φ) − π̄^{l-1}(φ), or π^l(φ) − π̄^{l-1}(φ) for the baseline.
double cpf_increment_estimate(const CoupledEnsemble& ensemble, const TestFunction& phi);

}  // namespace ubpf
