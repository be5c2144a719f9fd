#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ubpf/dataset.hpp"
#include "ubpf/filters.hpp"
#include "ubpf/model.hpp"

namespace ubpf {

enum class Method { pf, amlpf, ub_mlpf, ub_amlpf };

std::string_view to_string(Method method) noexcept;
Method parse_method(std::string_view name);

/// Strictly positive pmf on {first, ..., last}.
///
/// "Unbounded" supports are tabulated until the remaining tail mass drops
/// below 1e-17, which is exact in double precision.
class DiscretePmf {
 public:
  enum class Shape {
    /// ∝ 2^{-rate·i}
    geometric,
    /// ∝ 2^{-rate·i} (i + 1) log2(i + 2)²
    log_corrected,
  };

  DiscretePmf() = default;
  static DiscretePmf make(Shape shape, double rate, unsigned first,
                          std::optional<unsigned> last);

  double operator()(unsigned i) const noexcept;
  unsigned sample(Rng& rng) const;
  unsigned first() const noexcept { return first_; }
  unsigned last() const noexcept {
    return first_ + static_cast<unsigned>(probs_.size()) - 1;
  }
  const std::vector<double>& probabilities() const noexcept { return probs_; }
  Shape shape() const noexcept { return shape_; }
  double rate() const noexcept { return rate_; }
  bool bounded() const noexcept { return bounded_; }

 private:
  Shape shape_ = Shape::geometric;
  double rate_ = 1.0;
  unsigned first_ = 0;
  bool bounded_ = true;
  std::vector<double> probs_;
  std::vector<double> cdf_;
};

struct RandomizationConfig {
  unsigned base_level = 0;
  /// Decay of the level pmf, 2^{-τ l}: 1 for the antithetic estimator,
  /// ½ for the non-antithetic one.
  double tau = 1.0;
  DiscretePmf level_pmf;
  DiscretePmf p_pmf;
  std::size_t n0 = 50;
  std::size_t replicates = 100;
  std::uint64_t seed = 0;
  bool antithetic = true;

  /// N_p = 2^p N_0.
  std::size_t samples(unsigned p) const noexcept { return n0 << p; }
  unsigned max_level() const noexcept { return level_pmf.last(); }
  unsigned max_p() const noexcept { return p_pmf.last(); }
  void validate() const;
};

/// Proportionality constants the defaults leave open.
struct DefaultConstants {
  /// N_0 = clamp(c_n · P_max² · 2^{2 P_max}, n0_min, n0_cap).
  double c_n = 1.0 / 64.0;
  std::size_t n0_min = 50;
  std::size_t n0_cap = 1 << 14;
  /// M = ⌈c_m ε^{-2}⌉.
  double c_m = 1.0;
  unsigned base_level = 0;
};

/// L_max = P_max = max(2, ⌈log2(1/ε)⌉), geometric pmfs on the truncated
/// supports, τ = 1 (ub-amlpf) or ½ (ub-mlpf).
RandomizationConfig default_config(double epsilon, Method method,
                                   const DefaultConstants& constants = {});

/// Model, data, observation time, test function and filter settings shared by
/// every estimator.
struct Problem {
  const StateSpaceModel* model = nullptr;
  const Dataset* data = nullptr;
  std::size_t time = 1;
  TestFunction phi = TestFunction::coordinate(0);
  FilterOptions filter;

  /// Filter options truncated to `time` and keeping only the last snapshot.
  FilterOptions run_options() const;
  void validate() const;
};

/// Estimates from p + 1 independent constituent runs of sizes
/// N_0, N_1 − N_0, …, N_p − N_{p-1}. The N_{p-1} value reuses the first p
/// runs; for p = 0 it is 0.
struct NestedEstimate {
  double at_p = 0.0;
  double at_prev = 0.0;
  std::uint64_t cost = 0;
  std::vector<std::uint64_t> runs_at_p;
  std::vector<std::uint64_t> runs_at_prev;
};

/// Combination weights (N_q − N_{q-1}) / N_p, q = 0..p.
std::vector<double> nesting_weights(std::size_t n0, unsigned p);

NestedEstimate nested_pf_estimate(const Problem& problem, Level base, unsigned p,
                                  std::size_t n0, std::uint64_t seed);

NestedEstimate nested_cpf_estimate(const Problem& problem, Level level, unsigned p,
                                   std::size_t n0, std::uint64_t seed, bool antithetic);

struct IncrementRecord {
  std::size_t index = 0;
  unsigned level = 0;
  unsigned p = 0;
  /// Ξ_{l,p}, including its 1/ℙ_P(p) factor.
  double xi = 0.0;
  std::uint64_t cost = 0;
  std::uint64_t seed_tag = 0;
};

/// Ξ_{l,p} = [estimate at N_p − estimate at N_{p-1}] / ℙ_P(p), from the
/// nested PF at the base level and the nested coupled PF above it.
IncrementRecord xi_term(const Problem& problem, const RandomizationConfig& config,
                        unsigned level, unsigned p, std::uint64_t seed);

struct UnbiasedResult {
  double estimate = 0.0;
  double std_error = 0.0;
  std::vector<IncrementRecord> records;
  std::uint64_t total_cost = 0;
  double wall_seconds = 0.0;

  /// Mean over records of xi / ℙ_L(l).
  static double reconstruct(std::span<const IncrementRecord> records,
                            const RandomizationConfig& config);
};

/// Single-term doubly randomized estimator: M i.i.d. (L_i, P_i) draws, each
/// turned into Ξ_{L_i,P_i} / ℙ_L(L_i), averaged. Replicate i uses seed
/// split_seed(config.seed, i), so the result does not depend on
/// `parallel_width`.
UnbiasedResult unbiased_estimate(const Problem& problem, const RandomizationConfig& config,
                                 std::size_t parallel_width = 1);

/// MLMC allocation N_l = ⌈c · ε^{-2} · Δ_l · (L − L̲ + 1)⌉ for increment
/// variance O(Δ_l) and cost O(Δ_l^{-1}), floored at n_min.
std::vector<std::size_t> amlpf_allocation(unsigned base_level, unsigned max_level,
                                          double epsilon, double c = 1.0,
                                          std::size_t n_min = 10);

struct TelescopingResult {
  double estimate = 0.0;
  std::uint64_t cost = 0;
  /// Base-level estimate followed by the increments for l = L̲+1..L.
  std::vector<double> terms;
};

/// π̂^{L̲}(φ) + Σ_{l=L̲+1}^{L} increment estimates, all runs independent.
/// `samples[l − L̲]` particles at each level.
TelescopingResult amlpf_estimate(const Problem& problem, unsigned base_level,
                                 unsigned max_level, std::span<const std::size_t> samples,
                                 std::uint64_t seed, bool antithetic = true);

struct ProbeRow {
  unsigned level = 0;
  unsigned p = 0;
  std::size_t n_p = 0;
  std::size_t reps = 0;
  double mean = 0.0;
  double variance = 0.0;
  /// E[(estimate − reference)²] and its standard error.
  double second_moment = 0.0;
  double second_moment_stderr = 0.0;
};

/// Monte Carlo second moment of the N_p increment estimator at level l
/// (or the base-level estimator when level == base) about `reference`.
ProbeRow variance_probe(const Problem& problem, unsigned base_level, unsigned level,
                        unsigned p, std::size_t n0, std::size_t reps, bool antithetic,
                        double reference, std::uint64_t seed, std::size_t parallel_width = 1);

/// Least-squares slope of y on x with its standard error.
struct Slope {
  double slope = 0.0;
  double intercept = 0.0;
  double std_error = 0.0;
};
Slope fit_slope(std::span<const double> x, std::span<const double> y);

}  // namespace ubpf
