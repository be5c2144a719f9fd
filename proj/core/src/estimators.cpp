#include "ubpf/estimators.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "ubpf/errors.hpp"
#include "ubpf/parallel.hpp"

namespace ubpf {

std::string_view to_string(Method method) noexcept {
  switch (method) {
    case Method::pf:
      return "pf";
    case Method::amlpf:
      return "amlpf";
    case Method::ub_mlpf:
      return "ub-mlpf";
    case Method::ub_amlpf:
      return "ub-amlpf";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::pf, Method::amlpf, Method::ub_mlpf, Method::ub_amlpf})
    if (to_string(m) == name) return m;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// DiscretePmf

namespace {

double shape_weight(DiscretePmf::Shape shape, double rate, unsigned i) {
  const double base = std::exp2(-rate * static_cast<double>(i));
  if (shape == DiscretePmf::Shape::geometric) return base;
  const double lg = std::log2(static_cast<double>(i) + 2.0);
  return base * (static_cast<double>(i) + 1.0) * lg * lg;
}

}  // namespace

DiscretePmf DiscretePmf::make(Shape shape, double rate, unsigned first,
                              std::optional<unsigned> last) {
  if (!std::isfinite(rate)) throw ConfigError("pmf rate must be finite");
  if (last && *last < first) throw ConfigError("pmf support is empty");
  if (!last && !(rate > 0.0)) throw ConfigError("an unbounded pmf needs a positive rate");

  DiscretePmf pmf;
  pmf.shape_ = shape;
  pmf.rate_ = rate;
  pmf.first_ = first;
  pmf.bounded_ = last.has_value();
  std::vector<double> weights;
  double total = 0.0;
  constexpr unsigned kMaxSupport = 4096;
  for (unsigned i = first;; ++i) {
    const double w = shape_weight(shape, rate, i);
    weights.push_back(w);
    total += w;
    if (last) {
      if (i == *last) break;
    } else {
      // Stop once the remaining tail is negligible: the geometric factor
      // dominates the polynomial one for i beyond a few dozen.
      const double next = shape_weight(shape, rate, i + 1);
      const double ratio = next / w;
      if (ratio < 1.0 && next / (1.0 - ratio) < 1e-17 * total) break;
    }
    if (weights.size() >= kMaxSupport) throw ConfigError("pmf support too large");
  }
  if (!(total > 0.0) || !std::isfinite(total)) throw ConfigError("pmf is not normalizable");
  pmf.probs_.resize(weights.size());
  pmf.cdf_.resize(weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    pmf.probs_[i] = weights[i] / total;
    if (!(pmf.probs_[i] > 0.0)) throw ConfigError("pmf must be strictly positive on its support");
    acc += pmf.probs_[i];
    pmf.cdf_[i] = acc;
  }
  return pmf;
}

double DiscretePmf::operator()(unsigned i) const noexcept {
  if (i < first_ || i > last()) return 0.0;
  return probs_[i - first_];
}

unsigned DiscretePmf::sample(Rng& rng) const {
  const double u = uniform01(rng) * cdf_.back();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const auto offset = std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()),
                                            probs_.size() - 1);
  return first_ + static_cast<unsigned>(offset);
}

// ---------------------------------------------------------------------------
// Configuration

void RandomizationConfig::validate() const {
  if (level_pmf.probabilities().empty() || p_pmf.probabilities().empty())
    throw ConfigError("randomization pmfs are not set");
  if (level_pmf.first() != base_level)
    throw ConfigError("level pmf must start at the base level");
  if (p_pmf.first() != 0) throw ConfigError("sample-size pmf must start at p = 0");
  for (const auto* pmf : {&level_pmf, &p_pmf}) {
    const auto& probs = pmf->probabilities();
    const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError("pmf does not sum to 1");
    for (double v : probs)
      if (!(v > 0.0)) throw ConfigError("pmf must be strictly positive");
  }
  if (n0 == 0) throw ConfigError("N_0 must be positive");
  if (replicates == 0) throw ConfigError("replicate count M must be positive");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
}

RandomizationConfig default_config(double epsilon, Method method,
                                   const DefaultConstants& constants) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
  if (method != Method::ub_amlpf && method != Method::ub_mlpf)
    throw ConfigError("default_config applies to the unbiased methods only");
  if (!(constants.c_n > 0.0) || !(constants.c_m > 0.0))
    throw ConfigError("c_n and c_m must be positive");
  if (constants.n0_min == 0 || constants.n0_cap < constants.n0_min)
    throw ConfigError("N_0 bounds are inconsistent");

  const auto needed = static_cast<unsigned>(std::ceil(std::log2(1.0 / epsilon) - 1e-12));
  const unsigned max_level = std::max({2u, needed, constants.base_level + 1});
  const unsigned max_p = max_level;

  RandomizationConfig config;
  config.base_level = constants.base_level;
  config.tau = method == Method::ub_amlpf ? 1.0 : 0.5;
  config.antithetic = method == Method::ub_amlpf;
  config.level_pmf = DiscretePmf::make(DiscretePmf::Shape::geometric, config.tau,
                                       constants.base_level, max_level);
  config.p_pmf = DiscretePmf::make(DiscretePmf::Shape::geometric, 1.0, 0, max_p);
  const double p = static_cast<double>(max_p);
  const double n0 = std::ceil(constants.c_n * p * p * std::exp2(2.0 * p));
  config.n0 = static_cast<std::size_t>(
      std::clamp(n0, static_cast<double>(constants.n0_min),
                 static_cast<double>(constants.n0_cap)));
  config.replicates =
      static_cast<std::size_t>(std::ceil(constants.c_m / (epsilon * epsilon) - 1e-9));
  return config;
}

FilterOptions Problem::run_options() const {
  FilterOptions options = filter;
  options.horizon = time;
  options.keep_all = false;
  options.trace = nullptr;
  return options;
}

void Problem::validate() const {
  if (model == nullptr || data == nullptr) throw ConfigError("problem needs a model and data");
  if (time == 0 || time > data->size())
    throw ConfigError("observation time " + std::to_string(time) + " outside 1.." +
                      std::to_string(data->size()));
  if (phi.kind() == TestFunction::Kind::coordinate && phi.index() >= model->dim())
    throw ConfigError("test function coordinate out of range");
}

// ---------------------------------------------------------------------------
// Nested estimators

std::vector<double> nesting_weights(std::size_t n0, unsigned p) {
  std::vector<double> w(p + 1);
  const double np = static_cast<double>(n0 << p);
  for (unsigned q = 0; q <= p; ++q) {
    const std::size_t size = q == 0 ? n0 : (n0 << q) - (n0 << (q - 1));
    w[q] = static_cast<double>(size) / np;
  }
  return w;
}

namespace {

std::size_t run_size(std::size_t n0, unsigned q) {
  return q == 0 ? n0 : (n0 << q) - (n0 << (q - 1));
}

/// Self-normalized ratio η^{0:upto}(gφ)/η^{0:upto}(g) from per-run sums.
/// Runs enter with weight (N_q − N_{q-1})/N_upto; N_upto cancels.
double pooled_ratio(std::span<const PredictorSums> runs, std::span<const std::size_t> sizes,
                    std::size_t upto) {
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < upto; ++q) top = std::max(top, runs[q].log_scale);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t q = 0; q < upto; ++q) {
    // Per-run sums are η_q(·) up to exp(log_scale); weight by run size.
    const double scale = static_cast<double>(sizes[q]) * std::exp(runs[q].log_scale - top);
    num += scale * runs[q].g_phi;
    den += scale * runs[q].g;
  }
  return num / den;
}

void check_nested(const Problem& problem, unsigned p, std::size_t n0) {
  problem.validate();
  if (n0 == 0) throw ConfigError("N_0 must be positive");
  if (std::bit_width(n0) + p > 62) throw ConfigError("N_0 * 2^p overflows");
}

}  // namespace

NestedEstimate nested_pf_estimate(const Problem& problem, Level base, unsigned p,
                                  std::size_t n0, std::uint64_t seed) {
  check_nested(problem, p, n0);
  const FilterOptions options = problem.run_options();
  std::vector<PredictorSums> sums(p + 1);
  std::vector<std::size_t> sizes(p + 1);
  NestedEstimate out;
  for (unsigned q = 0; q <= p; ++q) {
    const std::uint64_t tag = split_seed(seed, q);
    Rng rng = make_rng(tag);
    sizes[q] = run_size(n0, q);
    const PfRun run = pf_run(*problem.model, base, sizes[q], *problem.data, options, rng);
    sums[q] = predictor_sums(run.at(problem.time).cloud, problem.phi);
    out.cost += run.cost;
    out.runs_at_p.push_back(tag);
    if (q < p) out.runs_at_prev.push_back(tag);
  }
  out.at_p = pooled_ratio(sums, sizes, p + 1);
  out.at_prev = p == 0 ? 0.0 : pooled_ratio(sums, sizes, p);
  return out;
}

NestedEstimate nested_cpf_estimate(const Problem& problem, Level level, unsigned p,
                                   std::size_t n0, std::uint64_t seed, bool antithetic) {
  check_nested(problem, p, n0);
  if (level.value == 0) throw ConfigError("increment estimators need level >= 1");
  const FilterOptions options = problem.run_options();
  std::vector<PredictorSums> fine(p + 1), coarse(p + 1), anti(p + 1);
  std::vector<std::size_t> sizes(p + 1);
  NestedEstimate out;
  for (unsigned q = 0; q <= p; ++q) {
    const std::uint64_t tag = split_seed(seed, q);
    Rng rng = make_rng(tag);
    sizes[q] = run_size(n0, q);
    const CpfRun run =
        antithetic ? cpf_run(*problem.model, level, sizes[q], *problem.data, options, rng)
                   : cpf2_run(*problem.model, level, sizes[q], *problem.data, options, rng);
    const CoupledEnsemble& snap = run.at(problem.time);
    fine[q] = predictor_sums(snap.fine, problem.phi);
    coarse[q] = predictor_sums(snap.coarse, problem.phi);
    if (antithetic) anti[q] = predictor_sums(snap.anti, problem.phi);
    out.cost += run.cost;
    out.runs_at_p.push_back(tag);
    if (q < p) out.runs_at_prev.push_back(tag);
  }
  auto increment = [&](std::size_t upto) {
    const double f = pooled_ratio(fine, sizes, upto);
    const double c = pooled_ratio(coarse, sizes, upto);
    if (!antithetic) return f - c;
    const double a = pooled_ratio(anti, sizes, upto);
    return 0.5 * f + 0.5 * a - c;
  };
  out.at_p = increment(p + 1);
  out.at_prev = p == 0 ? 0.0 : increment(p);
  return out;
}

IncrementRecord xi_term(const Problem& problem, const RandomizationConfig& config,
                        unsigned level, unsigned p, std::uint64_t seed) {
  const double prob_p = config.p_pmf(p);
  if (config.level_pmf(level) <= 0.0) throw ConfigError("level outside the pmf support");
  if (prob_p <= 0.0) throw ConfigError("p outside the pmf support");
  const NestedEstimate nested =
      level == config.base_level
          ? nested_pf_estimate(problem, Level{level}, p, config.n0, seed)
          : nested_cpf_estimate(problem, Level{level}, p, config.n0, seed, config.antithetic);
  IncrementRecord record;
  record.level = level;
  record.p = p;
  record.xi = (nested.at_p - nested.at_prev) / prob_p;
  record.cost = nested.cost;
  record.seed_tag = seed;
  return record;
}

double UnbiasedResult::reconstruct(std::span<const IncrementRecord> records,
                                   const RandomizationConfig& config) {
  if (records.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& r : records) acc += r.xi / config.level_pmf(r.level);
  return acc / static_cast<double>(records.size());
}

UnbiasedResult unbiased_estimate(const Problem& problem, const RandomizationConfig& config,
                                 std::size_t parallel_width) {
  problem.validate();
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  UnbiasedResult result;
  result.records.resize(config.replicates);
  parallel_for(config.replicates, parallel_width, [&](std::size_t i) {
    const std::uint64_t replicate_seed = split_seed(config.seed, i);
    Rng draw = make_rng(split_seed(replicate_seed, 0));
    const unsigned level = config.level_pmf.sample(draw);
    const unsigned p = config.p_pmf.sample(draw);
    IncrementRecord record =
        xi_term(problem, config, level, p, split_seed(replicate_seed, 1));
    record.index = i;
    record.seed_tag = replicate_seed;
    result.records[i] = record;
  });

  result.estimate = UnbiasedResult::reconstruct(result.records, config);
  double ss = 0.0;
  for (const auto& r : result.records) {
    const double v = r.xi / config.level_pmf(r.level) - result.estimate;
    ss += v * v;
    result.total_cost += r.cost;
  }
  const auto m = static_cast<double>(result.records.size());
  result.std_error = m > 1 ? std::sqrt(ss / (m - 1.0) / m) : 0.0;
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

// ---------------------------------------------------------------------------
// Telescoping multilevel estimator

std::vector<std::size_t> amlpf_allocation(unsigned base_level, unsigned max_level,
                                          double epsilon, double c, std::size_t n_min) {
  if (max_level < base_level) throw ConfigError("max level below base level");
  if (!(epsilon > 0.0) || !(c > 0.0)) throw ConfigError("epsilon and c must be positive");
  const double levels = static_cast<double>(max_level - base_level + 1);
  std::vector<std::size_t> n;
  for (unsigned l = base_level; l <= max_level; ++l) {
    const double v = std::ceil(c * levels * std::exp2(-static_cast<double>(l)) /
                               (epsilon * epsilon));
    n.push_back(std::max(n_min, static_cast<std::size_t>(v)));
  }
  return n;
}

TelescopingResult amlpf_estimate(const Problem& problem, unsigned base_level,
                                 unsigned max_level, std::span<const std::size_t> samples,
                                 std::uint64_t seed, bool antithetic) {
  problem.validate();
  if (max_level < base_level) throw ConfigError("max level below base level");
  if (samples.size() != max_level - base_level + 1)
    throw ConfigError("need one sample size per level");
  const FilterOptions options = problem.run_options();
  TelescopingResult out;
  {
    Rng rng = make_rng(split_seed(seed, base_level));
    const PfRun run =
        pf_run(*problem.model, Level{base_level}, samples[0], *problem.data, options, rng);
    out.terms.push_back(pf_estimate(run.at(problem.time), problem.phi));
    out.cost += run.cost;
  }
  for (unsigned l = base_level + 1; l <= max_level; ++l) {
    Rng rng = make_rng(split_seed(seed, l));
    const std::size_t n = samples[l - base_level];
    const CpfRun run =
        antithetic ? cpf_run(*problem.model, Level{l}, n, *problem.data, options, rng)
                   : cpf2_run(*problem.model, Level{l}, n, *problem.data, options, rng);
    out.terms.push_back(cpf_increment_estimate(run.at(problem.time), problem.phi));
    out.cost += run.cost;
  }
  out.estimate = std::accumulate(out.terms.begin(), out.terms.end(), 0.0);
  return out;
}

// ---------------------------------------------------------------------------
// Variance probe

ProbeRow variance_probe(const Problem& problem, unsigned base_level, unsigned level,
                        unsigned p, std::size_t n0, std::size_t reps, bool antithetic,
                        double reference, std::uint64_t seed, std::size_t parallel_width) {
  if (reps < 50) throw ConfigError("variance probe needs at least 50 repetitions");
  if (level < base_level) throw ConfigError("probe level below base level");
  std::vector<double> values(reps);
  parallel_for(reps, parallel_width, [&](std::size_t r) {
    const std::uint64_t s = split_seed(seed, r);
    values[r] = level == base_level
                    ? nested_pf_estimate(problem, Level{level}, p, n0, s).at_p
                    : nested_cpf_estimate(problem, Level{level}, p, n0, s, antithetic).at_p;
  });
  ProbeRow row;
  row.level = level;
  row.p = p;
  row.n_p = n0 << p;
  row.reps = reps;
  const double m = static_cast<double>(reps);
  row.mean = std::accumulate(values.begin(), values.end(), 0.0) / m;
  double var = 0.0;
  double sm = 0.0;
  double sm2 = 0.0;
  for (double v : values) {
    var += (v - row.mean) * (v - row.mean);
    const double sq = (v - reference) * (v - reference);
    sm += sq;
    sm2 += sq * sq;
  }
  row.variance = var / (m - 1.0);
  row.second_moment = sm / m;
  const double sm_var = std::max(0.0, sm2 / m - row.second_moment * row.second_moment);
  row.second_moment_stderr = std::sqrt(sm_var / (m - 1.0));
  return row;
}

Slope fit_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("slope fit needs >= 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw ConfigError("slope fit: x values are constant");
  Slope s;
  s.slope = sxy / sxx;
  s.intercept = my - s.slope * mx;
  if (x.size() > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - s.intercept - s.slope * x[i];
      rss += r * r;
    }
    s.std_error = std::sqrt(rss / (n - 2.0) / sxx);
  }
  return s;
}

}  // namespace ubpf
