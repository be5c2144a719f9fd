#include "ubpf/filters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ubpf/errors.hpp"
#include "ubpf/resampling.hpp"

namespace ubpf {

void ResamplePolicy::validate() const {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw ConfigError("resampling threshold must lie in (0, 1]");
}

bool ResamplePolicy::should_resample(double min_ess, std::size_t n) const noexcept {
  if (mode == Mode::always) return true;
  return min_ess < threshold * static_cast<double>(n);
}

std::vector<double> Cloud::weights(std::size_t time, const std::string& tag) const {
  std::vector<double> lw(size());
  for (std::size_t i = 0; i < lw.size(); ++i) lw[i] = log_carry[i] + log_lik[i];
  return normalize_log_weights(lw, time, tag);
}

PredictorSums predictor_sums(const Cloud& cloud, const TestFunction& phi) {
  PredictorSums sums;
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cloud.size(); ++i)
    top = std::max(top, cloud.log_carry[i] + cloud.log_lik[i]);
  if (!std::isfinite(top)) throw WeightCollapse(0, "predictor");
  sums.log_scale = top;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double g = std::exp(cloud.log_carry[i] + cloud.log_lik[i] - top);
    sums.g += g;
    sums.g_phi += g * phi(cloud.particle(i));
  }
  return sums;
}

double cloud_estimate(const Cloud& cloud, const TestFunction& phi) {
  // Ratio of unnormalized sums: exactly 1 for φ ≡ 1.
  const auto sums = predictor_sums(cloud, phi);
  return sums.g_phi / sums.g;
}

const Ensemble& PfRun::at(std::size_t time) const {
  for (const auto& s : snapshots)
    if (s.time == time) return s;
  throw ConfigError("no snapshot recorded at time " + std::to_string(time));
}

const CoupledEnsemble& CpfRun::at(std::size_t time) const {
  for (const auto& s : snapshots)
    if (s.time == time) return s;
  throw ConfigError("no snapshot recorded at time " + std::to_string(time));
}

namespace {

std::size_t check_inputs(const StateSpaceModel& model, std::size_t n, const Dataset& data,
                         const FilterOptions& options) {
  if (n == 0) throw ConfigError("particle count must be positive");
  if (data.size() == 0) throw ConfigError("dataset is empty");
  if (data.obs_dim != model.obs_dim())
    throw ConfigError("dataset observation dimension does not match the model");
  options.policy.validate();
  const std::size_t horizon = options.horizon == 0 ? data.size() : options.horizon;
  if (horizon > data.size())
    throw ConfigError("horizon " + std::to_string(horizon) + " exceeds dataset length " +
                      std::to_string(data.size()));
  return horizon;
}

Cloud initial_cloud(const StateSpaceModel& model, std::size_t n) {
  Cloud c;
  c.dim = model.dim();
  c.x.resize(n * c.dim);
  for (std::size_t i = 0; i < n; ++i)
    std::copy(model.x0().begin(), model.x0().end(), c.x.begin() + i * c.dim);
  c.log_carry.assign(n, -std::log(static_cast<double>(n)));
  c.log_lik.assign(n, 0.0);
  return c;
}

std::span<double> particle(Cloud& c, std::size_t i) { return {c.x.data() + i * c.dim, c.dim}; }

void weigh(const StateSpaceModel& model, Cloud& c, std::span<const double> y) {
  for (std::size_t i = 0; i < c.size(); ++i)
    c.log_lik[i] = model.obs_log_density(c.particle(i), y);
}

void gather(Cloud& c, std::span<const std::size_t> ancestors) {
  std::vector<double> x(c.x.size());
  for (std::size_t i = 0; i < ancestors.size(); ++i)
    std::copy_n(c.x.begin() + ancestors[i] * c.dim, c.dim, x.begin() + i * c.dim);
  c.x = std::move(x);
  c.log_carry.assign(c.size(), -std::log(static_cast<double>(c.size())));
}

void carry(Cloud& c, std::span<const double> w) {
  for (std::size_t i = 0; i < w.size(); ++i) c.log_carry[i] = std::log(w[i]);
}

double weighted_mean(const Cloud& c, std::span<const double> w, const TestFunction& phi) {
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * phi(c.particle(i));
  return acc;
}

}  // namespace

PfRun pf_run(const StateSpaceModel& model, Level level, std::size_t n, const Dataset& data,
             const FilterOptions& options, Rng& rng) {
  const std::size_t horizon = check_inputs(model, n, data, options);
  PfRun run;
  CostMeter cost;
  Cloud cloud = initial_cloud(model, n);
  for (std::size_t i = 0; i < n; ++i)
    propagate_single(model, level, particle(cloud, i), rng, cost, options.kernel);

  for (std::size_t t = 1; t <= horizon; ++t) {
    weigh(model, cloud, data.y(t));
    const auto w = cloud.weights(t, "single");
    const double e = ess(w);
    const bool last = t == horizon;
    const bool resample = !last && options.policy.should_resample(e, n);

    if (options.keep_all || last) run.snapshots.push_back(Ensemble{level, t, cloud});
    if (options.trace)
      options.trace(TraceRow{t, e, 0.0, 0.0, resample, weighted_mean(cloud, w, options.trace_phi)});
    if (last) break;

    if (resample) {
      gather(cloud, multinomial_resample(w, rng));
      ++run.resample_count;
    } else {
      carry(cloud, w);
    }
    for (std::size_t i = 0; i < n; ++i)
      propagate_single(model, level, particle(cloud, i), rng, cost, options.kernel);
  }
  run.cost = cost.steps();
  return run;
}

double pf_estimate(const Ensemble& ensemble, const TestFunction& phi) {
  return cloud_estimate(ensemble.cloud, phi);
}

namespace {

CpfRun coupled_run(const StateSpaceModel& model, Level level, std::size_t n,
                   const Dataset& data, const FilterOptions& options, Rng& rng,
                   bool antithetic) {
  if (level.value == 0) throw ConfigError("coupled particle filter needs level >= 1");
  const std::size_t horizon = check_inputs(model, n, data, options);
  CpfRun run;
  CostMeter cost;
  Cloud fine = initial_cloud(model, n);
  Cloud coarse = initial_cloud(model, n);
  Cloud anti = antithetic ? initial_cloud(model, n) : Cloud{model.dim(), {}, {}, {}};

  auto propagate = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      if (antithetic)
        propagate_antithetic(model, level, particle(fine, i), particle(coarse, i),
                             particle(anti, i), rng, cost, options.kernel);
      else
        propagate_pair(model, level, particle(fine, i), particle(coarse, i), rng, cost,
                       options.kernel);
    }
  };
  propagate();

  for (std::size_t t = 1; t <= horizon; ++t) {
    const auto y = data.y(t);
    weigh(model, fine, y);
    weigh(model, coarse, y);
    if (antithetic) weigh(model, anti, y);
    const auto wf = fine.weights(t, "fine");
    const auto wc = coarse.weights(t, "coarse");
    const auto wa = antithetic ? anti.weights(t, "antithetic") : std::vector<double>{};
    const double ef = ess(wf);
    const double ec = ess(wc);
    const double ea = antithetic ? ess(wa) : 0.0;
    const double min_ess = antithetic ? std::min({ef, ec, ea}) : std::min(ef, ec);
    const bool last = t == horizon;
    const bool resample = !last && options.policy.should_resample(min_ess, n);

    if (options.keep_all || last)
      run.snapshots.push_back(CoupledEnsemble{level, t, antithetic, fine, coarse, anti});
    if (options.trace) {
      const double f = weighted_mean(fine, wf, options.trace_phi);
      const double c = weighted_mean(coarse, wc, options.trace_phi);
      const double a = antithetic ? weighted_mean(anti, wa, options.trace_phi) : f;
      options.trace(TraceRow{t, ef, ec, ea, resample, 0.5 * (f + a) - c});
    }
    if (last) break;

    if (resample) {
      if (antithetic) {
        const auto idx = coupled_resample3(wf, wc, wa, rng);
        gather(fine, idx.a1);
        gather(coarse, idx.a2);
        gather(anti, idx.a3);
      } else {
        const auto idx = coupled_resample2(wf, wc, rng);
        gather(fine, idx.a1);
        gather(coarse, idx.a2);
      }
      ++run.resample_count;
    } else {
      carry(fine, wf);
      carry(coarse, wc);
      if (antithetic) carry(anti, wa);
    }
    propagate();
  }
  run.cost = cost.steps();
  return run;
}

}  // namespace

CpfRun cpf_run(const StateSpaceModel& model, Level level, std::size_t n, const Dataset& data,
               const FilterOptions& options, Rng& rng) {
  return coupled_run(model, level, n, data, options, rng, true);
}

CpfRun cpf2_run(const StateSpaceModel& model, Level level, std::size_t n, const Dataset& data,
                const FilterOptions& options, Rng& rng) {
  return coupled_run(model, level, n, data, options, rng, false);
}

double cpf_increment_estimate(const CoupledEnsemble& ensemble, const TestFunction& phi) {
  const double f = cloud_estimate(ensemble.fine, phi);
  const double c = cloud_estimate(ensemble.coarse, phi);
  if (!ensemble.antithetic) return f - c;
  const double a = cloud_estimate(ensemble.anti, phi);
  return 0.5 * (f + a) - c;
}

}  // namespace ubpf
