#include "ubpf/oracles.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ubpf/errors.hpp"
#include "ubpf/parallel.hpp"
#include "ubpf/resampling.hpp"

namespace ubpf {

double GbmFilterMoments::filter_mean(std::size_t k) const {
  const KalmanState& s = states.at(k - 1);
  return std::exp(s.mean + 0.5 * s.variance);
}

KalmanState gbm_kalman_step(const GbmModel& model, const KalmanState& previous, double y) {
  const double sigma2 = model.sigma() * model.sigma();
  KalmanState next;
  next.pred_mean = previous.mean + model.mu() - 0.5 * sigma2;
  next.pred_variance = previous.variance + sigma2;
  const double gain = next.pred_variance / (next.pred_variance + model.tau2());
  next.mean = next.pred_mean + gain * (y - next.pred_mean);
  next.variance = (1.0 - gain) * next.pred_variance;
  return next;
}

GbmFilterMoments gbm_exact_filter(const GbmModel& model, std::span<const double> observations) {
  if (!(model.initial() > 0.0)) throw ConfigError("GBM filter needs x0 > 0");
  GbmFilterMoments out;
  KalmanState state;
  state.mean = std::log(model.initial());
  for (double y : observations) {
    state = gbm_kalman_step(model, state, y);
    out.states.push_back(state);
  }
  return out;
}

GbmFilterMoments gbm_exact_filter(const GbmModel& model, const Dataset& data) {
  if (data.obs_dim != 1) throw ConfigError("GBM data must be scalar");
  return gbm_exact_filter(model, data.observations);
}

std::array<double, 2> gbm_moments(const GbmModel& model, double t) {
  const double x0 = model.initial();
  const double s2 = model.sigma() * model.sigma();
  const double mean = x0 * std::exp(model.mu() * t);
  return {mean, mean * mean * std::expm1(s2 * t)};
}

ReferenceEstimate reference_pf(const StateSpaceModel& model, const Dataset& data,
                               std::size_t time, const TestFunction& phi,
                               const ReferenceSettings& settings) {
  if (settings.repetitions == 0 || settings.particles == 0)
    throw ConfigError("reference PF needs particles and repetitions");
  if (time == 0 || time > data.size()) throw ConfigError("reference time out of range");
  FilterOptions options = settings.filter;
  options.horizon = time;
  options.keep_all = false;
  options.trace = nullptr;
  ReferenceEstimate out;
  out.repetitions.resize(settings.repetitions);
  parallel_for(settings.repetitions, settings.parallel_width, [&](std::size_t r) {
    Rng rng = make_rng(split_seed(settings.seed, r));
    const PfRun run = pf_run(model, Level{settings.level}, settings.particles, data, options, rng);
    out.repetitions[r] = pf_estimate(run.at(time), phi);
  }, "reference repetition");
  const double n = static_cast<double>(settings.repetitions);
  out.mean = std::accumulate(out.repetitions.begin(), out.repetitions.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : out.repetitions) ss += (v - out.mean) * (v - out.mean);
  out.std_error = settings.repetitions > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return out;
}

std::map<std::array<std::size_t, 3>, double> enumerate_coupled_resampling(
    std::span<const double> w1, std::span<const double> w2, std::span<const double> w3) {
  const std::size_t n = w1.size();
  if (n == 0 || n > 4 || w2.size() != n || w3.size() != n)
    throw ConfigError("enumeration needs three weight vectors of equal size N <= 4");
  std::vector<double> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = std::min({w1[i], w2[i], w3[i]});
  const double alpha = std::accumulate(m.begin(), m.end(), 0.0);
  const double rest = 1.0 - alpha;
  auto residual = [&](std::span<const double> w, std::size_t i) {
    return rest < 1e-12 ? w[i] : (w[i] - m[i]) / rest;
  };
  std::map<std::array<std::size_t, 3>, double> joint;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) {
        double p = rest * residual(w1, i) * residual(w2, j) * residual(w3, k);
        if (i == j && j == k) p += m[i];
        if (p > 0.0) joint[{i, j, k}] = p;
      }
  return joint;
}

std::vector<double> joint_marginal(const std::map<std::array<std::size_t, 3>, double>& joint,
                                   std::size_t m, std::size_t n) {
  if (m > 2) throw ConfigError("marginal index must be 0, 1 or 2");
  std::vector<double> out(n, 0.0);
  for (const auto& [key, p] : joint) out.at(key[m]) += p;
  return out;
}

OracleCache::OracleCache(std::filesystem::path directory) : directory_(std::move(directory)) {}

std::string OracleCache::key(const StateSpaceModel& model, const Dataset& data,
                             std::size_t time, const TestFunction& phi,
                             const ReferenceSettings& settings) {
  std::ostringstream os;
  os << "model=" << model.name() << ";params=" << model.params().dump()
     << ";data=" << std::hex << dataset_hash(data) << std::dec << ";n=" << data.size()
     << ";time=" << time << ";phi=" << phi.tag() << ";level=" << settings.level
     << ";particles=" << settings.particles << ";reps=" << settings.repetitions
     << ";seed=" << settings.seed
     << ";resample=" << (settings.filter.policy.mode == ResamplePolicy::Mode::always
                             ? "always"
                             : "adaptive")
     << ':' << settings.filter.policy.threshold
     << ";literal=" << (settings.filter.kernel.mode == CorrectionMode::literal);
  return os.str();
}

namespace {

std::string file_name(const std::string& key) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "ref-%016llx.json", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::optional<ReferenceEstimate> OracleCache::load(const std::string& key) const {
  const auto path = directory_ / file_name(key);
  if (!std::filesystem::exists(path)) return std::nullopt;
  std::ifstream in(path);
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || j.value("key", std::string{}) != key) return std::nullopt;
  ReferenceEstimate out;
  out.mean = j.at("mean").get<double>();
  out.std_error = j.at("std_error").get<double>();
  out.repetitions = j.at("repetitions").get<std::vector<double>>();
  return out;
}

void OracleCache::store(const std::string& key, const ReferenceEstimate& value) const {
  std::filesystem::create_directories(directory_);
  const auto path = directory_ / file_name(key);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw ConfigError("cannot write oracle cache " + tmp);
    nlohmann::json j = {{"key", key},
                        {"mean", value.mean},
                        {"std_error", value.std_error},
                        {"repetitions", value.repetitions}};
    out << j.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace ubpf
