#include "ubpf/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "ubpf/errors.hpp"
#include "ubpf/parallel.hpp"

namespace ubpf {

namespace {

using Json = nlohmann::json;

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void merge_into(Json& base, const Json& patch, const std::string& where) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string path = where.empty() ? it.key() : where + "." + it.key();
    if (where.empty() && !base.contains(it.key()))
      throw ConfigError("unknown configuration key '" + path + "'");
    auto& slot = base[it.key()];
    if (slot.is_object() && it->is_object() && it.key() != "model")
      merge_into(slot, *it, path);
    else
      slot = *it;
  }
}

std::string hash_of(Json j, std::initializer_list<const char*> dropped) {
  for (const char* key : dropped) j.erase(key);
  return hex64(fnv1a(j.dump()));
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

std::size_t observation_time(const ExperimentConfig& config, const Dataset& data) {
  const auto t = config.json().at("time").get<std::size_t>();
  return t == 0 ? data.size() : t;
}

Problem make_problem(const ExperimentConfig& config, const StateSpaceModel& model,
                     const Dataset& data) {
  Problem problem;
  problem.model = &model;
  problem.data = &data;
  problem.time = observation_time(config, data);
  problem.phi = config.phi();
  problem.filter = config.filter_options();
  problem.validate();
  return problem;
}

unsigned single_level(double epsilon) {
  const auto needed = static_cast<unsigned>(std::ceil(std::log2(1.0 / epsilon) - 1e-12));
  return std::max(2u, needed);
}

Dataset load_or_simulate(const ExperimentConfig& config, const StateSpaceModel& model) {
  const auto& d = config.json().at("dataset");
  const auto path = config.dataset_path();
  if (!path.empty()) {
    if (!std::filesystem::exists(path))
      throw ConfigError("dataset " + path.string() + " does not exist");
    Dataset data = read_dataset(path);
    if (data.obs_dim != model.obs_dim())
      throw ConfigError("dataset observation dimension does not match the model");
    return data;
  }
  return simulate_dataset(model, d.at("n").get<std::size_t>(),
                          Level{d.at("data_level").get<unsigned>()},
                          d.at("seed").get<std::uint64_t>(),
                          config.json().at("literal_h").get<bool>() ? CorrectionMode::literal
                                                                    : CorrectionMode::kronecker);
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

Json config_echo(const ExperimentConfig& config) {
  Json j = config.json();
  for (const char* key : {"parallel_width", "output_dir", "trace"}) j.erase(key);
  return j;
}

/// Settings that select which rows a sweep contains are left out so a sweep
/// can be extended with more methods or accuracies.
std::string sweep_hash(const ExperimentConfig& config) {
  return hash_of(config.json(), {"parallel_width", "output_dir", "trace", "epsilons",
                                 "methods", "method", "epsilon", "probe"});
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

nlohmann::json default_experiment_json() {
  return Json{
      {"model", {{"id", "gbm"}}},
      {"dataset", {{"path", ""}, {"n", 100}, {"data_level", 10}, {"seed", 1}}},
      {"method", "ub-amlpf"},
      {"epsilon", 0.05},
      {"epsilons", {0.2, 0.1, 0.05, 0.025}},
      {"methods", {"ub-mlpf", "ub-amlpf", "amlpf"}},
      {"repetitions", 20},
      {"time", 0},
      {"phi", "x1"},
      {"resample", {{"mode", "adaptive"}, {"threshold", 0.5}}},
      {"randomization",
       {{"base_level", 0},
        {"max_level", nullptr},
        {"max_p", nullptr},
        {"n0", nullptr},
        {"replicates", nullptr},
        {"c_n", 1.0 / 64.0},
        {"c_m", 1.0},
        {"n0_min", 50},
        {"n0_cap", 1 << 14},
        {"level_shape", "geometric"}}},
      {"amlpf", {{"c", 1.0}, {"n_min", 10}}},
      {"pf", {{"c", 1.0}, {"n_min", 10}}},
      {"oracle",
       {{"level", 9}, {"particles", 100000}, {"repetitions", 20}, {"cache_dir", ""}}},
      {"probe",
       {{"levels", {1, 2, 3, 4, 5}},
        {"ps", {0, 1, 2, 3, 4}},
        {"n0", 50},
        {"reps", 100},
        {"reference_particles", 100000},
        {"reference_reps", 10}}},
      {"seed", 1},
      {"output_dir", "out"},
      {"parallel_width", 1},
      {"literal_h", false},
      {"trace", false},
  };
}

ExperimentConfig::ExperimentConfig() : json_(default_experiment_json()) {}

ExperimentConfig::ExperimentConfig(nlohmann::json overrides)
    : json_(default_experiment_json()) {
  if (!overrides.is_null()) {
    if (!overrides.is_object()) throw ConfigError("configuration must be a JSON object");
    merge_into(json_, overrides, "");
  }
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
  return ExperimentConfig(std::move(j));
}

void ExperimentConfig::set(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  Json* slot = &json_;
  std::size_t start = 0;
  bool top = true;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw ConfigError("malformed key '" + key + "'");
    if (top && !slot->contains(part)) throw ConfigError("unknown configuration key '" + key + "'");
    top = false;
    if (dot == std::string::npos) {
      (*slot)[part] = value;
      return;
    }
    slot = &(*slot)[part];
    if (!slot->is_object()) *slot = Json::object();
    start = dot + 1;
  }
}

std::string ExperimentConfig::hash() const {
  return hash_of(json_, {"parallel_width", "output_dir", "trace"});
}

std::filesystem::path ExperimentConfig::output_dir() const {
  return json_.at("output_dir").get<std::string>();
}

std::filesystem::path ExperimentConfig::dataset_path() const {
  return json_.at("dataset").at("path").get<std::string>();
}

std::uint64_t ExperimentConfig::seed() const { return json_.at("seed").get<std::uint64_t>(); }

std::size_t ExperimentConfig::parallel_width() const {
  return json_.at("parallel_width").get<std::size_t>();
}

Method ExperimentConfig::method() const {
  return parse_method(json_.at("method").get<std::string>());
}

TestFunction ExperimentConfig::phi() const {
  return TestFunction::parse(json_.at("phi").get<std::string>());
}

FilterOptions ExperimentConfig::filter_options() const {
  FilterOptions options;
  const auto& r = json_.at("resample");
  const auto mode = r.at("mode").get<std::string>();
  if (mode == "always")
    options.policy = ResamplePolicy::always();
  else if (mode == "adaptive")
    options.policy = ResamplePolicy::adaptive(r.at("threshold").get<double>());
  else
    throw ConfigError("resample.mode must be 'always' or 'adaptive'");
  options.policy.validate();
  options.kernel.mode =
      json_.at("literal_h").get<bool>() ? CorrectionMode::literal : CorrectionMode::kronecker;
  if (json_.at("trace").get<bool>()) {
    options.trace_phi = phi();
    options.trace = [](const TraceRow& row) {
      std::cerr << "trace k=" << row.time << " ess=" << row.ess_fine << ',' << row.ess_coarse
                << ',' << row.ess_anti << " resampled=" << row.resampled
                << " estimate=" << row.estimate << '\n';
    };
  }
  return options;
}

std::unique_ptr<StateSpaceModel> ExperimentConfig::model() const {
  return make_model(json_.at("model"));
}

RandomizationConfig ExperimentConfig::randomization(double epsilon, Method method) const {
  const auto& r = json_.at("randomization");
  DefaultConstants constants;
  constants.c_n = r.at("c_n").get<double>();
  constants.c_m = r.at("c_m").get<double>();
  constants.n0_min = r.at("n0_min").get<std::size_t>();
  constants.n0_cap = r.at("n0_cap").get<std::size_t>();
  constants.base_level = r.at("base_level").get<unsigned>();
  RandomizationConfig config = default_config(epsilon, method, constants);

  const auto shape_name = r.at("level_shape").get<std::string>();
  DiscretePmf::Shape shape;
  if (shape_name == "geometric")
    shape = DiscretePmf::Shape::geometric;
  else if (shape_name == "log-corrected")
    shape = DiscretePmf::Shape::log_corrected;
  else
    throw ConfigError("randomization.level_shape must be 'geometric' or 'log-corrected'");

  auto bound = [&](const char* key, unsigned fallback) -> std::optional<unsigned> {
    const auto& v = r.at(key);
    if (v.is_null()) return fallback;
    if (v.is_string() && v.get<std::string>() == "unbounded") return std::nullopt;
    return v.get<unsigned>();
  };
  const auto max_level = bound("max_level", config.max_level());
  const auto max_p = bound("max_p", config.max_p());
  config.level_pmf = DiscretePmf::make(shape, config.tau, constants.base_level, max_level);
  config.p_pmf = DiscretePmf::make(shape, 1.0, 0, max_p);
  config.n0 = get_or<std::size_t>(r, "n0", config.n0);
  config.replicates = get_or<std::size_t>(r, "replicates", config.replicates);
  config.seed = seed();
  config.validate();
  return config;
}

ReferenceSettings ExperimentConfig::oracle_settings() const {
  const auto& o = json_.at("oracle");
  ReferenceSettings s;
  s.level = o.at("level").get<unsigned>();
  s.particles = o.at("particles").get<std::size_t>();
  s.repetitions = o.at("repetitions").get<std::size_t>();
  s.parallel_width = parallel_width();
  s.filter = filter_options();
  s.filter.trace = nullptr;
  return s;
}

void ExperimentConfig::validate() const {
  auto model_ptr = model();
  const TestFunction f = phi();
  if (f.kind() == TestFunction::Kind::coordinate && f.index() >= model_ptr->dim())
    throw ConfigError("phi refers to a coordinate the model does not have");
  (void)method();
  filter_options();
  const double eps = json_.at("epsilon").get<double>();
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
  const auto eps_grid = json_.at("epsilons").get<std::vector<double>>();
  if (eps_grid.empty()) throw ConfigError("epsilons must not be empty");
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    if (!(eps_grid[i] > 0.0 && eps_grid[i] < 1.0))
      throw ConfigError("epsilons must lie in (0, 1)");
    if (i > 0 && !(eps_grid[i] < eps_grid[i - 1]))
      throw ConfigError("epsilons must be strictly decreasing");
  }
  for (const auto& m : json_.at("methods")) (void)parse_method(m.get<std::string>());
  if (json_.at("repetitions").get<long long>() < 1)
    throw ConfigError("repetitions must be at least 1");
  if (json_.at("parallel_width").get<long long>() < 1)
    throw ConfigError("parallel_width must be at least 1");
  if (json_.at("time").get<long long>() < 0) throw ConfigError("time must be >= 0");
  const auto& d = json_.at("dataset");
  if (d.at("n").get<long long>() < 1) throw ConfigError("dataset.n must be at least 1");
  if (d.at("data_level").get<long long>() < 6)
    throw ConfigError("dataset.data_level must be at least 6");
  for (const char* section : {"amlpf", "pf"}) {
    if (!(json_.at(section).at("c").get<double>() > 0.0))
      throw ConfigError(std::string(section) + ".c must be positive");
  }
  const auto& o = json_.at("oracle");
  if (o.at("particles").get<long long>() < 1 || o.at("repetitions").get<long long>() < 1)
    throw ConfigError("oracle particles and repetitions must be positive");
  (void)randomization(eps, Method::ub_amlpf);
}

// ---------------------------------------------------------------------------
// Estimation

RunSummary run_method(const ExperimentConfig& config, const StateSpaceModel& model,
                      const Dataset& data, Method method, double epsilon, std::uint64_t seed) {
  const Problem problem = make_problem(config, model, data);
  RunSummary summary;
  summary.method = method;
  const auto start = std::chrono::steady_clock::now();
  switch (method) {
    case Method::ub_mlpf:
    case Method::ub_amlpf: {
      RandomizationConfig rc = config.randomization(epsilon, method);
      rc.seed = seed;
      UnbiasedResult r = unbiased_estimate(problem, rc, config.parallel_width());
      summary.estimate = r.estimate;
      summary.std_error = r.std_error;
      summary.cost = r.total_cost;
      summary.records = std::move(r.records);
      break;
    }
    case Method::amlpf: {
      const auto& a = config.json().at("amlpf");
      const unsigned base = config.json().at("randomization").at("base_level").get<unsigned>();
      const unsigned top = std::max(base + 1, single_level(epsilon));
      const auto samples = amlpf_allocation(base, top, epsilon, a.at("c").get<double>(),
                                            a.at("n_min").get<std::size_t>());
      const TelescopingResult r = amlpf_estimate(problem, base, top, samples, seed, true);
      summary.estimate = r.estimate;
      summary.cost = r.cost;
      summary.records.push_back({0, top, 0, r.estimate, r.cost, seed});
      break;
    }
    case Method::pf: {
      const auto& p = config.json().at("pf");
      const unsigned level = single_level(epsilon);
      const auto n = std::max(
          p.at("n_min").get<std::size_t>(),
          static_cast<std::size_t>(std::ceil(p.at("c").get<double>() / (epsilon * epsilon))));
      Rng rng = make_rng(seed);
      const PfRun run = pf_run(model, Level{level}, n, data, problem.run_options(), rng);
      summary.estimate = pf_estimate(run.at(problem.time), problem.phi);
      summary.cost = run.cost;
      summary.records.push_back({0, level, 0, summary.estimate, run.cost, seed});
      break;
    }
  }
  summary.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return summary;
}

const std::vector<PublishedRates>& published_rates() {
  static const std::vector<PublishedRates> rates = {
      {"gbm", {-1.31, -1.1, -1.03}},
      {"clark-cameron", {-1.42, -1.16, -1.09}},
      {"nlm", {-1.44, -1.18, -1.1}},
  };
  return rates;
}

double oracle_value(const ExperimentConfig& config, const StateSpaceModel& model,
                    const Dataset& data, bool compute) {
  const std::size_t time = observation_time(config, data);
  const TestFunction f = config.phi();
  if (f.is_constant()) return f.constant_value();
  if (const auto* gbm = dynamic_cast<const GbmModel*>(&model); gbm && !f.clip()) {
    const auto moments = gbm_exact_filter(*gbm, data);
    return moments.filter_mean(time);
  }
  const ReferenceSettings settings = config.oracle_settings();
  auto dir = std::filesystem::path(config.json().at("oracle").at("cache_dir").get<std::string>());
  if (dir.empty()) dir = config.output_dir() / "oracle-cache";
  const OracleCache cache(dir);
  const std::string key = OracleCache::key(model, data, time, f, settings);
  if (auto hit = cache.load(key)) return hit->mean;
  if (!compute)
    throw ConfigError("no cached reference value; run the oracle subcommand first");
  const ReferenceEstimate ref = reference_pf(model, data, time, f, settings);
  cache.store(key, ref);
  return ref.mean;
}

// ---------------------------------------------------------------------------
// Subcommands

Dataset cmd_simulate_data(const ExperimentConfig& config) {
  config.validate();
  const auto model = config.model();
  ExperimentConfig simulate = config;
  simulate.json()["dataset"]["path"] = "";
  Dataset data = load_or_simulate(simulate, *model);
  auto path = config.dataset_path();
  if (path.empty()) path = config.output_dir() / "dataset.csv";
  write_dataset(data, path);
  return data;
}

nlohmann::json cmd_oracle(const ExperimentConfig& config) {
  config.validate();
  const auto model = config.model();
  const Dataset data = load_or_simulate(config, *model);
  std::filesystem::create_directories(config.output_dir());
  const std::size_t time = observation_time(config, data);
  Json out = {{"model", std::string(model->name())},
              {"time", time},
              {"phi", config.phi().tag()},
              {"dataset_hash", hex64(dataset_hash(data))}};
  const auto* gbm = dynamic_cast<const GbmModel*>(model.get());
  if (gbm && !config.phi().clip()) {
    out["source"] = "kalman";
    out["value"] = oracle_value(config, *model, data, true);
    out["std_error"] = 0.0;
  } else {
    out["source"] = "reference-pf";
    out["value"] = oracle_value(config, *model, data, true);
    const auto settings = config.oracle_settings();
    auto dir =
        std::filesystem::path(config.json().at("oracle").at("cache_dir").get<std::string>());
    if (dir.empty()) dir = config.output_dir() / "oracle-cache";
    const auto hit =
        OracleCache(dir).load(OracleCache::key(*model, data, time, config.phi(), settings));
    out["std_error"] = hit ? hit->std_error : 0.0;
    out["level"] = settings.level;
    out["particles"] = settings.particles;
    out["repetitions"] = settings.repetitions;
  }
  write_json(config.output_dir() / "oracle.json", out);
  return out;
}

nlohmann::json cmd_run(const ExperimentConfig& config) {
  config.validate();
  const auto model = config.model();
  const Dataset data = load_or_simulate(config, *model);
  const Method method = config.method();
  const double epsilon = config.json().at("epsilon").get<double>();
  const RunSummary run = run_method(config, *model, data, method, epsilon, config.seed());

  const auto dir = config.output_dir();
  std::filesystem::create_directories(dir);
  const std::string hash = config.hash();
  {
    std::ofstream out(dir / "records.csv");
    out << "# config_hash=" << hash << '\n' << "i,l,p,xi,cost,seed_tag\n";
    for (const auto& r : run.records)
      out << r.index << ',' << r.level << ',' << r.p << ',' << fmt(r.xi) << ',' << r.cost << ','
          << hex64(r.seed_tag) << '\n';
  }
  Json summary = {{"config_hash", hash},
                  {"method", std::string(to_string(method))},
                  {"epsilon", epsilon},
                  {"time", observation_time(config, data)},
                  {"phi", config.phi().tag()},
                  {"estimate", run.estimate},
                  {"stderr", run.std_error},
                  {"total_cost", run.cost},
                  {"records", run.records.size()},
                  {"config", config_echo(config)}};
  write_json(dir / "summary.json", summary);
  write_json(dir / "timing.json", {{"wall_seconds", run.wall_seconds},
                                   {"parallel_width", config.parallel_width()}});
  summary["wall_seconds"] = run.wall_seconds;
  return summary;
}

std::vector<SweepRow> read_sweep(const std::filesystem::path& path, std::string* hash) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read sweep " + path.string());
  std::vector<SweepRow> rows;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto pos = line.find("config_hash=");
      if (pos != std::string::npos && hash != nullptr) {
        std::istringstream is(line.substr(pos + 12));
        is >> *hash;
      }
      continue;
    }
    if (!header) {
      if (line.rfind("method,", 0) != 0) throw ConfigError("malformed sweep header");
      header = true;
      continue;
    }
    std::istringstream is(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(is, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw ConfigError("malformed sweep row '" + line + "'");
    SweepRow row;
    row.method = parse_method(cells[0]);
    row.epsilon = std::stod(cells[1]);
    row.mse = std::stod(cells[2]);
    row.cost = std::stod(cells[3]);
    row.wall_seconds = std::stod(cells[4]);
    row.reps = std::stoul(cells[5]);
    rows.push_back(row);
  }
  return rows;
}

std::vector<SweepRow> cmd_sweep(const ExperimentConfig& config) {
  config.validate();
  const auto model = config.model();
  const Dataset data = load_or_simulate(config, *model);
  const auto dir = config.output_dir();
  std::filesystem::create_directories(dir);
  const std::string hash = sweep_hash(config);
  const auto sweep_file = dir / "sweep.csv";
  const auto records_file = dir / "records.csv";

  std::vector<SweepRow> rows;
  if (std::filesystem::exists(sweep_file)) {
    std::string existing;
    rows = read_sweep(sweep_file, &existing);
    if (existing != hash)
      throw ConfigError("existing " + sweep_file.string() + " was produced by config " +
                        existing + ", not " + hash + "; use another output_dir");
  } else {
    std::ofstream out(sweep_file);
    out << "# config_hash=" << hash << " model=" << model->name() << '\n'
        << "method,epsilon,mse,cost,walltime,reps\n";
    std::ofstream rec(records_file);
    rec << "# config_hash=" << hash << '\n' << "method,epsilon,rep,i,l,p,xi,cost,seed_tag\n";
  }

  const double truth = oracle_value(config, *model, data, true);
  const auto eps_grid = config.json().at("epsilons").get<std::vector<double>>();
  const auto reps = config.json().at("repetitions").get<std::size_t>();

  for (const auto& name : config.json().at("methods")) {
    const Method method = parse_method(name.get<std::string>());
    for (std::size_t e = 0; e < eps_grid.size(); ++e) {
      const double eps = eps_grid[e];
      const bool done = std::any_of(rows.begin(), rows.end(), [&](const SweepRow& r) {
        return r.method == method && std::abs(r.epsilon - eps) <= 1e-12 * eps;
      });
      if (done) continue;
      SweepRow row;
      row.method = method;
      row.epsilon = eps;
      row.reps = reps;
      std::ofstream rec(records_file, std::ios::app);
      for (std::size_t r = 0; r < reps; ++r) {
        const std::uint64_t seed = split_seed(
            split_seed(split_seed(config.seed(), fnv1a(to_string(method))), e), r);
        const RunSummary run = run_method(config, *model, data, method, eps, seed);
        const double err = run.estimate - truth;
        row.mse += err * err;
        row.cost += static_cast<double>(run.cost);
        row.wall_seconds += run.wall_seconds;
        for (const auto& rc : run.records)
          rec << to_string(method) << ',' << fmt(eps) << ',' << r << ',' << rc.index << ','
              << rc.level << ',' << rc.p << ',' << fmt(rc.xi) << ',' << rc.cost << ','
              << hex64(rc.seed_tag) << '\n';
      }
      const double n = static_cast<double>(reps);
      row.mse /= n;
      row.cost /= n;
      row.wall_seconds /= n;
      std::ofstream out(sweep_file, std::ios::app);
      out << to_string(method) << ',' << fmt(eps) << ',' << fmt(row.mse) << ',' << fmt(row.cost)
          << ',' << fmt(row.wall_seconds) << ',' << reps << '\n';
      rows.push_back(row);
    }
  }
  write_sweep_svg(rows, dir / "sweep.svg");
  return rows;
}

std::vector<RateRow> fit_rates(std::span<const SweepRow> rows) {
  std::map<Method, std::pair<std::vector<double>, std::vector<double>>> series;
  for (const auto& r : rows) {
    if (!(r.mse > 0.0) || !(r.cost > 0.0)) continue;
    series[r.method].first.push_back(std::log(r.mse));
    series[r.method].second.push_back(std::log(r.cost));
  }
  std::vector<RateRow> out;
  for (const auto& [method, xy] : series) {
    if (xy.first.size() < 2) continue;
    RateRow row;
    row.method = method;
    row.fit = fit_slope(xy.first, xy.second);
    row.points = xy.first.size();
    out.push_back(row);
  }
  return out;
}

std::vector<RateRow> cmd_rates(const std::vector<std::filesystem::path>& sweep_files,
                               std::ostream& report) {
  if (sweep_files.empty()) throw ConfigError("rates needs at least one sweep file");
  std::vector<SweepRow> rows;
  std::string first_hash;
  std::string model;
  for (std::size_t i = 0; i < sweep_files.size(); ++i) {
    std::string hash;
    auto part = read_sweep(sweep_files[i], &hash);
    if (i == 0)
      first_hash = hash;
    else if (hash != first_hash)
      throw ConfigError("sweep files come from different configs (" + first_hash + " vs " +
                        hash + ")");
    rows.insert(rows.end(), part.begin(), part.end());
    std::ifstream in(sweep_files[i]);
    std::string line;
    std::getline(in, line);
    if (const auto pos = line.find("model="); pos != std::string::npos)
      model = line.substr(pos + 6);
  }
  const auto rates = fit_rates(rows);
  const PublishedRates* published = nullptr;
  for (const auto& p : published_rates())
    if (p.model == model) published = &p;

  report << "method     slope    stderr   points  published\n";
  for (const auto& r : rates) {
    double reference = std::nan("");
    if (published != nullptr) {
      if (r.method == Method::ub_mlpf) reference = published->rates[0];
      if (r.method == Method::ub_amlpf) reference = published->rates[1];
      if (r.method == Method::amlpf) reference = published->rates[2];
    }
    report << std::left << std::setw(10) << to_string(r.method) << std::right << std::fixed
           << std::setprecision(3) << std::setw(7) << r.fit.slope << std::setw(10)
           << r.fit.std_error << std::setw(9) << r.points;
    if (std::isnan(reference))
      report << "        -";
    else
      report << std::setw(11) << reference;
    report << '\n';
  }
  report << std::defaultfloat;
  return rates;
}

nlohmann::json cmd_variance_probe(const ExperimentConfig& config) {
  config.validate();
  const auto model = config.model();
  const Dataset data = load_or_simulate(config, *model);
  const Problem problem = make_problem(config, *model, data);
  const auto& pr = config.json().at("probe");
  const unsigned base = config.json().at("randomization").at("base_level").get<unsigned>();
  const bool antithetic = config.method() != Method::ub_mlpf;

  ExperimentConfig ref_config = config;
  ref_config.json()["oracle"]["particles"] = pr.at("reference_particles");
  ref_config.json()["oracle"]["repetitions"] = pr.at("reference_reps");
  const double truth = oracle_value(ref_config, *model, data, true);

  const auto n0 = pr.at("n0").get<std::size_t>();
  const auto reps = pr.at("reps").get<std::size_t>();
  Json rows = Json::array();
  const auto dir = config.output_dir();
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / "probe.csv");
  csv << "# config_hash=" << config.hash() << '\n'
      << "level,p,n_p,reps,mean,variance,second_moment,second_moment_stderr\n";
  std::uint64_t index = 0;
  for (const auto& l : pr.at("levels")) {
    for (const auto& p : pr.at("ps")) {
      const unsigned level = l.get<unsigned>();
      const double reference = level == base ? truth : 0.0;
      const ProbeRow row =
          variance_probe(problem, base, level, p.get<unsigned>(), n0, reps, antithetic,
                         reference, split_seed(config.seed(), index++),
                         config.parallel_width());
      csv << row.level << ',' << row.p << ',' << row.n_p << ',' << row.reps << ','
          << fmt(row.mean) << ',' << fmt(row.variance) << ',' << fmt(row.second_moment) << ','
          << fmt(row.second_moment_stderr) << '\n';
      rows.push_back({{"level", row.level},
                      {"p", row.p},
                      {"n_p", row.n_p},
                      {"reps", row.reps},
                      {"mean", row.mean},
                      {"variance", row.variance},
                      {"second_moment", row.second_moment},
                      {"second_moment_stderr", row.second_moment_stderr}});
    }
  }
  Json out = {{"reference", truth}, {"antithetic", antithetic}, {"rows", rows}};
  write_json(dir / "probe.json", out);
  return out;
}

void write_sweep_svg(std::span<const SweepRow> rows, const std::filesystem::path& path) {
  constexpr double kW = 640, kH = 480, kPad = 60;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& r : rows) {
    if (!(r.mse > 0.0) || !(r.cost > 0.0)) continue;
    x0 = std::min(x0, std::log10(r.mse));
    x1 = std::max(x1, std::log10(r.mse));
    y0 = std::min(y0, std::log10(r.cost));
    y1 = std::max(y1, std::log10(r.cost));
  }
  std::ofstream out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (x0 > x1) {
    out << "</svg>\n";
    return;
  }
  if (x1 - x0 < 1e-9) x1 = x0 + 1;
  if (y1 - y0 < 1e-9) y1 = y0 + 1;
  auto px = [&](double v) { return kPad + (v - x0) / (x1 - x0) * (kW - 2 * kPad); };
  auto py = [&](double v) { return kH - kPad - (v - y0) / (y1 - y0) * (kH - 2 * kPad); };
  out << "<line x1=\"" << kPad << "\" y1=\"" << kH - kPad << "\" x2=\"" << kW - kPad
      << "\" y2=\"" << kH - kPad << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << kPad << "\" y1=\"" << kPad << "\" x2=\"" << kPad << "\" y2=\""
      << kH - kPad << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 15
      << "\" text-anchor=\"middle\" font-size=\"13\">log10 MSE</text>\n"
      << "<text x=\"15\" y=\"" << kH / 2 << "\" transform=\"rotate(-90 15 " << kH / 2
      << ")\" text-anchor=\"middle\" font-size=\"13\">log10 cost</text>\n";
  const std::map<Method, const char*> colors = {{Method::pf, "#777777"},
                                                {Method::amlpf, "#1b9e77"},
                                                {Method::ub_mlpf, "#d95f02"},
                                                {Method::ub_amlpf, "#7570b3"}};
  int legend = 0;
  for (const auto& [method, color] : colors) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : rows)
      if (r.method == method && r.mse > 0.0 && r.cost > 0.0)
        pts.emplace_back(px(std::log10(r.mse)), py(std::log10(r.cost)));
    if (pts.empty()) continue;
    std::sort(pts.begin(), pts.end());
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (const auto& [x, y] : pts) out << x << ',' << y << ' ';
    out << "\"/>\n";
    for (const auto& [x, y] : pts)
      out << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"4\" fill=\"" << color
          << "\"/>\n";
    out << "<text x=\"" << kW - kPad - 90 << "\" y=\"" << kPad + 16 * legend++
        << "\" font-size=\"12\" fill=\"" << color << "\">" << to_string(method) << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace ubpf
