// Command-line front end: simulate-data, oracle, run, sweep, rates,
// variance-probe. Exit codes: 0 ok, 2 configuration error, 3 numerical failure.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ubpf/errors.hpp"
#include "ubpf/harness.hpp"

namespace {

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> assignments;
  std::string output_dir;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("-c,--config", opts.config_file, "JSON experiment config")
      ->check(CLI::ExistingFile);
  cmd->add_option("-s,--set", opts.assignments, "Override a config key: a.b=value");
  cmd->add_option("-o,--output-dir", opts.output_dir, "Output directory");
}

ubpf::ExperimentConfig build_config(const CommonOptions& opts) {
  ubpf::ExperimentConfig config = opts.config_file.empty()
                                      ? ubpf::ExperimentConfig()
                                      : ubpf::ExperimentConfig::load(opts.config_file);
  for (const auto& a : opts.assignments) config.set(a);
  if (!opts.output_dir.empty()) config.json()["output_dir"] = opts.output_dir;
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unbiased multilevel particle filter estimators"};
  app.require_subcommand(1);

  CommonOptions opts;
  auto* simulate = app.add_subcommand("simulate-data", "Simulate a dataset from the model");
  auto* oracle = app.add_subcommand("oracle", "Compute and cache the reference value");
  auto* run = app.add_subcommand("run", "Run one estimator at accuracy epsilon");
  auto* sweep = app.add_subcommand("sweep", "MSE and cost over an epsilon grid");
  auto* probe = app.add_subcommand("variance-probe", "Second moments of level increments");
  for (auto* cmd : {simulate, oracle, run, sweep, probe}) add_common(cmd, opts);
  bool print_config = false;
  run->add_flag("--print-config", print_config, "Print the resolved config and exit");

  std::vector<std::string> sweep_files;
  auto* rates = app.add_subcommand("rates", "Fit log(cost) against log(MSE)");
  rates->add_option("files", sweep_files, "sweep.csv files")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*rates) {
      std::vector<std::filesystem::path> paths(sweep_files.begin(), sweep_files.end());
      ubpf::cmd_rates(paths, std::cout);
      return 0;
    }
    const ubpf::ExperimentConfig config = build_config(opts);
    if (*simulate) {
      const auto data = ubpf::cmd_simulate_data(config);
      auto path = config.dataset_path();
      if (path.empty()) path = config.output_dir() / "dataset.csv";
      std::cout << "wrote " << data.size() << " observations to " << path.string() << '\n';
    } else if (*oracle) {
      std::cout << ubpf::cmd_oracle(config).dump(2) << '\n';
    } else if (*run) {
      if (print_config) {
        std::cout << config.json().dump(2) << '\n';
        return 0;
      }
      auto summary = ubpf::cmd_run(config);
      summary.erase("config");
      std::cout << summary.dump(2) << '\n';
    } else if (*sweep) {
      const auto rows = ubpf::cmd_sweep(config);
      std::cout << "method,epsilon,mse,cost,walltime,reps\n";
      for (const auto& r : rows)
        std::cout << ubpf::to_string(r.method) << ',' << r.epsilon << ',' << r.mse << ','
                  << r.cost << ',' << r.wall_seconds << ',' << r.reps << '\n';
    } else if (*probe) {
      std::cout << ubpf::cmd_variance_probe(config).dump(2) << '\n';
    }
  } catch (const ubpf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ubpf::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
