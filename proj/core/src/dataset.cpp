#include "ubpf/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "ubpf/errors.hpp"
#include "ubpf/rng.hpp"

namespace ubpf {

Dataset simulate_dataset(const StateSpaceModel& model, std::size_t n, Level data_level,
                         std::uint64_t seed, CorrectionMode mode) {
  if (n == 0) throw ConfigError("dataset needs at least one observation");
  if (data_level.value < 6) throw ConfigError("data level must be at least 6");
  Rng rng = make_rng(seed);
  Dataset data;
  data.obs_dim = model.obs_dim();
  data.state_dim = model.dim();
  data.observations.resize(n * data.obs_dim);
  data.latent.resize(n * data.state_dim);
  data.meta.model_id = std::string(model.name());
  data.meta.model_params = model.params();
  data.meta.data_level = data_level.value;
  data.meta.seed = seed;

  std::vector<double> x(model.x0().begin(), model.x0().end());
  for (std::size_t k = 1; k <= n; ++k) {
    const NoiseGrid grid = draw_noise(data_level, model.dim(), rng);
    run_single(model, x, grid, mode);
    std::span<double> y{data.observations.data() + (k - 1) * data.obs_dim, data.obs_dim};
    model.sample_obs(x, rng, y);
    for (double v : y)
      if (!std::isfinite(v))
        throw NumericalError("non-finite observation at time " + std::to_string(k));
    std::copy(x.begin(), x.end(), data.latent.begin() + (k - 1) * data.state_dim);
  }
  return data;
}

std::filesystem::path metadata_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_filename(csv_path.stem().string() + ".meta.json");
  return p;
}

nlohmann::json to_json(const DatasetMetadata& meta) {
  return {{"model", meta.model_id},
          {"params", meta.model_params},
          {"data_level", meta.data_level},
          {"seed", meta.seed}};
}

DatasetMetadata metadata_from_json(const nlohmann::json& j) {
  DatasetMetadata meta;
  meta.model_id = j.value("model", std::string{});
  meta.model_params = j.value("params", nlohmann::json::object());
  meta.data_level = j.value("data_level", 10u);
  meta.seed = j.value("seed", std::uint64_t{0});
  return meta;
}

void write_dataset(const Dataset& data, const std::filesystem::path& csv_path) {
  if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
  std::ofstream out(csv_path);
  if (!out) throw ConfigError("cannot write " + csv_path.string());
  out.precision(17);
  out << "k";
  for (std::size_t j = 0; j < data.obs_dim; ++j) out << ",y" << j + 1;
  for (std::size_t j = 0; j < data.state_dim && data.has_latent(); ++j) out << ",x" << j + 1;
  out << '\n';
  for (std::size_t k = 1; k <= data.size(); ++k) {
    out << k;
    for (double v : data.y(k)) out << ',' << v;
    if (data.has_latent())
      for (double v : data.x(k)) out << ',' << v;
    out << '\n';
  }
  std::ofstream meta(metadata_path(csv_path));
  meta << to_json(data.meta).dump(2) << '\n';
}

Dataset read_dataset(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw ConfigError("cannot read dataset " + csv_path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty dataset " + csv_path.string());
  Dataset data;
  data.obs_dim = 0;
  data.state_dim = 0;
  {
    std::stringstream header(line);
    std::string col;
    std::getline(header, col, ',');
    if (col != "k") throw ConfigError("dataset header must start with k");
    while (std::getline(header, col, ',')) {
      if (!col.empty() && col.front() == 'y')
        ++data.obs_dim;
      else if (!col.empty() && col.front() == 'x')
        ++data.state_dim;
      else
        throw ConfigError("unexpected dataset column '" + col + "'");
    }
  }
  if (data.obs_dim == 0) throw ConfigError("dataset has no observation columns");
  std::size_t expected = 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');
    if (std::stoul(cell) != expected)
      throw ConfigError("dataset rows must be numbered 1, 2, ...");
    ++expected;
    std::size_t cols = 0;
    while (std::getline(row, cell, ',')) {
      const double v = std::stod(cell);
      if (cols < data.obs_dim)
        data.observations.push_back(v);
      else
        data.latent.push_back(v);
      ++cols;
    }
    if (cols != data.obs_dim + data.state_dim)
      throw ConfigError("dataset row " + std::to_string(expected - 1) + " has wrong width");
  }
  if (data.observations.empty()) throw ConfigError("dataset has no rows");
  const auto meta_file = metadata_path(csv_path);
  if (std::filesystem::exists(meta_file)) {
    std::ifstream meta(meta_file);
    data.meta = metadata_from_json(nlohmann::json::parse(meta));
  }
  return data;
}

std::uint64_t dataset_hash(const Dataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::uint64_t dims = data.obs_dim;
  mix(&dims, sizeof dims);
  mix(data.observations.data(), data.observations.size() * sizeof(double));
  return h;
}

}  // namespace ubpf
