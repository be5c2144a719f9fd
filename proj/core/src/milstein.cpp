#include "ubpf/milstein.hpp"

#include <array>
#include <cmath>
#include <string>

#include "ubpf/errors.hpp"

namespace ubpf {

namespace {

[[noreturn]] void throw_non_finite(Level level, std::size_t step, const char* path) {
  throw NumericalError(std::string("non-finite state on ") + path + " path at step " +
                       std::to_string(step) + " of level " + std::to_string(level.value));
}

void check_dim(const StateSpaceModel& model, std::size_t size, const char* what) {
  if (size != model.dim())
    throw ConfigError(std::string(what) + " has dimension " + std::to_string(size) +
                      ", model expects " + std::to_string(model.dim()));
}

std::vector<double>& scratch() {
  thread_local std::vector<double> buffer;
  return buffer;
}

void draw_into(std::vector<double>& z, Level level, std::size_t dim, Rng& rng,
               bool tie_pairs) {
  z.resize(level.steps() * dim);
  fill_normal(rng, level.step(), z);
  if (tie_pairs && level.steps() >= 2) {
    for (std::size_t m = 0; m < level.steps(); m += 2)
      for (std::size_t c = 0; c < dim; ++c) z[(m + 1) * dim + c] = z[m * dim + c];
  }
}

}  // namespace

bool milstein_step_inplace(const StateSpaceModel& model, std::span<double> x,
                           std::span<const double> z, double delta, CorrectionMode mode) {
  const std::size_t d = model.dim();
  std::array<double, kMaxDim> alpha;
  std::array<double, kMaxDim * kMaxDim> beta;
  std::array<double, kMaxDim * kMaxDim * kMaxDim> h;
  const std::span<const double> xs(x.data(), d);
  model.drift(xs, alpha);
  model.diffusion(xs, beta);
  model.corr_tensor(xs, h);

  const bool literal = mode == CorrectionMode::literal;
  bool finite = true;
  for (std::size_t i = 0; i < d; ++i) {
    double inc = alpha[i] * delta;
    for (std::size_t j = 0; j < d; ++j) inc += beta[i * d + j] * z[j];
    for (std::size_t j = 0; j < d; ++j) {
      const double* hij = &h[(i * d + j) * d];
      for (std::size_t k = 0; k < d; ++k) {
        const double q = z[j] * z[k] - ((literal || j == k) ? delta : 0.0);
        inc += hij[k] * q;
      }
    }
    x[i] += inc;
    finite = finite && std::isfinite(x[i]);
  }
  return finite;
}

std::vector<double> milstein_step(const StateSpaceModel& model, std::span<const double> x,
                                  std::span<const double> z, double delta,
                                  CorrectionMode mode) {
  check_dim(model, x.size(), "state");
  check_dim(model, z.size(), "increment");
  if (!(delta > 0.0)) throw ConfigError("Milstein step size must be positive");
  std::vector<double> out(x.begin(), x.end());
  if (!milstein_step_inplace(model, out, z, delta, mode))
    throw NumericalError("non-finite state after Milstein step of size " +
                         std::to_string(delta));
  return out;
}

NoiseGrid draw_noise(Level level, std::size_t dim, Rng& rng) {
  NoiseGrid grid{level, dim, {}};
  draw_into(grid.z, level, dim, rng, false);
  return grid;
}

NoiseGrid pair_sum_grid(const NoiseGrid& grid) {
  if (grid.level.value == 0) throw ConfigError("pair sums need a grid of level >= 1");
  NoiseGrid out{grid.level.coarser(), grid.dim, {}};
  out.z.resize(grid.z.size() / 2);
  for (std::size_t m = 0; m < out.size(); ++m)
    for (std::size_t c = 0; c < grid.dim; ++c)
      out.z[m * grid.dim + c] =
          grid.z[(2 * m) * grid.dim + c] + grid.z[(2 * m + 1) * grid.dim + c];
  return out;
}

NoiseGrid antithetic_grid(const NoiseGrid& grid) {
  if (grid.level.value == 0) throw ConfigError("antithetic grid needs level >= 1");
  NoiseGrid out{grid.level, grid.dim, std::vector<double>(grid.z.size())};
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto src = grid.at(rho(k));
    std::copy(src.begin(), src.end(), out.z.begin() + k * grid.dim);
  }
  return out;
}

void run_single(const StateSpaceModel& model, std::span<double> x, const NoiseGrid& grid,
                CorrectionMode mode) {
  check_dim(model, x.size(), "state");
  check_dim(model, grid.dim, "noise grid");
  const double delta = grid.level.step();
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (!milstein_step_inplace(model, x, grid.at(k + 1), delta, mode))
      throw_non_finite(grid.level, k, "single");
}

void run_antithetic(const StateSpaceModel& model, std::span<double> fine,
                    std::span<double> coarse, std::span<double> anti, const NoiseGrid& grid,
                    CorrectionMode mode) {
  check_dim(model, fine.size(), "fine state");
  check_dim(model, coarse.size(), "coarse state");
  check_dim(model, anti.size(), "antithetic state");
  check_dim(model, grid.dim, "noise grid");
  const Level level = grid.level;
  if (level.value == 0) throw ConfigError("antithetic scheme needs level >= 1");
  const std::size_t d = grid.dim;
  const double delta = level.step();
  std::array<double, kMaxDim> sum;
  for (std::size_t m = 0; m < level.steps() / 2; ++m) {
    const auto z1 = grid.at(2 * m + 1);
    const auto z2 = grid.at(2 * m + 2);
    if (!milstein_step_inplace(model, fine, z1, delta, mode))
      throw_non_finite(level, 2 * m, "fine");
    if (!milstein_step_inplace(model, fine, z2, delta, mode))
      throw_non_finite(level, 2 * m + 1, "fine");
    if (!milstein_step_inplace(model, anti, z2, delta, mode))
      throw_non_finite(level, 2 * m, "antithetic");
    if (!milstein_step_inplace(model, anti, z1, delta, mode))
      throw_non_finite(level, 2 * m + 1, "antithetic");
    for (std::size_t c = 0; c < d; ++c) sum[c] = z1[c] + z2[c];
    if (!milstein_step_inplace(model, coarse, std::span<const double>(sum.data(), d),
                               2.0 * delta, mode))
      throw_non_finite(level.coarser(), m, "coarse");
  }
}

void propagate_single(const StateSpaceModel& model, Level level, std::span<double> x,
                      Rng& rng, CostMeter& cost, const KernelOptions& options,
                      NoiseGrid* grid_out) {
  auto& z = scratch();
  draw_into(z, level, model.dim(), rng, false);
  const std::size_t d = model.dim();
  const double delta = level.step();
  for (std::size_t k = 0; k < level.steps(); ++k)
    if (!milstein_step_inplace(model, x, std::span<const double>(z.data() + k * d, d), delta,
                               options.mode))
      throw_non_finite(level, k, "single");
  cost.add(single_cost(level));
  if (grid_out != nullptr) *grid_out = NoiseGrid{level, d, z};
}

void propagate_antithetic(const StateSpaceModel& model, Level level, std::span<double> fine,
                          std::span<double> coarse, std::span<double> anti, Rng& rng,
                          CostMeter& cost, const KernelOptions& options,
                          NoiseGrid* grid_out) {
  if (level.value == 0) throw ConfigError("antithetic scheme needs level >= 1");
  NoiseGrid grid{level, model.dim(), std::move(scratch())};
  draw_into(grid.z, level, model.dim(), rng, options.tie_pairs);
  try {
    run_antithetic(model, fine, coarse, anti, grid, options.mode);
  } catch (...) {
    scratch() = std::move(grid.z);
    throw;
  }
  cost.add(antithetic_cost(level));
  if (grid_out != nullptr) *grid_out = grid;
  scratch() = std::move(grid.z);
}

PathTriple propagate_antithetic(const StateSpaceModel& model, Level level,
                                const PathTriple& start, Rng& rng, CostMeter& cost,
                                const KernelOptions& options, NoiseGrid* grid_out) {
  PathTriple out = start;
  propagate_antithetic(model, level, out.fine, out.coarse, out.anti, rng, cost, options,
                       grid_out);
  return out;
}

void propagate_pair(const StateSpaceModel& model, Level level, std::span<double> fine,
                    std::span<double> coarse, Rng& rng, CostMeter& cost,
                    const KernelOptions& options, NoiseGrid* grid_out) {
  if (level.value == 0) throw ConfigError("coupled scheme needs level >= 1");
  auto& z = scratch();
  draw_into(z, level, model.dim(), rng, options.tie_pairs);
  const std::size_t d = model.dim();
  const double delta = level.step();
  std::array<double, kMaxDim> sum;
  for (std::size_t m = 0; m < level.steps() / 2; ++m) {
    const std::span<const double> z1(z.data() + (2 * m) * d, d);
    const std::span<const double> z2(z.data() + (2 * m + 1) * d, d);
    if (!milstein_step_inplace(model, fine, z1, delta, options.mode))
      throw_non_finite(level, 2 * m, "fine");
    if (!milstein_step_inplace(model, fine, z2, delta, options.mode))
      throw_non_finite(level, 2 * m + 1, "fine");
    for (std::size_t c = 0; c < d; ++c) sum[c] = z1[c] + z2[c];
    if (!milstein_step_inplace(model, coarse, std::span<const double>(sum.data(), d),
                               2.0 * delta, options.mode))
      throw_non_finite(level.coarser(), m, "coarse");
  }
  cost.add(pair_cost(level));
  if (grid_out != nullptr) *grid_out = NoiseGrid{level, d, z};
}

}  // namespace ubpf
