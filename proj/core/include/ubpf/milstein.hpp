#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ubpf/model.hpp"
#include "ubpf/rng.hpp"

namespace ubpf {

/// Dyadic discretization level: 2^l steps of size 2^-l per unit interval.
struct Level {
  unsigned value = 0;

  constexpr double step() const noexcept { return 1.0 / static_cast<double>(steps()); }
  constexpr std::size_t steps() const noexcept { return std::size_t{1} << value; }
  constexpr Level coarser() const noexcept { return Level{value - 1}; }

  friend constexpr auto operator<=>(Level, Level) = default;
};

/// How the quadratic Milstein term subtracts the step size.
///
/// kronecker: h_ijk (z_j z_k − δ·1{j=k}), the Itô-correct truncated scheme.
/// literal:   h_ijk (z_j z_k − δ) for every (j, k).
enum class CorrectionMode { kronecker, literal };

struct KernelOptions {
  CorrectionMode mode = CorrectionMode::kronecker;
  /// Test hook: copy Z_{2m-1} into Z_{2m} after drawing, making the
  /// antithetic swap a no-op.
  bool tie_pairs = false;
};

/// Gaussian increments Z_1..Z_{2^l}, each N_d(0, 2^-l I_d), stored row-major.
struct NoiseGrid {
  Level level;
  std::size_t dim = 0;
  std::vector<double> z;

  std::size_t size() const noexcept { return dim == 0 ? 0 : z.size() / dim; }
  /// 1-based, matching Z_1..Z_{2^l}.
  std::span<const double> at(std::size_t k) const {
    return {z.data() + (k - 1) * dim, dim};
  }
};

/// Counts Milstein steps; the platform-independent cost unit.
class CostMeter {
 public:
  void add(std::uint64_t steps) noexcept { steps_ += steps; }
  std::uint64_t steps() const noexcept { return steps_; }
  void merge(const CostMeter& other) noexcept { steps_ += other.steps_; }

 private:
  std::uint64_t steps_ = 0;
};

constexpr std::uint64_t single_cost(Level l) noexcept { return l.steps(); }
/// Fine + antithetic at level l plus the coarse path at l − 1.
constexpr std::uint64_t antithetic_cost(Level l) noexcept {
  return 2 * l.steps() + l.steps() / 2;
}
/// Fine at level l plus coarse at l − 1.
constexpr std::uint64_t pair_cost(Level l) noexcept { return l.steps() + l.steps() / 2; }

/// x + α(x)δ + β(x)z + H_δ(x, z). Throws NumericalError on non-finite output.
std::vector<double> milstein_step(const StateSpaceModel& model, std::span<const double> x,
                                  std::span<const double> z, double delta,
                                  CorrectionMode mode = CorrectionMode::kronecker);

/// In-place variant; returns false when the new state is not finite.
bool milstein_step_inplace(const StateSpaceModel& model, std::span<double> x,
                           std::span<const double> z, double delta, CorrectionMode mode);

NoiseGrid draw_noise(Level level, std::size_t dim, Rng& rng);

/// Index ρ_k (1-based) of the increment the antithetic path uses at its
/// 0-based step k: the two increments of each consecutive pair are swapped.
constexpr std::size_t rho(std::size_t k) noexcept { return (k % 2 == 0) ? k + 2 : k; }

/// Level l − 1 grid whose m-th increment is Z_{2m-1} + Z_{2m}.
NoiseGrid pair_sum_grid(const NoiseGrid& grid);
/// Grid whose (k+1)-th increment is Z_{ρ_k}.
NoiseGrid antithetic_grid(const NoiseGrid& grid);

/// Truncated Milstein recursion over [0, 1] driven by a given grid.
void run_single(const StateSpaceModel& model, std::span<double> x, const NoiseGrid& grid,
                CorrectionMode mode = CorrectionMode::kronecker);

/// Antithetic truncated Milstein recursion over [0, 1] driven by a level-l grid
/// (l ≥ 1): fine uses Z_{k+1}, coarse uses pair sums at step 2δ, antithetic
/// uses Z_{ρ_k}.
void run_antithetic(const StateSpaceModel& model, std::span<double> fine,
                    std::span<double> coarse, std::span<double> anti, const NoiseGrid& grid,
                    CorrectionMode mode = CorrectionMode::kronecker);

/// Draws a fresh grid and advances x by one unit of time at `level`.
/// Adds 2^l to `cost`. If `grid_out` is given the grid is copied there.
void propagate_single(const StateSpaceModel& model, Level level, std::span<double> x,
                      Rng& rng, CostMeter& cost, const KernelOptions& options = {},
                      NoiseGrid* grid_out = nullptr);

struct PathTriple {
  std::vector<double> fine;
  std::vector<double> coarse;
  std::vector<double> anti;
};

/// One unit of time of the antithetic scheme at level l ≥ 1, in place.
/// Adds 2^{l+1} + 2^{l-1} to `cost`.
void propagate_antithetic(const StateSpaceModel& model, Level level, std::span<double> fine,
                          std::span<double> coarse, std::span<double> anti, Rng& rng,
                          CostMeter& cost, const KernelOptions& options = {},
                          NoiseGrid* grid_out = nullptr);

PathTriple propagate_antithetic(const StateSpaceModel& model, Level level,
                                const PathTriple& start, Rng& rng, CostMeter& cost,
                                const KernelOptions& options = {},
                                NoiseGrid* grid_out = nullptr);

/// Fine path at level l and coarse path at l − 1 sharing increments, without
/// the antithetic partner. Adds 2^l + 2^{l-1} to `cost`.
void propagate_pair(const StateSpaceModel& model, Level level, std::span<double> fine,
                    std::span<double> coarse, Rng& rng, CostMeter& cost,
                    const KernelOptions& options = {}, NoiseGrid* grid_out = nullptr);

}  // namespace ubpf
