#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace ubpf {

using Rng = std::mt19937_64;

/// Derive an independent child seed from (root, index).
///
/// Counter-based: the child depends only on its parent and its index, so
/// seeds for replicate i are the same whatever order or thread computes them.
std::uint64_t split_seed(std::uint64_t root, std::uint64_t index) noexcept;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Fill `out` with i.i.d. N(0, variance) draws.
void fill_normal(Rng& rng, double variance, std::span<double> out);

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace ubpf
