#include "ubpf/rng.hpp"

#include <cmath>

namespace ubpf {

namespace {

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t split_seed(std::uint64_t root, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(root) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

void fill_normal(Rng& rng, double variance, std::span<double> out) {
  std::normal_distribution<double> normal(0.0, std::sqrt(variance));
  for (double& v : out) v = normal(rng);
}

}  // namespace ubpf
