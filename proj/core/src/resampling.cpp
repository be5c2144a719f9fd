#include "ubpf/resampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "ubpf/errors.hpp"

namespace ubpf {

namespace {

// Residual masses below this are treated as empty.
constexpr double kResidualFloor = 1e-12;

class Categorical {
 public:
  explicit Categorical(std::span<const double> mass) : cdf_(mass.size()) {
    std::partial_sum(mass.begin(), mass.end(), cdf_.begin());
    total_ = cdf_.empty() ? 0.0 : cdf_.back();
  }

  std::size_t operator()(Rng& rng) const {
    const double u = uniform01(rng) * total_;
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const auto index = static_cast<std::size_t>(it - cdf_.begin());
    // u can round up to total_; step back to the last index with mass.
    if (index < cdf_.size()) return index;
    std::size_t last = cdf_.size() - 1;
    while (last > 0 && cdf_[last] == cdf_[last - 1]) --last;
    return last;
  }

  double total() const noexcept { return total_; }

 private:
  std::vector<double> cdf_;
  double total_ = 0.0;
};

void require_same_size(std::size_t a, std::size_t b) {
  if (a != b) throw ConfigError("weight vectors must have equal length");
}

}  // namespace

std::vector<double> normalize_log_weights(std::span<const double> log_weights,
                                          std::size_t time, const std::string& ensemble) {
  if (log_weights.empty()) throw WeightCollapse(time, ensemble);
  double top = -std::numeric_limits<double>::infinity();
  for (double lw : log_weights) {
    if (std::isnan(lw) || lw == std::numeric_limits<double>::infinity())
      throw WeightCollapse(time, ensemble);
    top = std::max(top, lw);
  }
  if (!std::isfinite(top)) throw WeightCollapse(time, ensemble);
  std::vector<double> w(log_weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(log_weights[i] - top);
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

void validate_weights(std::span<const double> w) {
  if (w.empty()) throw ConfigError("empty weight vector");
  double total = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("weights must be finite and >= 0");
    total += v;
  }
  // 1e-12 plus the rounding a length-N sum can accumulate.
  const double tolerance = 1e-12 + static_cast<double>(w.size()) * 1e-16;
  if (std::abs(total - 1.0) > tolerance) {
    if (total == 0.0) throw WeightCollapse(0, "weights");
    throw ConfigError("weights must sum to 1");
  }
}

double ess(std::span<const double> w) {
  double sq = 0.0;
  for (double v : w) sq += v * v;
  return 1.0 / sq;
}

std::vector<std::size_t> multinomial_resample(std::span<const double> w, std::size_t count,
                                              Rng& rng) {
  validate_weights(w);
  const Categorical draw(w);
  std::vector<std::size_t> out(count);
  for (auto& a : out) a = draw(rng);
  return out;
}

std::vector<std::size_t> multinomial_resample(std::span<const double> w, Rng& rng) {
  return multinomial_resample(w, w.size(), rng);
}

CoupledIndices coupled_resample3(std::span<const double> w1, std::span<const double> w2,
                                 std::span<const double> w3, Rng& rng) {
  validate_weights(w1);
  validate_weights(w2);
  validate_weights(w3);
  require_same_size(w1.size(), w2.size());
  require_same_size(w1.size(), w3.size());
  const std::size_t n = w1.size();

  std::vector<double> common(n);
  std::array<std::vector<double>, 3> residual;
  const std::array<std::span<const double>, 3> w{w1, w2, w3};
  for (auto& r : residual) r.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    common[j] = std::min({w1[j], w2[j], w3[j]});
    for (std::size_t m = 0; m < 3; ++m) residual[m][j] = std::max(0.0, w[m][j] - common[j]);
  }

  CoupledIndices out;
  out.a1.resize(n);
  out.a2.resize(n);
  out.a3.resize(n);
  const Categorical common_draw(common);
  out.overlap = common_draw.total();

  std::array<std::optional<Categorical>, 3> residual_draw;
  auto residual_index = [&](std::size_t m) {
    if (!residual_draw[m]) {
      const double mass = std::accumulate(residual[m].begin(), residual[m].end(), 0.0);
      // Only reachable through rounding when the weights are exact.
      residual_draw[m].emplace(mass < kResidualFloor ? std::span<const double>(w[m])
                                                     : std::span<const double>(residual[m]));
    }
    return (*residual_draw[m])(rng);
  };

  for (std::size_t i = 0; i < n; ++i) {
    const double u = uniform01(rng);
    if (u < out.overlap) {
      const std::size_t a = common_draw(rng);
      out.a1[i] = out.a2[i] = out.a3[i] = a;
      ++out.common_count;
    } else {
      out.a1[i] = residual_index(0);
      out.a2[i] = residual_index(1);
      out.a3[i] = residual_index(2);
    }
  }
  return out;
}

PairedIndices coupled_resample2(std::span<const double> w1, std::span<const double> w2,
                                Rng& rng) {
  validate_weights(w1);
  validate_weights(w2);
  require_same_size(w1.size(), w2.size());
  const std::size_t n = w1.size();

  std::vector<double> common(n);
  std::array<std::vector<double>, 2> residual{std::vector<double>(n), std::vector<double>(n)};
  const std::array<std::span<const double>, 2> w{w1, w2};
  for (std::size_t j = 0; j < n; ++j) {
    common[j] = std::min(w1[j], w2[j]);
    for (std::size_t m = 0; m < 2; ++m) residual[m][j] = std::max(0.0, w[m][j] - common[j]);
  }

  PairedIndices out;
  out.a1.resize(n);
  out.a2.resize(n);
  const Categorical common_draw(common);
  out.overlap = common_draw.total();

  std::array<std::optional<Categorical>, 2> residual_draw;
  auto residual_index = [&](std::size_t m) {
    if (!residual_draw[m]) {
      const double mass = std::accumulate(residual[m].begin(), residual[m].end(), 0.0);
      residual_draw[m].emplace(mass < kResidualFloor ? std::span<const double>(w[m])
                                                     : std::span<const double>(residual[m]));
    }
    return (*residual_draw[m])(rng);
  };

  for (std::size_t i = 0; i < n; ++i) {
    const double u = uniform01(rng);
    if (u < out.overlap) {
      out.a1[i] = out.a2[i] = common_draw(rng);
      ++out.common_count;
    } else {
      out.a1[i] = residual_index(0);
      out.a2[i] = residual_index(1);
    }
  }
  return out;
}

}  // namespace ubpf
