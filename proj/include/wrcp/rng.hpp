#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace wrcp {

/// splitmix64 finalizer; mixes a base seed with stream tags so that trials,
/// test sets and sources draw from unrelated generators.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t index = 0) noexcept {
  return mix_seed(mix_seed(mix_seed(base) ^ tag) ^ index);
}

using Rng = std::mt19937_64;

/// Uniform draw from the probability simplex (Dirichlet(1, ..., 1)).
inline std::vector<double> sample_simplex(std::size_t k, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> w(k);
  double total = 0.0;
  for (double& wi : w) {
    wi = expo(rng);
    total += wi;
  }
  for (double& wi : w) {
    wi /= total;
  }
  return w;
}

/// Index drawn with probability proportional to `weights`.
inline std::size_t sample_index(std::span<const double> weights, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) {
      return i;
    }
  }
  // rounding left u above the final partial sum; take the last positive weight
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) {
      return i;
    }
  }
  return weights.size() - 1;
}

} // namespace wrcp
