#include "mfh/rng.hpp"

#include <random>

namespace mfh {

std::uint64_t stream_key(std::uint64_t seed, std::uint64_t replication,
                         std::uint64_t area, StreamRole role) noexcept {
  constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  std::uint64_t h = SplitMix64::mix(seed + kGamma);
  h = SplitMix64::mix(h ^ (replication + kGamma));
  h = SplitMix64::mix(h ^ (area + 2 * kGamma));
  h = SplitMix64::mix(h ^ (static_cast<std::uint64_t>(role) + 3 * kGamma));
  return h;
}

Eigen::VectorXd standard_normal_draws(std::uint64_t key, Eigen::Index n) {
  SplitMix64 gen(key);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(gen);
  return z;
}

}  // namespace mfh
