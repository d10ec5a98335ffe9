#pragma once

// Counter-keyed random streams. Every (seed, replication, area, role) tuple
// owns an independent SplitMix64 stream, so the draws of one replication do
// not depend on which worker produced it or in which order.

#include <cstdint>
#include <limits>

#include <Eigen/Dense>

namespace mfh {

/// SplitMix64 (Steele, Lea & Flood 2014). Satisfies
/// UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t state) noexcept
      : state_(state) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

enum class StreamRole : std::uint64_t {
  kRandomEffect = 1,
  kSamplingError = 2,
};

std::uint64_t stream_key(std::uint64_t seed, std::uint64_t replication,
                         std::uint64_t area, StreamRole role) noexcept;

/// `n` independent N(0, 1) draws from the stream identified by the key.
Eigen::VectorXd standard_normal_draws(std::uint64_t key, Eigen::Index n);

}  // namespace mfh
