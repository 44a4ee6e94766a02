#pragma once

#include <cstdint>
#include <random>

namespace tlcqm {

/// Reproducible random stream identified by (seed, stream_id).
///
/// Streams are split hierarchically: `child(k)` derives a new stream id from
/// the parent id and `k`, so every task of a Monte Carlo run can own an
/// independent stream that does not depend on scheduling order.
class RngStream {
 public:
  using result_type = std::mt19937_64::result_type;

  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  RngStream child(std::uint64_t key) const;
  RngStream child(std::uint64_t key_a, std::uint64_t key_b) const;

  double normal();
  /// Uniform on [0, 1).
  double uniform();
  std::uint64_t uniform_index(std::uint64_t n);

  // UniformRandomBitGenerator so std distributions and std::shuffle work.
  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace tlcqm
