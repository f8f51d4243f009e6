#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace demnet {

/// Counter-based generator: the value at stream position i is
/// splitmix64_mix(seed + (i + 1) * 0x9E3779B97F4A7C15). The output depends only
/// on (seed, position), so sequences are portable and any position can be
/// reproduced without replaying the stream.
///
/// Doubles take the top 53 bits (x >> 11) * 2^-53, so they lie in [0, 1).
/// Bounded integers use the high word of the 128-bit product x * n.
///
/// Single owner; do not share one instance between threads.
class RngState {
 public:
  explicit RngState(std::uint64_t seed = 42, std::uint64_t position = 0)
      : seed_(seed), position_(position) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t position() const { return position_; }

  /// Raw 64-bit draw; advances the position by one.
  std::uint64_t next_u64();

  /// Uniform double in [0, 1).
  double uniform();

  /// Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);

  /// Independent stream rooted at a seed derived from this one.
  RngState derive(std::uint64_t stream_offset) const;

  friend bool operator==(const RngState&, const RngState&) = default;

 private:
  std::uint64_t seed_;
  std::uint64_t position_;
};

std::uint64_t splitmix64_mix(std::uint64_t x);

/// `count` uniform draws in [0, 1); advances `state` by `count`.
std::vector<double> prng_uniform(RngState& state, std::size_t count);

/// Seed offsets used to derive every stage stream from one root seed.
/// SMOTE uses the root seed directly.
namespace seed_offset {
inline constexpr std::uint64_t kSmote = 0;
inline constexpr std::uint64_t kSplit = 1;
inline constexpr std::uint64_t kInit = 2;
inline constexpr std::uint64_t kShuffle = 3;
inline constexpr std::uint64_t kDropout = 4;
}  // namespace seed_offset

/// Stage seed for `offset`: root + offset.
inline std::uint64_t stage_seed(std::uint64_t root, std::uint64_t offset) {
  return root + offset;
}

}  // namespace demnet
