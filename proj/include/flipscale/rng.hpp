#pragma once

#include <cmath>
#include <cstdint>

namespace flipscale::rng {

// SplitMix64 (Steele, Lea, Flood 2014) used as a counter-based generator.
//
// A stream is identified by a 64-bit key. Its i-th output (i = 0, 1, ...) is
//
//   mix64(key + (i + 1) * kGolden)
//
// which is exactly the sequence produced by a SplitMix64 generator whose
// state starts at `key`, but it can also be evaluated at any index directly.
// Per-sample streams of a batch are keyed by stream_key(base_seed, k).

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t stream_key(std::uint64_t base_seed,
                                   std::uint64_t sample_index) noexcept {
  return mix64(base_seed ^ mix64(sample_index + kGolden));
}

constexpr std::uint64_t counter_bits(std::uint64_t key,
                                     std::uint64_t index) noexcept {
  return mix64(key + (index + 1) * kGolden);
}

// 53-bit uniform on the open interval (0, 1): the midpoint of one of 2^53
// equal cells, so 0 and 1 are never produced.
constexpr double to_unit_open(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

constexpr double counter_uniform(std::uint64_t key,
                                 std::uint64_t index) noexcept {
  return to_unit_open(counter_bits(key, index));
}

// Sequential view of one stream, usable with <random> distributions.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t key) noexcept : state_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  constexpr result_type operator()() noexcept {
    state_ += kGolden;
    return mix64(state_);
  }

  constexpr double uniform() noexcept { return to_unit_open((*this)()); }

  // Unit-rate exponential.
  double exponential() noexcept { return -std::log(uniform()); }

 private:
  std::uint64_t state_;
};

}  // namespace flipscale::rng
