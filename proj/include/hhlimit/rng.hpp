#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace hhlimit {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Combines a parent key with one more coordinate (replicate, channel, ...).
constexpr std::uint64_t derive_key(std::uint64_t parent, std::uint64_t coordinate) {
  return mix64(parent ^ mix64(coordinate ^ 0xD1B54A32D192ED03ULL));
}

/// Counter-based generator: the n-th output is a pure function of (key, n),
/// so streams keyed by (seed, replicate, channel) are independent of the
/// order in which channels are visited.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng() = default;
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix64(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  /// Unit-rate exponential.
  double exponential() { return -std::log(uniform()); }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace hhlimit
