#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace wips {

/// Philox4x32-10 counter-based generator. A draw is a pure function of
/// (key, counter), so any substream can be evaluated independently of
/// iteration order or worker count.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter apply(Counter ctr, Key key) noexcept;
};

/// Stream purpose tag, stored in the last counter word.
enum class Domain : std::uint32_t {
  kEdgeInit = 1,
  kEdgeStep = 2,
  kBrownian = 3,
  kInitial = 4,
  kOracle = 5,
  kMembership = 6,
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed handle for one logical stream family. `derive` produces statistically
/// unrelated child keys (scenario, sweep point, replication, ...).
class StreamKey {
 public:
  constexpr StreamKey() = default;
  constexpr explicit StreamKey(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  StreamKey derive(std::uint64_t a, std::uint64_t b = 0) const noexcept;

  /// Four 32-bit words for counter (a, b, step, domain).
  Philox4x32::Counter block(std::uint32_t a, std::uint32_t b, std::uint32_t step, Domain domain) const noexcept;

 private:
  std::uint64_t seed_ = 0;
};

/// Uniform on the open interval (0,1) from two 32-bit words (52-bit resolution).
/// Midpoints of the 2^52 cells are exact doubles, so neither end is reached.
inline double to_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi >> 6) << 26) | (lo >> 6);
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

/// Threshold such that `word < threshold` has probability p (32-bit resolution).
/// p >= 1 maps to a threshold that every word passes.
inline std::uint64_t bernoulli_threshold(double p) noexcept {
  if (!(p > 0.0)) return 0;
  if (p >= 1.0) return std::uint64_t{1} << 32;
  return static_cast<std::uint64_t>(p * 4294967296.0);
}

/// Two standard normals from one Philox block (Box-Muller).
std::array<double, 2> normal_pair(const Philox4x32::Counter& words) noexcept;

/// Sequential engine on top of Philox for Monte Carlo loops that do not need
/// random access. Satisfies UniformRandomBitGenerator.
class PhiloxEngine {
 public:
  using result_type = std::uint32_t;

  PhiloxEngine(StreamKey key, Domain domain) : key_(key), domain_(domain) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;
  double uniform() noexcept;
  double normal() noexcept;

 private:
  StreamKey key_;
  Domain domain_;
  std::uint64_t counter_ = 0;
  Philox4x32::Counter buffer_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace wips
