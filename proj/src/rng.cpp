#include "wips/rng.hpp"

#include <cmath>
#include <numbers>

namespace wips {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

}  // namespace

Philox4x32::Counter Philox4x32::apply(Counter ctr, Key key) noexcept {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

StreamKey StreamKey::derive(std::uint64_t a, std::uint64_t b) const noexcept {
  std::uint64_t h = splitmix64(seed_ ^ 0x6A09E667F3BCC909ull);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ (b * 0x9E3779B97F4A7C15ull));
  return StreamKey(h);
}

Philox4x32::Counter StreamKey::block(std::uint32_t a, std::uint32_t b, std::uint32_t step,
                                     Domain domain) const noexcept {
  const Philox4x32::Key key{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
  return Philox4x32::apply({a, b, step, static_cast<std::uint32_t>(domain)}, key);
}

std::array<double, 2> normal_pair(const Philox4x32::Counter& words) noexcept {
  const double u1 = to_unit(words[0], words[1]);
  const double u2 = to_unit(words[2], words[3]);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

PhiloxEngine::result_type PhiloxEngine::operator()() noexcept {
  if (used_ == 4) {
    buffer_ = key_.block(static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32), 0,
                         domain_);
    ++counter_;
    used_ = 0;
  }
  return buffer_[used_++];
}

double PhiloxEngine::uniform() noexcept {
  const std::uint32_t hi = (*this)();
  const std::uint32_t lo = (*this)();
  return to_unit(hi, lo);
}

double PhiloxEngine::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const Philox4x32::Counter words{(*this)(), (*this)(), (*this)(), (*this)()};
  const auto pair = normal_pair(words);
  spare_ = pair[1];
  has_spare_ = true;
  return pair[0];
}

}  // namespace wips
