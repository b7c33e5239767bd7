#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "wips/rng.hpp"
#include "wips/stats.hpp"

using namespace wips;

TEST_CASE("philox known-answer vectors") {
  using C = Philox4x32::Counter;
  CHECK(Philox4x32::apply(C{0, 0, 0, 0}, {0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::apply(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::apply(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("stream keys are pure and separate") {
  const StreamKey k(7);
  CHECK(k.block(3, 1, 9, Domain::kBrownian) == k.block(3, 1, 9, Domain::kBrownian));
  CHECK(k.block(3, 1, 9, Domain::kBrownian) != k.block(3, 1, 9, Domain::kInitial));
  CHECK(k.block(3, 1, 9, Domain::kBrownian) != k.block(3, 1, 10, Domain::kBrownian));
  CHECK(k.derive(1, 2).seed() == k.derive(1, 2).seed());
  std::set<std::uint64_t> seeds;
  for (std::uint64_t a = 0; a < 50; ++a)
    for (std::uint64_t b = 0; b < 50; ++b) seeds.insert(k.derive(a, b).seed());
  CHECK(seeds.size() == 2500);
  CHECK(k.derive(1, 2).seed() != k.derive(2, 1).seed());
}

TEST_CASE("unit conversion stays inside the open interval") {
  CHECK(to_unit(0, 0) > 0.0);
  CHECK(to_unit(0xffffffff, 0xffffffff) < 1.0);
  CHECK(bernoulli_threshold(0.0) == 0);
  CHECK(bernoulli_threshold(1.0) == (std::uint64_t{1} << 32));
  CHECK(bernoulli_threshold(0.5) == (std::uint64_t{1} << 31));
}

TEST_CASE("normal draws have unit moments") {
  const StreamKey key(11);
  std::vector<double> v;
  for (std::uint32_t i = 0; i < 50000; ++i) {
    const auto z = normal_pair(key.block(i, 0, 0, Domain::kBrownian));
    v.push_back(z[0]);
    v.push_back(z[1]);
  }
  const double n = static_cast<double>(v.size());
  CHECK(std::abs(mean(v)) < 4.0 / std::sqrt(n));
  CHECK(std::abs(variance(v) - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("sequential engine replays from its key") {
  PhiloxEngine a(StreamKey(5), Domain::kOracle), b(StreamKey(5), Domain::kOracle);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());
  PhiloxEngine c(StreamKey(5), Domain::kOracle);
  double s = 0.0;
  for (int i = 0; i < 20000; ++i) s += c.uniform();
  CHECK(std::abs(s / 20000.0 - 0.5) < 0.01);
}
