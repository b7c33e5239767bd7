#include <cmath>
#include <numbers>

#include "doctest.h"
#include "support.hpp"
#include "wips/config.hpp"
#include "wips/error.hpp"
#include "wips/kernels.hpp"
#include "wips/stats.hpp"

using namespace wips;
using nlohmann::json;

TEST_CASE("membership examples") {
  const MembershipMap one = build_membership({}, 5);
  CHECK(one.types() == 1);
  CHECK(one.min_count() == 5);

  const MembershipMap counts = build_membership({{2, 3}, {}}, 5);
  CHECK(counts.assignments() == std::vector<int>{0, 0, 1, 1, 1});
  CHECK(counts.min_count() == 2);

  const MembershipMap halves = build_membership({{}, {0.5, 0.5}}, 5);
  CHECK(halves.counts() == std::vector<std::size_t>{3, 2});
  CHECK(halves.min_count() == 2);
  CHECK(build_membership({{}, {0.5, 0.5}}, 5) == halves);
}

TEST_CASE("membership rejects bad specs") {
  CHECK_THROWS_AS(build_membership({{2, 2}, {}}, 5), Error);
  CHECK_THROWS_AS(build_membership({{}, {0.6, 0.6}}, 5), Error);
  CHECK_THROWS_AS(build_membership({{}, {0.99, 0.01}}, 5), Error);
  CHECK_THROWS_AS(build_membership({{5, 0}, {}}, 5), Error);
}

TEST_CASE("registry kernels and bounded-Lipschitz checks") {
  const KernelPtr c = kernel_registry_lookup("constant", std::vector<double>{0.5}, 1);
  const PairGrid grid = uniform_pair_grid(1, -std::numbers::pi, std::numbers::pi, 41);
  const BLEstimate ce = validate_bl_norm(*c, grid);
  CHECK(ce.sup_norm == doctest::Approx(0.5));
  CHECK(ce.lipschitz == doctest::Approx(0.0));
  CHECK(ce.estimate <= c->bound() + 1e-12);
  CHECK_FALSE(ce.violation);

  const KernelPtr s = kernel_registry_lookup("sine_coupling", std::vector<double>{1.0}, 1);
  const BLEstimate coarse = validate_bl_norm(*s, uniform_pair_grid(1, -std::numbers::pi, std::numbers::pi, 9));
  const BLEstimate fine = validate_bl_norm(*s, uniform_pair_grid(1, -std::numbers::pi, std::numbers::pi, 81));
  CHECK(fine.estimate <= 1.0 + 1e-12);
  CHECK(fine.estimate >= coarse.estimate - 1e-12);
  CHECK(fine.estimate > 0.99);
  CHECK_FALSE(fine.violation);

  const KernelPtr id = kernel_registry_lookup("identity_diffusion", {}, 2);
  std::vector<double> out(4);
  const std::vector<double> x{0.3, -1.0}, y{2.0, 0.1};
  id->eval(x, y, out);
  CHECK(out == std::vector<double>{1, 0, 0, 1});

  CHECK_THROWS_AS(kernel_registry_lookup("no_such_kernel", {}, 1), Error);
  CHECK_THROWS_AS(kernel_registry_lookup("sine_coupling", {}, 1), Error);
}

namespace {
// b(x, y) = x, which is not bounded.
class LinearX final : public PairKernel {
 public:
  LinearX() : PairKernel("linear_x", {}, 1, KernelRole::kDrift, 1.0) {}
  void eval(std::span<const double> x, std::span<const double>, std::span<double> out) const override { out[0] = x[0]; }
};
}  // namespace

TEST_CASE("unbounded kernel is flagged") {
  const BLEstimate e = validate_bl_norm(LinearX(), uniform_pair_grid(1, -10.0, 10.0, 21));
  CHECK(e.sup_norm == doctest::Approx(10.0));
  CHECK(e.violation);
}

TEST_CASE("factorized forms agree with direct evaluation") {
  const Registry& r = Registry::builtin();
  for (const KernelInfo& info : r.kernels()) {
    if (!info.factorized || info.role != KernelRole::kDrift) continue;
    std::vector<double> params(info.param_names.size(), 0.7);
    const KernelPtr k = r.make(info.name, params, 2, kDefaultBoundCap);
    const int q = k->rank();
    REQUIRE(q > 0);
    const std::vector<double> x{0.4, -1.3}, y{-0.2, 2.5};
    std::vector<double> direct(2), coef(static_cast<std::size_t>(q * 2)), feat(static_cast<std::size_t>(q));
    k->eval(x, y, direct);
    k->coefficients(x, coef);
    k->features(y, feat);
    for (int e = 0; e < 2; ++e) {
      double v = 0.0;
      for (int rr = 0; rr < q; ++rr) v += coef[static_cast<std::size_t>(rr * 2 + e)] * feat[static_cast<std::size_t>(rr)];
      CHECK_MESSAGE(v == doctest::Approx(direct[static_cast<std::size_t>(e)]).epsilon(1e-14), info.name);
    }
  }
}

TEST_CASE("registry aliases") {
  Registry r = Registry::builtin();
  r.add_alias("sine_half", "sine_coupling", {0.5});
  CHECK(r.contains("sine_half"));
  const KernelPtr k = r.make("sine_half", {}, 1, kDefaultBoundCap);
  std::vector<double> out(1);
  const std::vector<double> x{0.0}, y{std::numbers::pi / 2};
  k->eval(x, y, out);
  CHECK(out[0] == doctest::Approx(0.5));
  CHECK_THROWS_AS(r.add_alias("bad", "no_such_base", {1.0}), Error);
}

TEST_CASE("scenario documents round-trip") {
  const json doc = json::parse(R"({
    "name": "two_types", "n": 10, "types": {"proportions": [0.3, 0.7]}, "dimension": 2,
    "drift": [[{"name": "sine_coupling", "params": [1.0]}, {"name": "constant", "params": [0.2]}],
              [{"name": "x_only_tanh", "params": [0.5]}, {"name": "sine_coupling", "params": [0.3]}]],
    "edges": {"mode": "markov", "p0": [[0.9, 0.2], [0.2, 0.5]], "lambda": 1.0, "mu": 3.0},
    "steps": 20, "replications": 4, "seed": 9
  })");
  const ScenarioConfig c = scenario_from_json(doc);
  CHECK(c.types() == 2);
  CHECK(scenario_from_json(to_json(c)) == c);
  const Model m = build_model(c);
  CHECK(m.membership.counts() == std::vector<std::size_t>{3, 7});
  CHECK(m.edges.initial(0, 1) == 0.2);
  CHECK(m.edges.on_rate(1, 0) == 1.0);
  CHECK(m.kernels.drift(1, 0).name() == "x_only_tanh");
}

TEST_CASE("scenario documents are validated") {
  const json base = to_json(test::scenario("sine_coupling", {1.0}, 8, 0.5));
  auto rejects = [&](auto mutate) {
    json d = base;
    mutate(d);
    CHECK_THROWS_AS(build_model(scenario_from_json(d)), Error);
  };
  rejects([](json& d) { d["unknown"] = 1; });
  rejects([](json& d) { d["edges"]["p0"] = 1.5; });
  rejects([](json& d) { d["steps"] = 0; });
  rejects([](json& d) { d["horizon"] = -1.0; });
  rejects([](json& d) { d["drift"] = json{{"name", "nope"}}; });
  rejects([](json& d) { d["edges"]["lambda"] = 1.0; });
  rejects([](json& d) { d["edges"] = json{{"mode", "markov"}, {"p0", 0.5}}; });
  rejects([](json& d) { d["n"] = 0; });
}

TEST_CASE("initial laws") {
  const StreamKey key(3);
  std::vector<double> v;
  const InitialLaw normal({"normal", {1.0, 2.0}});
  double buf[1];
  for (std::uint32_t i = 0; i < 40000; ++i) {
    normal.sample(key, i, buf);
    v.push_back(buf[0]);
  }
  CHECK(std::abs(mean(v) - 1.0) < 4.0 * 2.0 / std::sqrt(40000.0));
  CHECK(std::abs(variance(v) - 4.0) < 4.0 * 4.0 * std::sqrt(2.0 / 40000.0));
  const InitialLaw point({"point", {0.25}});
  point.sample(key, 0, buf);
  CHECK(buf[0] == 0.25);
  CHECK(point.variance() == 0.0);
  const InitialLaw uniform({"uniform", {-1.0, 3.0}});
  for (std::uint32_t i = 0; i < 100; ++i) {
    uniform.sample(key, i, buf);
    CHECK(buf[0] > -1.0);
    CHECK(buf[0] < 3.0);
  }
  CHECK_THROWS_AS(InitialLaw({"normal", {0.0, -1.0}}), Error);
}
