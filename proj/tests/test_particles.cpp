#include <cmath>

#include "doctest.h"
#include "support.hpp"
#include "wips/error.hpp"
#include "wips/estimators.hpp"
#include "wips/particles.hpp"
#include "wips/stats.hpp"

using namespace wips;

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("zero kernels freeze the initial state") {
  ScenarioConfig c = test::scenario("constant", {0.0}, 12, 0.5, 20);
  c.diffusion = {{{"scaled_identity", {0.0}}}};
  const PathEnsemble p = simulate_interacting(build_model(c), StreamKey(1));
  for (std::size_t i = 0; i < p.n; ++i)
    for (int k = 0; k <= 20; ++k) CHECK(p.z_at(i, k)[0] == p.z_at(i, 0)[0]);
}

TEST_CASE("pure Brownian motion on the grid") {
  ScenarioConfig c = test::scenario("constant", {0.0}, 10, 0.5, 30);
  c.dimension = 3;
  const PathEnsemble p = simulate_interacting(build_model(c), StreamKey(2));
  for (std::size_t i = 0; i < p.n; ++i)
    for (int comp = 0; comp < 3; ++comp) {
      double w = p.z_at(i, 0)[comp];
      for (int k = 0; k < 30; ++k) {
        w += p.dw_at(i, k)[comp];
        CHECK(p.z_at(i, k + 1)[comp] == doctest::Approx(w).epsilon(1e-14));
      }
    }
}

TEST_CASE("Ornstein-Uhlenbeck moments") {
  ScenarioConfig c = test::scenario("clipped_restoring", {1.0, 50.0}, 4000, 0.5, 200);
  c.bound_cap = 100.0;
  c.initial = {{"normal", {1.0, 0.5}}};
  const PathEnsemble p = simulate_interacting(build_model(c), StreamKey(3));
  std::vector<double> zt;
  for (std::size_t i = 0; i < p.n; ++i) zt.push_back(p.z_at(i, 200)[0]);
  const double m = std::exp(-1.0) * 1.0;
  const double v = (1.0 - std::exp(-2.0)) / 2.0 + std::exp(-2.0) * 0.25;
  const MeanEstimate me = mean_estimate(zt);
  const VarianceEstimate ve = variance_estimate(zt);
  // Euler bias on this grid is about 1e-3 for both moments.
  CHECK(std::abs(me.value - m) < 3.0 * me.se + 5e-3);
  CHECK(std::abs(ve.value - v) < 3.0 * ve.se + 5e-3);
}

TEST_CASE("y-independent drift couples exactly") {
  for (double p : {0.0, 0.3, 1.0}) {
    const PathEnsemble paths = simulate_coupled(test::model("x_only_tanh", {0.8}, 40, p, 40), StreamKey(4));
    CHECK(paths.z == paths.x);
    CHECK(coupling_error(paths).max_abs == 0.0);
  }
}

TEST_CASE("coupling error vanishes on the complete graph and shrinks with N") {
  // The limit proxy is the complete interaction over the X ensemble, so p = 1 couples exactly.
  CHECK(coupling_error(simulate_coupled(test::model("sine_coupling", {1.0}, 32, 1.0, 40), StreamKey(9))).max_abs == 0.0);
  double previous = HUGE_VAL;
  for (std::size_t n : {16, 64, 256}) {
    std::vector<double> e;
    for (std::uint64_t r = 0; r < 8; ++r)
      e.push_back(coupling_error(simulate_coupled(test::model("sine_coupling", {1.0}, n, 0.5, 40), StreamKey(9).derive(r)))
                      .mean_sup_sq);
    const double now = mean(e);
    CHECK(now > 0.0);
    CHECK(now < previous);
    previous = now;
  }
}

TEST_CASE("fast and direct interaction routes agree") {
  const char* doc = R"({
    "name": "routes", "n": 37, "types": {"counts": [12, 25]}, "dimension": 2,
    "drift": [[{"name": "sine_coupling", "params": [1.0]}, {"name": "clipped_attraction", "params": [0.7, 2.0]}],
              [{"name": "clipped_linear_y", "params": [0.4, 3.0]}, {"name": "x_only_tanh", "params": [0.5]}]],
    "diffusion": [[{"name": "identity_diffusion"}, {"name": "scaled_identity", "params": [0.5]}],
                  [{"name": "scaled_identity", "params": [1.5]}, {"name": "identity_diffusion"}]],
    "edges": {"mode": "markov", "p0": [[0.9, 0.1], [0.1, 0.6]], "lambda": 1.0, "mu": 2.0},
    "steps": 25
  })";
  const Model m = build_model(scenario_from_json(nlohmann::json::parse(doc)));
  const PathEnsemble fast = simulate_coupled(m, StreamKey(5));
  const PathEnsemble direct = simulate_coupled(m, StreamKey(5), {.force_direct = true});
  CHECK(max_abs_diff(fast.z, direct.z) < 1e-12);
  CHECK(max_abs_diff(fast.x, direct.x) < 1e-12);

  for (double p : {0.05, 0.5, 0.95}) {
    const Model s = test::model("sine_coupling", {1.0}, 150, p, 10);
    CHECK(max_abs_diff(simulate_interacting(s, StreamKey(6)).z,
                       simulate_interacting(s, StreamKey(6), {.force_direct = true}).z) < 1e-12);
  }
}

TEST_CASE("simulation replays from the key") {
  const Model m = test::model("sine_coupling", {1.0}, 50, 0.5, 20);
  const PathEnsemble a = simulate_coupled(m, StreamKey(7));
  const PathEnsemble b = simulate_coupled(m, StreamKey(7));
  CHECK(a.z == b.z);
  CHECK(a.x == b.x);
  CHECK(a.dw == b.dw);
  CHECK(simulate_coupled(m, StreamKey(8)).z != a.z);
  // Limit paths share the initial points and noise of the coupled run.
  CHECK(simulate_limit(m, StreamKey(7)).x == a.x);
}

TEST_CASE("single drift evaluation") {
  const MembershipMap one({5});
  const std::vector<double> states{0.1, -0.4, 0.9, 0.3, -0.2};
  const EdgeSystem full = sample_static_graph(one, EdgeModel::static_uniform(1, 1.0), StreamKey(1));
  const KernelSet linear = KernelSet::uniform(1, kernel_registry_lookup("clipped_linear_y", std::vector<double>{1.0, 5.0}, 1),
                                              kernel_registry_lookup("identity_diffusion", {}, 1));
  const Coefficients c = drift_and_diffusion_eval(2, states, full, degree_counts(full, one), linear, one);
  CHECK(c.drift[0] == doctest::Approx(0.14));
  CHECK(c.diffusion[0] == doctest::Approx(1.0));

  const EdgeSystem empty = sample_static_graph(one, EdgeModel::static_uniform(1, 0.0), StreamKey(1));
  const KernelSet tanh = KernelSet::uniform(1, kernel_registry_lookup("x_only_tanh", std::vector<double>{1.0}, 1),
                                            kernel_registry_lookup("identity_diffusion", {}, 1));
  for (const EdgeSystem* g : {&full, &empty}) {
    const Coefficients t = drift_and_diffusion_eval(1, states, *g, degree_counts(*g, one), tanh, one);
    CHECK(t.drift[0] == doctest::Approx(std::tanh(-0.4)));
  }

  const MembershipMap two({2, 3});
  const EdgeSystem none = sample_static_graph(two, EdgeModel::static_uniform(2, 0.0), StreamKey(1));
  const KernelSet constant = KernelSet::uniform(2, kernel_registry_lookup("constant", std::vector<double>{0.5}, 1),
                                                kernel_registry_lookup("identity_diffusion", {}, 1));
  // Only the own type is reachable (self-loop); the other type adds nothing.
  const Coefficients e = drift_and_diffusion_eval(0, states, none, degree_counts(none, two), constant, two);
  CHECK(e.drift[0] == doctest::Approx(0.5));
}

TEST_CASE("neighbourhood empirical measures") {
  const char* doc = R"({
    "name": "measures", "n": 6, "types": {"counts": [1, 5]},
    "drift": {"name": "sine_coupling", "params": [1.0]},
    "edges": {"mode": "static", "p0": [[1.0, 0.0], [0.0, 1.0]]}, "steps": 5
  })";
  const Model m = build_model(scenario_from_json(nlohmann::json::parse(doc)));
  const PathEnsemble p = simulate_interacting(m, StreamKey(2));
  const EmpiricalMeasure single = snapshot_empirical(p, 5, 0);
  CHECK(single.size() == 1);
  CHECK(single.mass() == doctest::Approx(1.0));
  CHECK(single.point(0)[0] == p.z_at(0, 5)[0]);

  const EdgeSystem g = sample_static_graph(m.membership, m.edges, StreamKey(2));
  const EmpiricalMeasure cut = snapshot_empirical(p, 5, 1, PathSet::kInteracting, 0, &g);
  CHECK(cut.size() == 0);
  CHECK(cut.mass() == 0.0);
  const EmpiricalMeasure whole = snapshot_empirical(p, 5, 1, PathSet::kInteracting, 3, &g);
  const EmpiricalMeasure all = snapshot_empirical(p, 5, 1);
  CHECK(whole.points == all.points);
  CHECK(whole.weights == all.weights);
}

TEST_CASE("non-finite states are reported") {
  ScenarioConfig c = test::scenario("constant", {1.0}, 4, 0.5, 1);
  c.initial = {{"point", {1.79e308}}};
  c.diffusion = {{{"scaled_identity", {0.0}}}};
  c.horizon = 1e306;
  CHECK_THROWS_AS(simulate_interacting(build_model(c), StreamKey(1)), Error);
}
