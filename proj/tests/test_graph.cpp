#include <cmath>
#include <sstream>

#include "doctest.h"
#include "wips/error.hpp"
#include "wips/graph.hpp"
#include "wips/stats.hpp"

using namespace wips;

TEST_CASE("complete and empty graphs") {
  const MembershipMap m({3, 4});
  const EdgeSystem full = sample_static_graph(m, EdgeModel::static_uniform(2, 1.0), StreamKey(1));
  CHECK(full.edge_count() == full.pair_count());
  const DegreeCounts dc = degree_counts(full, m);
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(dc.at(i, 0) == 3);
    CHECK(dc.at(i, 1) == 4);
  }
  const EdgeSystem empty = sample_static_graph(m, EdgeModel::static_uniform(2, 0.0), StreamKey(1));
  CHECK(empty.edge_count() == 0);
  const DegreeCounts de = degree_counts(empty, m);
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(de.at(i, m.type_of(i)) == 1);
    CHECK(de.at(i, 1 - m.type_of(i)) == 0);
    CHECK(empty.edge(i, i));
  }
}

TEST_CASE("bernoulli edge frequency and degrees") {
  const MembershipMap m({2000});
  const EdgeSystem g = sample_static_graph(m, EdgeModel::static_uniform(1, 0.3), StreamKey(5));
  const double pairs = static_cast<double>(g.pair_count());
  const double freq = static_cast<double>(g.edge_count()) / pairs;
  CHECK(std::abs(freq - 0.3) < 3.0 * binomial_se(0.3, g.pair_count()));

  const MembershipMap small({400});
  const EdgeSystem h = sample_static_graph(small, EdgeModel::static_uniform(1, 0.3), StreamKey(6));
  const DegreeCounts dc = degree_counts(h, small);
  std::vector<double> deg;
  for (std::size_t i = 0; i < small.size(); ++i) deg.push_back(static_cast<double>(dc.at(i, 0)) - 1.0);
  const MeanEstimate e = mean_estimate(deg);
  // Degrees share edges: the mean degree is 2 E / n.
  const double se = 2.0 * std::sqrt(0.3 * 0.7 * static_cast<double>(h.pair_count())) / 400.0;
  CHECK(std::abs(e.value - 399.0 * 0.3) < 3.0 * se);
}

TEST_CASE("adjacency symmetry, unit diagonal, traversal") {
  const MembershipMap m({70});
  EdgeSystem g = sample_static_graph(m, EdgeModel::static_uniform(1, 0.4), StreamKey(2));
  for (std::size_t i = 0; i < 70; ++i)
    for (std::size_t j = 0; j < 70; ++j) CHECK(g.edge(i, j) == g.edge(j, i));
  std::size_t seen = 0, missing = 0;
  g.for_each_edge([&](std::size_t i, std::size_t j) {
    CHECK(i < j);
    CHECK(g.edge(i, j));
    ++seen;
  });
  g.for_each_missing([&](std::size_t i, std::size_t j) {
    CHECK_FALSE(g.edge(i, j));
    ++missing;
  });
  CHECK(seen == g.edge_count());
  CHECK(seen + missing == g.pair_count());
  g.set(3, 9, true);
  g.set(9, 3, false);
  CHECK_FALSE(g.edge(3, 9));
  CHECK_THROWS_AS(g.set(4, 4, false), Error);
}

TEST_CASE("two-state chain closed forms") {
  CHECK(marginal_edge_probability(0.0, 0.37, 1.0, 3.0) == doctest::Approx(0.37));
  CHECK(marginal_edge_probability(2.5, 0.25, 1.0, 3.0) == doctest::Approx(0.25));
  CHECK(marginal_edge_probability(1.0, 0.9, 1.0, 3.0) == doctest::Approx(0.25 + 0.65 * std::exp(-4.0)).epsilon(1e-14));
  CHECK(marginal_edge_probability(1.0, 0.9, 1.0, 3.0) == doctest::Approx(0.26190).epsilon(1e-4));
  const double dt = std::log(2.0) / 2.0;
  CHECK(marginal_edge_probability(dt, 0.0, 1.0, 1.0) == doctest::Approx(0.25));
  const auto [off_on, on_on] = markov_transition(dt, 1.0, 1.0);
  CHECK(off_on == doctest::Approx(0.25));
  CHECK(on_on == doctest::Approx(0.75));
  const auto [z_on, z_stay] = markov_transition(0.1, 0.0, 2.0);
  CHECK(z_on == 0.0);
  CHECK(z_stay == doctest::Approx(std::exp(-0.2)));
}

TEST_CASE("averaged edge probability") {
  const TimeGrid grid{1.0, 200};
  CHECK(pbar(EdgeModel::static_uniform(1, 0.3), grid) == doctest::Approx(0.3));
  CHECK(pbar(EdgeModel::markov_uniform(1, 0.5, 1.0, 1.0), grid) == doctest::Approx(0.5));
  EdgeModel two = EdgeModel::static_uniform(2, 0.3);
  two.p0 = {0.3, 0.1, 0.1, 0.6};
  CHECK(pbar(two, grid) == doctest::Approx(0.1));
}

TEST_CASE("markov edges keep the stationary law") {
  const MembershipMap m({300});
  EdgeProcess proc(m, EdgeModel::markov_uniform(1, 0.25, 1.0, 3.0), StreamKey(8), TimeGrid{1.0, 20});
  for (int k = 0; k < 20; ++k) {
    proc.advance();
    const auto& g = proc.current();
    const double f = static_cast<double>(g.edge_count()) / static_cast<double>(g.pair_count());
    CHECK(std::abs(f - 0.25) < 4.0 * binomial_se(0.25, g.pair_count()));
  }
}

TEST_CASE("absorbing off state and mode checks") {
  const MembershipMap m({50});
  EdgeProcess proc(m, EdgeModel::markov_uniform(1, 0.0, 0.0, 1.0), StreamKey(9), TimeGrid{1.0, 10});
  for (int k = 0; k < 10; ++k) {
    proc.advance();
    CHECK(proc.current().edge_count() == 0);
  }
  EdgeSystem s = sample_static_graph(m, EdgeModel::static_uniform(1, 0.5), StreamKey(1));
  CHECK_THROWS_AS(evolve_markov_edges(s, 0.1, StreamKey(1)), Error);
}

TEST_CASE("edge processes replay from the key") {
  const MembershipMap m({3, 40});
  EdgeModel model = EdgeModel::markov_uniform(2, 0.5, 2.0, 1.0);
  EdgeProcess a(m, model, StreamKey(4), TimeGrid{1.0, 10});
  EdgeProcess b(m, model, StreamKey(4), TimeGrid{1.0, 10});
  for (int k = 0; k < 10; ++k) {
    a.advance();
    b.advance();
    CHECK(a.current().state_hash() == b.current().state_hash());
  }
  a.reset();
  EdgeProcess c(m, model, StreamKey(4), TimeGrid{1.0, 10});
  CHECK(a.current().state_hash() == c.current().state_hash());
}

TEST_CASE("edge snapshots round-trip") {
  const MembershipMap m({90});
  const EdgeSystem g = sample_static_graph(m, EdgeModel::static_uniform(1, 0.2), StreamKey(3));
  std::stringstream io;
  write_edge_snapshot(io, g);
  std::uint32_t step = 99;
  double time = -1.0;
  std::size_t n = 0;
  const auto runs = read_edge_snapshot_runs(io, step, time, n);
  CHECK(n == 90);
  CHECK(step == 0);
  CHECK(time == 0.0);
  std::uint64_t total = 0, on = 0;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    total += runs[k];
    if (k % 2 == 1) on += runs[k];
  }
  CHECK(total == g.pair_count());
  CHECK(on == g.edge_count());
}
