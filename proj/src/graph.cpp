#include "wips/graph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "wips/error.hpp"

namespace wips {

EdgeModel EdgeModel::static_uniform(int types, double p) {
  EdgeModel m;
  m.mode = EdgeMode::kStatic;
  m.types = types;
  m.p0.assign(static_cast<std::size_t>(types * types), p);
  return m;
}

EdgeModel EdgeModel::markov_uniform(int types, double p0, double lambda, double mu) {
  EdgeModel m;
  m.mode = EdgeMode::kMarkov;
  m.types = types;
  const auto k = static_cast<std::size_t>(types * types);
  m.p0.assign(k, p0);
  m.lambda.assign(k, lambda);
  m.mu.assign(k, mu);
  return m;
}

double EdgeModel::probability(int a, int g, double t) const {
  if (mode == EdgeMode::kStatic) return initial(a, g);
  return marginal_edge_probability(t, initial(a, g), on_rate(a, g), off_rate(a, g));
}

void EdgeModel::validate() const {
  const auto k = static_cast<std::size_t>(types * types);
  require(types >= 1 && p0.size() == k, Error::Code::kConfig, "edge model: p0 must be a K x K matrix");
  for (int a = 0; a < types; ++a) {
    for (int g = 0; g < types; ++g) {
      const double p = initial(a, g);
      require(p >= 0.0 && p <= 1.0, Error::Code::kConfig, "edge model: probabilities must lie in [0,1]");
      require(p == initial(g, a), Error::Code::kConfig, "edge model: p0 must be symmetric");
    }
  }
  if (mode == EdgeMode::kMarkov) {
    require(lambda.size() == k && mu.size() == k, Error::Code::kConfig,
            "edge model: markov mode needs K x K lambda and mu");
    for (int a = 0; a < types; ++a) {
      for (int g = 0; g < types; ++g) {
        require(on_rate(a, g) >= 0.0 && off_rate(a, g) >= 0.0 && on_rate(a, g) + off_rate(a, g) > 0.0 &&
                    std::isfinite(on_rate(a, g)) && std::isfinite(off_rate(a, g)),
                Error::Code::kConfig, "edge model: markov rates must be non-negative with a positive sum");
        require(on_rate(a, g) == on_rate(g, a) && off_rate(a, g) == off_rate(g, a), Error::Code::kConfig,
                "edge model: rates must be symmetric");
      }
    }
  }
}

double marginal_edge_probability(double t, double p0, double lambda, double mu) {
  require(t >= 0.0, Error::Code::kInvalidArgument, "marginal_edge_probability: negative time");
  require(lambda >= 0.0 && mu >= 0.0 && lambda + mu > 0.0, Error::Code::kInvalidArgument,
          "marginal_edge_probability: rates must be non-negative with positive sum");
  const double total = lambda + mu;
  const double decay = std::exp(-total * t);
  return p0 * decay + (lambda / total) * (1.0 - decay);
}

std::pair<double, double> markov_transition(double dt, double lambda, double mu) {
  require(lambda >= 0.0 && mu >= 0.0 && lambda + mu > 0.0, Error::Code::kInvalidArgument,
          "markov_transition: rates must be non-negative with positive sum");
  const double stationary = lambda / (lambda + mu);
  const double decay = std::exp(-(lambda + mu) * dt);
  return {stationary * (1.0 - decay), stationary + (1.0 - stationary) * decay};
}

double pbar(const EdgeModel& model, const TimeGrid& grid) {
  double best = 1.0;
  for (int a = 0; a < model.types; ++a) {
    for (int g = 0; g < model.types; ++g) {
      if (model.mode == EdgeMode::kStatic) {
        best = std::min(best, model.initial(a, g));
        continue;
      }
      for (int k = 0; k <= grid.steps; ++k) best = std::min(best, model.probability(a, g, grid.time(k)));
      // The marginal is monotone in t, so the endpoints bound the grid minimum.
      best = std::min({best, model.probability(a, g, 0.0), model.probability(a, g, grid.horizon)});
    }
  }
  return best;
}

EdgeSystem::EdgeSystem(const MembershipMap& membership, EdgeModel model)
    : n_(membership.size()), model_(std::move(model)), types_(membership.assignments()) {
  require(model_.types == membership.types(), Error::Code::kInvalidArgument,
          "edge model and membership disagree on the number of types");
  offsets_.resize(n_ + 1, 0);
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t len = n_ - 1 - i;
    offsets_[i + 1] = offsets_[i] + (len + 63) / 64;
  }
  bits_.assign(offsets_[n_], 0);
}

bool EdgeSystem::edge(std::size_t i, std::size_t j) const {
  if (i == j) return true;
  if (i > j) std::swap(i, j);
  const std::size_t pos = j - i - 1;
  return (bits_[offsets_[i] + pos / 64] >> (pos % 64)) & 1u;
}

void EdgeSystem::set(std::size_t i, std::size_t j, bool on) {
  require(i != j, Error::Code::kInvalidArgument, "diagonal edges are fixed to 1");
  if (i > j) std::swap(i, j);
  const std::size_t pos = j - i - 1;
  std::uint64_t& word = bits_[offsets_[i] + pos / 64];
  const std::uint64_t mask = std::uint64_t{1} << (pos % 64);
  const bool was = (word & mask) != 0;
  if (was == on) return;
  word ^= mask;
  edges_ = on ? edges_ + 1 : edges_ - 1;
}

void EdgeSystem::recount() {
  std::size_t total = 0;
  for (std::uint64_t w : bits_) total += static_cast<std::size_t>(std::popcount(w));
  edges_ = total;
}

std::uint64_t EdgeSystem::state_hash() const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint64_t w : bits_) {
    for (int b = 0; b < 8; ++b) {
      h ^= (w >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

namespace {

// Fills row i of the upper triangle. `threshold(j)` gives the 32-bit
// success threshold for pair (i, j); pairs are drawn in blocks of four
// consecutive j sharing one Philox evaluation.
template <class Threshold>
void fill_row(EdgeSystem& edges, std::size_t i, const StreamKey& key, std::uint32_t step, Domain domain,
              Threshold&& threshold) {
  const std::size_t n = edges.size();
  std::uint64_t* row = edges.row_words(i);
  Philox4x32::Counter block{};
  std::size_t cached = static_cast<std::size_t>(-1);
  for (std::size_t j = i + 1; j < n; ++j) {
    const std::size_t group = j >> 2;
    if (group != cached) {
      block = key.block(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(group), step, domain);
      cached = group;
    }
    const std::uint32_t word = block[j & 3];
    const std::size_t pos = j - i - 1;
    const std::uint64_t mask = std::uint64_t{1} << (pos % 64);
    if (static_cast<std::uint64_t>(word) < threshold(j, (row[pos / 64] & mask) != 0))
      row[pos / 64] |= mask;
    else
      row[pos / 64] &= ~mask;
  }
}

}  // namespace

EdgeSystem sample_static_graph(const MembershipMap& membership, const EdgeModel& model, const StreamKey& key) {
  model.validate();
  EdgeSystem edges(membership, model);
  const int k = model.types;
  std::vector<std::uint64_t> thresholds(static_cast<std::size_t>(k * k));
  for (int a = 0; a < k; ++a)
    for (int g = 0; g < k; ++g) thresholds[static_cast<std::size_t>(a * k + g)] = bernoulli_threshold(model.initial(a, g));
  const auto& types = membership.assignments();
  for (std::size_t i = 0; i + 1 < membership.size(); ++i) {
    const std::size_t row_type = static_cast<std::size_t>(types[i] * k);
    fill_row(edges, i, key, 0, Domain::kEdgeInit,
             [&](std::size_t j, bool) { return thresholds[row_type + static_cast<std::size_t>(types[j])]; });
  }
  edges.recount();
  return edges;
}

void evolve_markov_edges(EdgeSystem& edges, double dt, const StreamKey& key) {
  require(edges.mode() == EdgeMode::kMarkov, Error::Code::kModeMismatch,
          "evolve_markov_edges called on a static edge system");
  require(dt > 0.0, Error::Code::kInvalidArgument, "evolve_markov_edges: step must be positive");
  const EdgeModel& model = edges.model();
  const int k = model.types;
  // thresholds[(a*k+g)*2 + state]
  std::vector<std::uint64_t> thresholds(static_cast<std::size_t>(k * k * 2));
  for (int a = 0; a < k; ++a) {
    for (int g = 0; g < k; ++g) {
      const auto [off_on, on_on] = markov_transition(dt, model.on_rate(a, g), model.off_rate(a, g));
      thresholds[static_cast<std::size_t>((a * k + g) * 2)] = bernoulli_threshold(off_on);
      thresholds[static_cast<std::size_t>((a * k + g) * 2 + 1)] = bernoulli_threshold(on_on);
    }
  }
  const std::uint32_t step = edges.step_index() + 1;
  const auto& types = edges.types();
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const std::size_t row_type = static_cast<std::size_t>(types[i] * k);
    fill_row(edges, i, key, step, Domain::kEdgeStep, [&](std::size_t j, bool on) {
      return thresholds[(row_type + static_cast<std::size_t>(types[j])) * 2 + (on ? 1 : 0)];
    });
  }
  edges.recount();
  edges.advance_clock(dt);
}

DegreeCounts degree_counts(const EdgeSystem& edges, const MembershipMap& membership) {
  require(edges.size() == membership.size(), Error::Code::kInvalidArgument, "degree_counts: size mismatch");
  DegreeCounts counts(membership.size(), membership.types());
  for (std::size_t i = 0; i < membership.size(); ++i) counts.at(i, membership.type_of(i)) += 1;
  edges.for_each_edge([&](std::size_t i, std::size_t j) {
    counts.at(i, membership.type_of(j)) += 1;
    counts.at(j, membership.type_of(i)) += 1;
  });
  return counts;
}

EdgeProcess::EdgeProcess(const MembershipMap& membership, EdgeModel model, StreamKey key, TimeGrid grid)
    : membership_(membership), model_(std::move(model)), key_(key), grid_(grid) {
  reset();
}

void EdgeProcess::reset() {
  edges_ = sample_static_graph(membership_, model_, key_);
  step_ = 0;
}

void EdgeProcess::advance() {
  if (model_.mode == EdgeMode::kMarkov) {
    evolve_markov_edges(edges_, grid_.dt(), key_);
  } else {
    edges_.advance_clock(grid_.dt());
  }
  ++step_;
}

void write_edge_snapshot(std::ostream& out, const EdgeSystem& edges) {
  std::vector<std::uint64_t> runs;
  bool state = false;
  std::uint64_t length = 0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    for (std::size_t j = i + 1; j < edges.size(); ++j) {
      const bool on = edges.edge(i, j);
      if (on != state) {
        runs.push_back(length);
        state = on;
        length = 0;
      }
      ++length;
    }
  }
  runs.push_back(length);
  std::ostringstream line;
  line.precision(17);
  line << edges.step_index() << ' ' << edges.current_time() << ' ' << edges.size() << ' ' << runs.size();
  for (auto r : runs) line << ' ' << r;
  out << line.str() << '\n';
}

std::vector<std::uint64_t> read_edge_snapshot_runs(std::istream& in, std::uint32_t& step, double& time,
                                                   std::size_t& n) {
  std::size_t count = 0;
  require(static_cast<bool>(in >> step >> time >> n >> count), Error::Code::kIo, "malformed edge snapshot header");
  std::vector<std::uint64_t> runs(count);
  for (auto& r : runs) require(static_cast<bool>(in >> r), Error::Code::kIo, "truncated edge snapshot");
  return runs;
}

}  // namespace wips
