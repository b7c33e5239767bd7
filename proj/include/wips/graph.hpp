#pragma once

#include <bit>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "wips/membership.hpp"
#include "wips/rng.hpp"

namespace wips {

enum class EdgeMode { kStatic, kMarkov };

/// Uniform time grid 0 = t_0 < ... < t_M = horizon.
struct TimeGrid {
  double horizon = 1.0;
  int steps = 200;

  double dt() const noexcept { return horizon / steps; }
  double time(int k) const noexcept { return k == steps ? horizon : dt() * k; }
};

/// Type-pair edge law. Matrices are K x K row-major and symmetric.
struct EdgeModel {
  EdgeMode mode = EdgeMode::kStatic;
  int types = 1;
  std::vector<double> p0;      ///< p_{ag}(0)
  std::vector<double> lambda;  ///< off -> on rate (markov)
  std::vector<double> mu;      ///< on -> off rate (markov)

  static EdgeModel static_uniform(int types, double p);
  static EdgeModel markov_uniform(int types, double p0, double lambda, double mu);

  double initial(int a, int g) const { return p0[index(a, g)]; }
  double on_rate(int a, int g) const { return lambda[index(a, g)]; }
  double off_rate(int a, int g) const { return mu[index(a, g)]; }
  /// Marginal edge probability p_{ag}(t).
  double probability(int a, int g, double t) const;
  /// Throws unless probabilities are in [0,1], symmetric, and rates positive in markov mode.
  void validate() const;

 private:
  std::size_t index(int a, int g) const { return static_cast<std::size_t>(a * types + g); }
};

/// p0 e^{-(l+m)t} + l/(l+m) (1 - e^{-(l+m)t}).
double marginal_edge_probability(double t, double p0, double lambda, double mu);

/// Exact two-state transition over dt: {P(0 -> 1), P(1 -> 1)}.
std::pair<double, double> markov_transition(double dt, double lambda, double mu);

/// p-bar: minimum edge probability over type pairs and grid times.
double pbar(const EdgeModel& model, const TimeGrid& grid);

/// Symmetric {0,1} edge state with unit diagonal. Only pairs i < j are
/// stored, bit-packed row by row (each row padded to whole words).
class EdgeSystem {
 public:
  EdgeSystem() = default;
  EdgeSystem(const MembershipMap& membership, EdgeModel model);

  std::size_t size() const noexcept { return n_; }
  EdgeMode mode() const noexcept { return model_.mode; }
  const EdgeModel& model() const noexcept { return model_; }
  const std::vector<int>& types() const noexcept { return types_; }
  double current_time() const noexcept { return time_; }
  std::uint32_t step_index() const noexcept { return step_; }

  bool edge(std::size_t i, std::size_t j) const;
  void set(std::size_t i, std::size_t j, bool on);
  /// Number of present off-diagonal edges (unordered).
  std::size_t edge_count() const noexcept { return edges_; }
  std::size_t pair_count() const noexcept { return n_ < 2 ? 0 : n_ * (n_ - 1) / 2; }
  /// FNV-1a hash of the packed state.
  std::uint64_t state_hash() const noexcept;

  /// f(i, j) for every present edge with i < j, in row-major order.
  template <class F>
  void for_each_edge(F&& f) const {
    visit<false>(f);
  }
  /// f(i, j) for every absent pair with i < j, in row-major order.
  template <class F>
  void for_each_missing(F&& f) const {
    visit<true>(f);
  }

  /// Row-wise traversal: begin(i), then f(i, j) for each present (or, with
  /// Missing, absent) j > i, then end(i). Lets callers keep row sums local.
  template <bool Missing, class B, class F, class E>
  void for_each_row(B&& begin, F&& f, E&& end) const {
    for (std::size_t i = 0; i < n_; ++i) {
      begin(i);
      if (i + 1 < n_) {
        const std::size_t len = n_ - 1 - i;
        const std::uint64_t* row = bits_.data() + offsets_[i];
        const std::size_t words = (len + 63) / 64;
        for (std::size_t w = 0; w < words; ++w) {
          std::uint64_t word = Missing ? ~row[w] : row[w];
          if (w + 1 == words && len % 64 != 0) word &= (std::uint64_t{1} << (len % 64)) - 1;
          while (word != 0) {
            const int bit = std::countr_zero(word);
            word &= word - 1;
            f(i, i + 1 + w * 64 + static_cast<std::size_t>(bit));
          }
        }
      }
      end(i);
    }
  }

  // Mutation hooks used by the samplers.
  std::uint64_t* row_words(std::size_t i) { return bits_.data() + offsets_[i]; }
  void recount();
  void advance_clock(double dt) {
    time_ += dt;
    ++step_;
  }

 private:
  template <bool Missing, class F>
  void visit(F& f) const {
    for (std::size_t i = 0; i + 1 < n_; ++i) {
      const std::size_t len = n_ - 1 - i;
      const std::uint64_t* row = bits_.data() + offsets_[i];
      const std::size_t words = (len + 63) / 64;
      for (std::size_t w = 0; w < words; ++w) {
        std::uint64_t word = Missing ? ~row[w] : row[w];
        if (w + 1 == words && len % 64 != 0) word &= (std::uint64_t{1} << (len % 64)) - 1;
        while (word != 0) {
          const int bit = std::countr_zero(word);
          word &= word - 1;
          f(i, i + 1 + w * 64 + static_cast<std::size_t>(bit));
        }
      }
    }
  }

  std::size_t n_ = 0;
  EdgeModel model_;
  std::vector<int> types_;
  std::vector<std::uint64_t> bits_;
  std::vector<std::size_t> offsets_;
  std::size_t edges_ = 0;
  double time_ = 0.0;
  std::uint32_t step_ = 0;
};

/// Independent Bernoulli(p_{ag}(0)) edges for every pair i < j. The draw for
/// pair (i, j) depends only on (key, i, j).
EdgeSystem sample_static_graph(const MembershipMap& membership, const EdgeModel& model, const StreamKey& key);

/// Advances every off-diagonal edge by the exact two-state kernel over dt.
/// The draw for pair (i, j) at this step depends only on (key, i, j, step).
void evolve_markov_edges(EdgeSystem& edges, double dt, const StreamKey& key);

/// N_{i,g}: per-vertex neighbour counts by type, self-loop included.
class DegreeCounts {
 public:
  DegreeCounts(std::size_t n, int types) : types_(types), counts_(n * static_cast<std::size_t>(types), 0) {}
  std::size_t at(std::size_t i, int g) const { return counts_[i * static_cast<std::size_t>(types_) + static_cast<std::size_t>(g)]; }
  std::size_t& at(std::size_t i, int g) { return counts_[i * static_cast<std::size_t>(types_) + static_cast<std::size_t>(g)]; }
  int types() const noexcept { return types_; }
  std::size_t size() const noexcept { return types_ == 0 ? 0 : counts_.size() / static_cast<std::size_t>(types_); }

 private:
  int types_;
  std::vector<std::size_t> counts_;
};

DegreeCounts degree_counts(const EdgeSystem& edges, const MembershipMap& membership);

/// Replays the edge process on a time grid from a fixed key. Static graphs
/// never change after step 0; markov graphs evolve once per grid step.
class EdgeProcess {
 public:
  EdgeProcess(const MembershipMap& membership, EdgeModel model, StreamKey key, TimeGrid grid);

  const EdgeSystem& current() const noexcept { return edges_; }
  int step() const noexcept { return step_; }
  /// Move the edge state from grid time t_k to t_{k+1}.
  void advance();
  void reset();

 private:
  MembershipMap membership_;
  EdgeModel model_;
  StreamKey key_;
  TimeGrid grid_;
  EdgeSystem edges_;
  int step_ = 0;
};

/// Run-length snapshot: "step time n runs r1 r2 ...", runs alternate starting
/// with absent edges over the row-major upper triangle.
void write_edge_snapshot(std::ostream& out, const EdgeSystem& edges);
std::vector<std::uint64_t> read_edge_snapshot_runs(std::istream& in, std::uint32_t& step, double& time,
                                                   std::size_t& n);

}  // namespace wips
