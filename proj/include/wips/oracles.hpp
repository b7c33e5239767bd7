#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "wips/rng.hpp"

namespace wips {

struct BinomialSpec {
  std::size_t n = 0;
  double p = 0.0;
  double q() const noexcept { return 1.0 - p; }
};

/// E[1 / (X + m)^r] for X ~ Binomial(n, p) by summing the pmf.
double binomial_inverse_moment_enumerated(const BinomialSpec& spec, int m, int r);

struct InverseMoment {
  double value = 0.0;
  bool exact = false;  ///< false: an upper bound
};

/// Closed form for (m, r) = (1, 1), value 1 at p = 0 by continuity. For
/// r = 1, m >= 2 the bound (1 - q^{n+1}) / ((n + m) p); for m = 1, r >= 2 the
/// bound r^r / ((n + 1)^r p^r). Other (m, r) combinations are rejected.
InverseMoment binomial_inverse_moment(const BinomialSpec& spec, int m, int r);

/// One row of a lemma diagnostic table.
struct OracleRow {
  std::string statistic;
  double bound = 0.0;
  double empirical = 0.0;
  double se = 0.0;
  /// bound + 3 se - empirical; non-negative means the check holds.
  double margin() const noexcept { return bound + 3.0 * se - empirical; }
  bool pass() const noexcept { return margin() >= 0.0; }
};

/// Monte Carlo means of the two neighbour-sum statistics on a two-block
/// Bernoulli(p) graph: a type-alpha block of size n_alpha and a type-gamma
/// block of size n_gamma, edges inside alpha and between the blocks.
///   first:  (sum_{k in alpha} N_g zeta_{k i_g} / (N_a N_{k,g}) 1{N_{k,g} > 0} - 1)^2
///           against 4 / (N_a p) + 2 exp(-N_g p)
///   second: (sum_{k in alpha} zeta_{k i_a} / N_{k,a} - 1)^2 against 3 / (N_a p)
/// N_{k,a} includes the self-loop.
std::vector<OracleRow> neighbor_sum_checks(std::size_t n_alpha, std::size_t n_gamma, double p,
                                           std::size_t replications, const StreamKey& key);

/// Y = 1 + Binomial(N - 1, p): frequency of |Y - N p| > sqrt(k (N-1) log N) + 1
/// against 2 / N^{2k}.
OracleRow degree_tail_check(std::size_t n, double p, double k, std::size_t replications, const StreamKey& key);

}  // namespace wips
