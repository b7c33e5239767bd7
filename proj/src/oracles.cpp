#include "wips/oracles.hpp"

#include <cmath>

#include "wips/error.hpp"
#include "wips/stats.hpp"

namespace wips {

namespace {

// log C(n, k) via lgamma; exact enough for n <= a few thousand.
double log_choose(std::size_t n, std::size_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

double binomial_pmf(std::size_t n, std::size_t k, double p) {
  if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
  if (p >= 1.0) return k == n ? 1.0 : 0.0;
  const auto kd = static_cast<double>(k);
  const auto nd = static_cast<double>(n);
  return std::exp(log_choose(n, k) + kd * std::log(p) + (nd - kd) * std::log1p(-p));
}

// Bernoulli(p) from one 32-bit word.
struct BitSource {
  StreamKey key;
  std::uint32_t rep;
  std::uint32_t stream;
  std::uint32_t counter = 0;
  Philox4x32::Counter words{};
  int used = 4;

  std::uint32_t next() {
    if (used == 4) {
      words = key.block(rep, stream, counter++, Domain::kOracle);
      used = 0;
    }
    return words[static_cast<std::size_t>(used++)];
  }
};

}  // namespace

double binomial_inverse_moment_enumerated(const BinomialSpec& spec, int m, int r) {
  require(m >= 1 && r >= 1, Error::Code::kInvalidArgument, "inverse moment needs m >= 1 and r >= 1");
  require(spec.p >= 0.0 && spec.p <= 1.0, Error::Code::kInvalidArgument, "p must lie in [0,1]");
  double s = 0.0;
  for (std::size_t k = 0; k <= spec.n; ++k)
    s += binomial_pmf(spec.n, k, spec.p) / std::pow(static_cast<double>(k) + m, r);
  return s;
}

InverseMoment binomial_inverse_moment(const BinomialSpec& spec, int m, int r) {
  require(m >= 1 && r >= 1, Error::Code::kInvalidArgument, "inverse moment needs m >= 1 and r >= 1");
  require(spec.p >= 0.0 && spec.p <= 1.0, Error::Code::kInvalidArgument, "p must lie in [0,1]");
  const double n1 = static_cast<double>(spec.n) + 1.0;
  const double p = spec.p;
  // 1 - q^{n+1} computed as -expm1((n+1) log q) to keep precision for small p.
  const double one_minus = p >= 1.0 ? 1.0 : -std::expm1(n1 * std::log1p(-p));
  if (m == 1 && r == 1) {
    if (p == 0.0) return {1.0, true};
    return {one_minus / (n1 * p), true};
  }
  require(m == 1 || r == 1, Error::Code::kInvalidArgument, "no bound for m >= 2 together with r >= 2");
  require(p > 0.0, Error::Code::kInvalidArgument, "the upper bounds need p > 0");
  if (r == 1) return {one_minus / ((static_cast<double>(spec.n) + m) * p), false};
  return {std::pow(static_cast<double>(r), r) / std::pow(n1 * p, r), false};
}

std::vector<OracleRow> neighbor_sum_checks(std::size_t n_alpha, std::size_t n_gamma, double p,
                                           std::size_t replications, const StreamKey& key) {
  require(p > 0.0 && p <= 1.0, Error::Code::kInvalidArgument, "neighbor_sum_checks: p must lie in (0,1]");
  require(n_alpha >= 2 && n_gamma >= 2, Error::Code::kInvalidArgument, "neighbor_sum_checks: counts must be >= 2");
  require(replications >= 2, Error::Code::kInvalidArgument, "neighbor_sum_checks: need >= 2 replications");
  const std::uint64_t threshold = bernoulli_threshold(p);
  const double na = static_cast<double>(n_alpha);
  const double ng = static_cast<double>(n_gamma);
  std::vector<double> first(replications), second(replications);
  std::vector<std::uint8_t> within(n_alpha * n_alpha), across(n_alpha * n_gamma);
  for (std::size_t rep = 0; rep < replications; ++rep) {
    BitSource bits{key, static_cast<std::uint32_t>(rep), 0};
    for (std::size_t k = 0; k < n_alpha; ++k) {
      within[k * n_alpha + k] = 1;
      for (std::size_t j = k + 1; j < n_alpha; ++j) {
        const std::uint8_t e = bits.next() < threshold ? 1 : 0;
        within[k * n_alpha + j] = e;
        within[j * n_alpha + k] = e;
      }
      for (std::size_t j = 0; j < n_gamma; ++j) across[k * n_gamma + j] = bits.next() < threshold ? 1 : 0;
    }
    // i_gamma = first gamma vertex, i_alpha = first alpha vertex.
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t k = 0; k < n_alpha; ++k) {
      std::size_t nkg = 0, nka = 0;
      for (std::size_t j = 0; j < n_gamma; ++j) nkg += across[k * n_gamma + j];
      for (std::size_t j = 0; j < n_alpha; ++j) nka += within[k * n_alpha + j];
      if (nkg > 0 && across[k * n_gamma] != 0) s1 += ng / (na * static_cast<double>(nkg));
      if (within[k * n_alpha] != 0) s2 += 1.0 / static_cast<double>(nka);
    }
    first[rep] = (s1 - 1.0) * (s1 - 1.0);
    second[rep] = (s2 - 1.0) * (s2 - 1.0);
  }
  const MeanEstimate e1 = mean_estimate(first);
  const MeanEstimate e2 = mean_estimate(second);
  return {
      {"cross_type", 4.0 / (na * p) + 2.0 * std::exp(-ng * p), e1.value, e1.se},
      {"same_type", 3.0 / (na * p), e2.value, e2.se},
  };
}

OracleRow degree_tail_check(std::size_t n, double p, double k, std::size_t replications, const StreamKey& key) {
  require(k > 0.0, Error::Code::kInvalidArgument, "degree_tail_check: k must be positive");
  require(n >= 2, Error::Code::kInvalidArgument, "degree_tail_check: N must be >= 2");
  require(p >= 0.0 && p <= 1.0, Error::Code::kInvalidArgument, "degree_tail_check: p must lie in [0,1]");
  require(replications >= 1, Error::Code::kInvalidArgument, "degree_tail_check: need replications");
  const double nd = static_cast<double>(n);
  const double c = std::sqrt(k * (nd - 1.0) * std::log(nd));
  const std::uint64_t threshold = bernoulli_threshold(p);
  std::size_t exceed = 0;
  for (std::size_t rep = 0; rep < replications; ++rep) {
    BitSource bits{key, static_cast<std::uint32_t>(rep), 1};
    std::size_t y = 1;
    for (std::size_t i = 1; i < n; ++i) y += bits.next() < threshold ? 1 : 0;
    if (std::abs(static_cast<double>(y) - nd * p) > c + 1.0) ++exceed;
  }
  const double freq = static_cast<double>(exceed) / static_cast<double>(replications);
  return {"degree_tail", 2.0 / std::pow(nd, 2.0 * k), freq, binomial_se(freq, replications)};
}

}  // namespace wips
