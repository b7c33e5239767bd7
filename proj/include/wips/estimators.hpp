#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wips/particles.hpp"
#include "wips/stats.hpp"

namespace wips {

// ---------------------------------------------------------------- coupling

struct CouplingError {
  std::vector<double> sup_sq;   ///< per particle max_t |Z_t - X_t|^2
  std::vector<double> sup_abs;  ///< per particle max_t |Z_t - X_t|
  double mean_sup_sq = 0.0;
  double mean_sup_abs = 0.0;
  double max_abs = 0.0;
};

/// Pathwise discrepancy between the interacting and the coupled mean-field
/// system. Throws kInvalidArgument when either path set is missing.
CouplingError coupling_error(const PathEnsemble& paths);

struct RateEntry {
  std::size_t n = 0;
  double nbar = 0.0;
  double pbar = 0.0;
  double error = 0.0;
};

struct RateRow {
  RateEntry entry;
  double np = 0.0;      ///< nbar * pbar
  double scaled = 0.0;  ///< sqrt(np) * error
  bool used = true;     ///< false when the error is below the floor
};

struct RateTable {
  std::vector<RateRow> rows;
  double slope = 0.0;  ///< of log(error) against log(np)
  double intercept = 0.0;
  /// max / min of the scaled column over used rows.
  double scaled_spread = 0.0;
  std::vector<std::string> notes;
};

/// Needs >= 3 entries with increasing nbar * pbar. Errors at or below
/// `floor` are excluded from the fit and noted.
RateTable lln_rate_table(const std::vector<RateEntry>& entries, double floor = 1e-300);

// --------------------------------------------------------- test functions

/// Path functional phi: C_d-path -> R from a small registry, optionally
/// centered by a constant so that its mean over a reference sample is 0.
class TestFunction {
 public:
  TestFunction() = default;
  TestFunction(std::string name, std::vector<double> params);

  const std::string& name() const noexcept { return name_; }
  const std::vector<double>& params() const noexcept { return params_; }
  bool centered() const noexcept { return centered_; }
  double center() const noexcept { return center_; }

  /// phi(path) - center, `path` being (M + 1) x d row-major on `grid`.
  double operator()(std::span<const double> path, int dim, const TimeGrid& grid) const;
  double of_z(const PathEnsemble& paths, std::size_t i) const;
  double of_x(const PathEnsemble& paths, std::size_t i) const;

  /// Subtract the mean over the limit paths of `reference`.
  void center_on(const PathEnsemble& reference);
  void set_center(double c) {
    center_ = c;
    centered_ = true;
  }

 private:
  std::string name_;
  std::vector<double> params_;
  int kind_ = 0;
  std::size_t component_ = 0;
  bool centered_ = false;
  double center_ = 0.0;
};

std::vector<NamedEntry> test_function_registry();

// ------------------------------------------------------------- d_BL proxy

/// Fixed dictionary of functions R^d -> R with sup norm <= 1 and Lipschitz
/// constant <= 1: the constant 1, tanh(x_c - s) and max(0, 1 - |x_c - s|)
/// for shifts s in {-3, -2.5, ..., 3}, cos(w x_c) and sin(w x_c) for
/// w in {0.25, 0.5, 1}, and tanh of the centered Euclidean norm.
struct BLDictionary {
  int dim = 1;
  std::vector<std::string> labels;
  std::vector<std::function<double(std::span<const double>)>> functions;
  std::size_t size() const noexcept { return functions.size(); }
};
BLDictionary default_bl_dictionary(int dim);

/// max_f |<f, a> - <f, b>| over the dictionary: a lower bound of d_BL(a, b).
/// Zero measures are allowed; their mass deficit shows up through the
/// constant function.
double dbl_surrogate(const EmpiricalMeasure& a, const EmpiricalMeasure& b, const BLDictionary& dictionary);

// ------------------------------------------------------ propagation of chaos

/// Per-replication values phi(Z^a) and psi(Z^b) for a fixed list of index
/// pairs, accumulated one replication at a time.
class PocSample {
 public:
  PocSample(std::vector<std::pair<std::size_t, std::size_t>> pairs, bool allow_same = false);

  const std::vector<std::pair<std::size_t, std::size_t>>& pairs() const noexcept { return pairs_; }
  std::size_t replications() const noexcept { return replications_; }
  void add(const PathEnsemble& paths, const TestFunction& phi, const TestFunction& psi);
  void add_values(std::span<const double> phi_values, std::span<const double> psi_values);
  const std::vector<double>& phi() const noexcept { return phi_; }
  const std::vector<double>& psi() const noexcept { return psi_; }

 private:
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  std::size_t replications_ = 0;
  std::vector<double> phi_;  ///< [replication][pair]
  std::vector<double> psi_;
};

struct CovarianceEstimate {
  double value = 0.0;
  double se = 0.0;
  std::size_t replications = 0;
  std::size_t pairs = 0;
};

/// Across-replication covariance of phi(Z^a) and psi(Z^b), averaged over the
/// pair list. Per replication r, q_r = mean over pairs of
/// (phi_r - mean phi)(psi_r - mean psi); the estimate is mean(q) R / (R - 1)
/// and the standard error sd(q) / sqrt(R).
CovarianceEstimate poc_cross_covariance(const PocSample& sample);

/// Covariance of phi(Z^i) and psi(Z^j), i != j, pooled over every ordered pair
/// of an exchangeable system. phi[r][i] and psi[r][i] hold the values of
/// particle i in replication r. Per replication
///   q_r = (sum_{i != j} (phi_ri - m_phi)(psi_rj - m_psi)) / (N (N - 1))
/// with grand means m; the estimate adds back the bias of the estimated means,
/// cov(mean_i phi_r, mean_i psi_r) / R. Standard error sd(q) / sqrt(R).
CovarianceEstimate exchangeable_cross_covariance(const std::vector<std::vector<double>>& phi,
                                                 const std::vector<std::vector<double>>& psi);

/// Disjoint pairs (0,1), (2,3), ... using the first 2 * count particles.
std::vector<std::pair<std::size_t, std::size_t>> disjoint_pairs(std::size_t count);

// ----------------------------------------------------------- fluctuations

/// eta^N(phi) = N^{-1/2} sum_i phi(Z^i). Single-type ensembles only.
double fluctuation_field(const PathEnsemble& paths, const TestFunction& phi, PathSet which = PathSet::kInteracting);

// ---------------------------------------------- symmetric statistics, MWI

/// U^n_k(phi) = sum over i_1 < ... < i_k of phi(Y_{i_1}, ..., Y_{i_k}); 0 when n < k.
double u_statistic(std::span<const double> sample, int k, const std::function<double(std::span<const double>)>& phi);
/// n^{-k/2} U^n_k(phi).
double scaled_u_statistic(std::span<const double> sample, int k,
                          const std::function<double(std::span<const double>)>& phi);

/// C_{k,j} = k! / ((k - 2j)! 2^j j!).
double mwi_coefficient(int k, int j);
/// I_k(phi_k^h) = sum_j (-1)^j C_{k,j} |h|^{2j} I_1^{k-2j}; I_0 = 1.
double mwi_product(double i1, double h_norm_sq, int k);
/// sum_{k <= degree} t^k / k! I_k.
double mwi_generating_sum(double i1, double h_norm_sq, double t, int degree);
/// Bound on |exp(t I_1 - t^2 |h|^2 / 2) - mwi_generating_sum| from the
/// Taylor remainder of exp(t x - t^2 / 2) in t at scale |h|.
double mwi_truncation_bound(double i1, double h_norm_sq, double t, int degree);

}  // namespace wips
