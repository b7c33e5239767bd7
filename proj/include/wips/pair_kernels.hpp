#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "wips/particles.hpp"
#include "wips/stats.hpp"

namespace wips {

/// Marginal laws mu_t of the limit system on the grid, represented by a
/// large reference sample (the mean-field ensemble of `simulate_limit`).
/// Single type, identity diffusion.
///
/// For factorized drifts b(x, y) = sum_q c_q(x) g_q(y) the table also holds
///   gbar[t][q]          mean feature over the sample,
///   mmat[t][q][q']      mean of c_q(z) . c_q'(z) over the sample,
///   lambda[t]           mean over y of ghat(y)^T M_t ghat(y),
/// with ghat = g - gbar. lambda_t is the double average of |bbar_t(x,y)|^2.
class LimitLaw {
 public:
  LimitLaw() = default;
  LimitLaw(const Model& model, PathEnsemble reference);

  const Model& model() const noexcept { return model_; }
  const PathEnsemble& reference() const noexcept { return reference_; }
  const TimeGrid& grid() const noexcept { return reference_.grid; }
  int dim() const noexcept { return reference_.dim; }
  std::size_t rank() const noexcept { return rank_; }
  bool factorized() const noexcept { return rank_ > 0; }

  /// Drift of the limit equation b(x, mu_t) at grid index k.
  void drift(int k, std::span<const double> x, std::span<double> out) const;
  /// Centered kernel bbar_t(x, y) = b(x, y) - b(x, mu_t), by direct evaluation.
  void centered_kernel(int k, std::span<const double> x, std::span<const double> y, std::span<double> out) const;
  /// Centered features ghat_t(y) (factorized only).
  void centered_features(int k, std::span<const double> y, std::span<double> out) const;
  /// Coefficient matrix c(x) as d x Q row-major (factorized only).
  void coefficient_matrix(std::span<const double> x, std::span<double> out) const;

  std::span<const double> gbar(int k) const { return {gbar_.data() + static_cast<std::size_t>(k) * rank_, rank_}; }
  std::span<const double> mmat(int k) const {
    return {mmat_.data() + static_cast<std::size_t>(k) * rank_ * rank_, rank_ * rank_};
  }
  /// lambda_t at grid indices 0..M-1 (left points).
  const std::vector<double>& lambda() const noexcept { return lambda_; }
  /// sum_t lambda_t dt.
  double integrated_lambda() const;
  /// sum_t (1 - p(t)) / p(t) lambda_t dt; p must be positive on the grid.
  double sigma_sq(const std::function<double(double)>& p) const;

 private:
  Model model_;
  PathEnsemble reference_;
  std::size_t rank_ = 0;
  std::vector<double> gbar_, mmat_, lambda_;
  mutable std::vector<double> coef_;
};

/// Builds the limit law from a mean-field ensemble of `reference_size`
/// particles drawn from `key`.
LimitLaw build_limit_law(const Model& model, std::size_t reference_size, const StreamKey& key);

/// n i.i.d. paths of the limit equation dX = b(X, mu_t) dt + dW with the law
/// frozen to `law`. Fills x and dw.
PathEnsemble simulate_independent_limit(const LimitLaw& law, std::size_t n, const StreamKey& key);

/// Sample matrices of the kernels h, h^sym and l on R limit paths.
///   H[r][s] = h(w_r, w_s) = sum_t bbar_t(X^r_t, X^s_t) . dW^r_t
///   L[r][s] = sum_t m_t(X^r_t, X^s_t) dt
struct PairKernelCache {
  Eigen::MatrixXd h;
  Eigen::MatrixXd l;
  std::size_t size() const noexcept { return static_cast<std::size_t>(h.rows()); }
  Eigen::MatrixXd h_sym() const { return 0.5 * (h + h.transpose()); }
};

/// Factorized route: H = U V^T with U[r][(t,q)] = (c_q(X^r_t) . dW^r_t) and
/// V[s][(t,q)] = ghat_{t,q}(X^s_t). Requires a factorized drift.
PairKernelCache pair_kernels(const PathEnsemble& paths, const LimitLaw& law);
/// Reference route: one centered_kernel evaluation per (r, s, t), and m_t by
/// averaging over the marginal sample. O(R^2 M N_ref); for small checks only.
PairKernelCache pair_kernels_direct(const PathEnsemble& paths, const LimitLaw& law);

/// U-statistic estimate over ordered pairs r != s of a kernel matrix entry
/// f(r, s), symmetrized; standard error from the Hoeffding decomposition
/// Var ~ 4 zeta_1 / R + 2 zeta_2 / (R (R - 1)).
MeanEstimate offdiagonal_mean(const Eigen::MatrixXd& f);

struct TraceCheck {
  MeanEstimate trace_aa;  ///< mean of H[r,s]^2, r != s
  double integrated_lambda = 0.0;
  MeanEstimate trace_a2;  ///< mean of H[r,s] H[s,r], r != s
};
TraceCheck trace_identities(const PairKernelCache& cache, const LimitLaw& law);

struct VarianceTargets {
  std::vector<double> lambda;  ///< per left grid point
  double integrated_lambda = 0.0;
  double sigma_sq = 0.0;
};
/// lambda_t table, its time integral and sigma^2 = sum (1 - p) / p lambda dt.
/// Throws when p vanishes on the grid.
VarianceTargets variance_targets(const LimitLaw& law, const std::function<double(double)>& p);

struct NystromResult {
  double value = 0.0;
  double rcond = 0.0;
};
/// Solves (I - H0^T / R) u = phi, (I - H0^T / R) v = psi, where H0 is H with
/// its diagonal set to 0, and returns u . v / R. A acts on f by integrating
/// h(w', w) f(w') over the first argument, hence the transpose. Throws
/// kNumerical when the reciprocal condition estimate is below `min_rcond`.
NystromResult nystrom_covariance(const PairKernelCache& cache, std::span<const double> phi,
                                 std::span<const double> psi, double min_rcond = 1e-10);

}  // namespace wips
