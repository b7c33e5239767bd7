#pragma once

#include <functional>

#include "wips/graph.hpp"
#include "wips/pair_kernels.hpp"

namespace wips {

/// Log-likelihood pieces of the graph system against independent limit
/// paths, as Ito sums on the grid. With acc_i = sum_j xi_ij ghat_t(X^j)
/// (self term included) and c_i = c(X^i_t):
///   J1 += (c_i acc_i / N_i) . dW^i            J2 += |c_i acc_i / N_i|^2 dt
///   J1~ += (c_i acc_i / (N p_N(t))) . dW^i
///   J2~ += (N - 2) / N^2 sum_{j != k} m_t(X^j, X^k) dt + lambda_t / p(t) dt
struct GirsanovValues {
  double j1 = 0.0;
  double j2 = 0.0;
  double j1_tilde = 0.0;
  double j2_tilde = 0.0;
  /// Incomplete U-statistic U_N of the same realisation.
  double u = 0.0;
  double log_density() const noexcept { return j1 - 0.5 * j2; }
};

/// `paths` are i.i.d. limit paths (x and dw) driven by `law`; edges follow
/// `edges` (single type) replayed from `key`. p_N(t) is the edge model's
/// marginal; p(t) defaults to the same function.
GirsanovValues girsanov_functionals(const PathEnsemble& paths, const LimitLaw& law, const EdgeModel& edges,
                                    const StreamKey& key, const std::function<double(double)>& p_limit = nullptr);

/// U_N = (1/N) sum_{i<j} u_N(xi_ij, V^i, V^j) with weights (xi - p_N) / p_N.
double incomplete_u(const PathEnsemble& paths, const LimitLaw& law, const EdgeModel& edges, const StreamKey& key);

/// Same statistic by a direct double loop over pairs, for cross-checks.
double incomplete_u_direct(const PathEnsemble& paths, const LimitLaw& law, const EdgeModel& edges,
                           const StreamKey& key);

}  // namespace wips
