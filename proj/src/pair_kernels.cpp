#include "wips/pair_kernels.hpp"

#include <cmath>

#include "wips/error.hpp"

namespace wips {

LimitLaw::LimitLaw(const Model& model, PathEnsemble reference) : model_(model), reference_(std::move(reference)) {
  require(model_.membership.types() == 1, Error::Code::kConfig, "the limit-law machinery is single-type only");
  require(model_.kernels.identity_diffusion(), Error::Code::kConfig, "the limit-law machinery needs identity diffusion");
  require(reference_.has_x() && reference_.n >= 2, Error::Code::kInvalidArgument,
          "limit law needs a mean-field reference sample");
  const PairKernel& b = model_.kernels.drift(0, 0);
  rank_ = static_cast<std::size_t>(b.rank());
  if (rank_ == 0) return;
  const auto d = static_cast<std::size_t>(dim());
  const std::size_t q = rank_;
  const std::size_t m = reference_.points();
  const double inv_n = 1.0 / static_cast<double>(reference_.n);
  gbar_.assign(m * q, 0.0);
  mmat_.assign(m * q * q, 0.0);
  lambda_.assign(m - 1, 0.0);
  coef_.resize(q * d);
  std::vector<double> g(q), gh(q);
  for (std::size_t k = 0; k < m; ++k) {
    double* gb = gbar_.data() + k * q;
    double* mm = mmat_.data() + k * q * q;
    for (std::size_t j = 0; j < reference_.n; ++j) {
      auto y = reference_.x_at(j, static_cast<int>(k));
      b.features(y, g);
      for (std::size_t a = 0; a < q; ++a) gb[a] += g[a];
      b.coefficients(y, coef_);
      for (std::size_t a = 0; a < q; ++a)
        for (std::size_t c = 0; c < q; ++c) {
          double s = 0.0;
          for (std::size_t e = 0; e < d; ++e) s += coef_[a * d + e] * coef_[c * d + e];
          mm[a * q + c] += s;
        }
    }
    for (std::size_t a = 0; a < q; ++a) gb[a] *= inv_n;
    for (std::size_t a = 0; a < q * q; ++a) mm[a] *= inv_n;
    if (k + 1 == m) break;
    double lam = 0.0;
    for (std::size_t j = 0; j < reference_.n; ++j) {
      b.features(reference_.x_at(j, static_cast<int>(k)), g);
      for (std::size_t a = 0; a < q; ++a) gh[a] = g[a] - gb[a];
      for (std::size_t a = 0; a < q; ++a)
        for (std::size_t c = 0; c < q; ++c) lam += gh[a] * mm[a * q + c] * gh[c];
    }
    lambda_[k] = lam * inv_n;
  }
}

void LimitLaw::drift(int k, std::span<const double> x, std::span<double> out) const {
  const PairKernel& b = model_.kernels.drift(0, 0);
  const auto d = static_cast<std::size_t>(dim());
  std::fill(out.begin(), out.end(), 0.0);
  if (factorized()) {
    coef_.resize(rank_ * d);
    b.coefficients(x, coef_);
    auto gb = gbar(k);
    for (std::size_t q = 0; q < rank_; ++q)
      for (std::size_t e = 0; e < d; ++e) out[e] += coef_[q * d + e] * gb[q];
    return;
  }
  std::vector<double> v(d);
  for (std::size_t j = 0; j < reference_.n; ++j) {
    b.eval(x, reference_.x_at(j, k), v);
    for (std::size_t e = 0; e < d; ++e) out[e] += v[e];
  }
  for (std::size_t e = 0; e < d; ++e) out[e] /= static_cast<double>(reference_.n);
}

void LimitLaw::centered_kernel(int k, std::span<const double> x, std::span<const double> y,
                               std::span<double> out) const {
  const auto d = static_cast<std::size_t>(dim());
  std::vector<double> mean(d);
  drift(k, x, mean);
  model_.kernels.drift(0, 0).eval(x, y, out);
  for (std::size_t e = 0; e < d; ++e) out[e] -= mean[e];
}

void LimitLaw::centered_features(int k, std::span<const double> y, std::span<double> out) const {
  require(factorized(), Error::Code::kConfig, "centered features need a factorized drift");
  model_.kernels.drift(0, 0).features(y, out);
  auto gb = gbar(k);
  for (std::size_t q = 0; q < rank_; ++q) out[q] -= gb[q];
}

void LimitLaw::coefficient_matrix(std::span<const double> x, std::span<double> out) const {
  require(factorized(), Error::Code::kConfig, "coefficient matrix needs a factorized drift");
  const auto d = static_cast<std::size_t>(dim());
  coef_.resize(rank_ * d);
  model_.kernels.drift(0, 0).coefficients(x, coef_);
  for (std::size_t e = 0; e < d; ++e)
    for (std::size_t q = 0; q < rank_; ++q) out[e * rank_ + q] = coef_[q * d + e];
}

double LimitLaw::integrated_lambda() const {
  require(factorized(), Error::Code::kConfig, "lambda table needs a factorized drift");
  double s = 0.0;
  for (double l : lambda_) s += l;
  return s * grid().dt();
}

double LimitLaw::sigma_sq(const std::function<double(double)>& p) const {
  require(factorized(), Error::Code::kConfig, "lambda table needs a factorized drift");
  double s = 0.0;
  for (std::size_t k = 0; k < lambda_.size(); ++k) {
    const double pk = p(grid().time(static_cast<int>(k)));
    require(pk > 0.0 && pk <= 1.0, Error::Code::kInvalidArgument, "sigma^2 needs p(t) in (0,1] on the grid");
    s += (1.0 - pk) / pk * lambda_[k];
  }
  return s * grid().dt();
}

LimitLaw build_limit_law(const Model& model, std::size_t reference_size, const StreamKey& key) {
  return LimitLaw(model, simulate_limit(with_size(model, reference_size), key));
}

PathEnsemble simulate_independent_limit(const LimitLaw& law, std::size_t n, const StreamKey& key) {
  require(n >= 1, Error::Code::kInvalidArgument, "need at least one limit path");
  const Model& model = law.model();
  const auto d = static_cast<std::size_t>(law.dim());
  const TimeGrid grid = law.grid();
  const double dt = grid.dt();
  const double sqrt_dt = std::sqrt(dt);
  PathEnsemble p;
  p.grid = grid;
  p.n = n;
  p.dim = law.dim();
  p.types.assign(n, 0);
  p.x.assign(n * p.path_stride(), 0.0);
  p.dw.assign(n * p.noise_stride(), 0.0);
  std::vector<double> b(d);
  for (std::size_t i = 0; i < n; ++i) {
    double* path = p.x.data() + i * p.path_stride();
    double* dw = p.dw.data() + i * p.noise_stride();
    model.initial[0].sample(key, static_cast<std::uint32_t>(i), {path, d});
    for (int k = 0; k < grid.steps; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      for (std::size_t c = 0; c < d; c += 2) {
        const auto z = normal_pair(key.block(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(c / 2),
                                             static_cast<std::uint32_t>(k), Domain::kBrownian));
        dw[kk * d + c] = sqrt_dt * z[0];
        if (c + 1 < d) dw[kk * d + c + 1] = sqrt_dt * z[1];
      }
      std::span<const double> x(path + kk * d, d);
      law.drift(k, x, b);
      for (std::size_t c = 0; c < d; ++c) {
        const double v = x[c] + b[c] * dt + dw[kk * d + c];
        require(std::isfinite(v), Error::Code::kNumerical, "limit path became non-finite");
        path[(kk + 1) * d + c] = v;
      }
    }
  }
  return p;
}

namespace {

void check_grid(const PathEnsemble& paths, const LimitLaw& law) {
  require(paths.has_x(), Error::Code::kInvalidArgument, "pair kernels need limit paths");
  require(paths.grid.steps == law.grid().steps && paths.grid.horizon == law.grid().horizon &&
              paths.dim == law.dim(),
          Error::Code::kInvalidArgument, "pair kernels: path grid does not match the limit law");
}

}  // namespace

PairKernelCache pair_kernels(const PathEnsemble& paths, const LimitLaw& law) {
  check_grid(paths, law);
  require(law.factorized(), Error::Code::kConfig, "pair_kernels needs a factorized drift; use the direct route");
  const auto r = static_cast<Eigen::Index>(paths.n);
  const auto m = static_cast<std::size_t>(paths.grid.steps);
  const std::size_t q = law.rank();
  const auto d = static_cast<std::size_t>(paths.dim);
  const double dt = paths.grid.dt();
  const auto cols = static_cast<Eigen::Index>(m * q);
  Eigen::MatrixXd u(r, cols), v(r, cols), w(r, cols);
  std::vector<double> cm(d * q), gh(q);
  for (Eigen::Index s = 0; s < r; ++s) {
    const auto si = static_cast<std::size_t>(s);
    for (std::size_t k = 0; k < m; ++k) {
      const int kk = static_cast<int>(k);
      auto x = paths.x_at(si, kk);
      auto dw = paths.dw_at(si, kk);
      law.coefficient_matrix(x, cm);
      law.centered_features(kk, x, gh);
      auto mm = law.mmat(kk);
      for (std::size_t a = 0; a < q; ++a) {
        double ua = 0.0;
        for (std::size_t e = 0; e < d; ++e) ua += cm[e * q + a] * dw[e];
        double wa = 0.0;
        for (std::size_t c = 0; c < q; ++c) wa += gh[c] * mm[c * q + a];
        const auto col = static_cast<Eigen::Index>(k * q + a);
        u(s, col) = ua;
        v(s, col) = gh[a];
        w(s, col) = wa * dt;
      }
    }
  }
  PairKernelCache cache;
  cache.h.noalias() = u * v.transpose();
  cache.l.noalias() = w * v.transpose();
  return cache;
}

PairKernelCache pair_kernels_direct(const PathEnsemble& paths, const LimitLaw& law) {
  check_grid(paths, law);
  const auto r = static_cast<Eigen::Index>(paths.n);
  const int m = paths.grid.steps;
  const auto d = static_cast<std::size_t>(paths.dim);
  const double dt = paths.grid.dt();
  const PathEnsemble& ref = law.reference();
  PairKernelCache cache;
  cache.h = Eigen::MatrixXd::Zero(r, r);
  cache.l = Eigen::MatrixXd::Zero(r, r);
  std::vector<double> v(d), v2(d);
  for (Eigen::Index a = 0; a < r; ++a)
    for (Eigen::Index b = 0; b < r; ++b) {
      const auto ai = static_cast<std::size_t>(a);
      const auto bi = static_cast<std::size_t>(b);
      double h = 0.0, l = 0.0;
      for (int k = 0; k < m; ++k) {
        law.centered_kernel(k, paths.x_at(ai, k), paths.x_at(bi, k), v);
        auto dw = paths.dw_at(ai, k);
        for (std::size_t e = 0; e < d; ++e) h += v[e] * dw[e];
        double mk = 0.0;
        for (std::size_t z = 0; z < ref.n; ++z) {
          law.centered_kernel(k, ref.x_at(z, k), paths.x_at(ai, k), v);
          law.centered_kernel(k, ref.x_at(z, k), paths.x_at(bi, k), v2);
          for (std::size_t e = 0; e < d; ++e) mk += v[e] * v2[e];
        }
        l += mk / static_cast<double>(ref.n) * dt;
      }
      cache.h(a, b) = h;
      cache.l(a, b) = l;
    }
  return cache;
}

MeanEstimate offdiagonal_mean(const Eigen::MatrixXd& f) {
  const Eigen::Index r = f.rows();
  require(r >= 3 && f.cols() == r, Error::Code::kInvalidArgument, "offdiagonal_mean needs a square matrix, R >= 3");
  const double rd = static_cast<double>(r);
  std::vector<double> row(static_cast<std::size_t>(r), 0.0);
  double total = 0.0, total_sq = 0.0;
  for (Eigen::Index a = 0; a < r; ++a)
    for (Eigen::Index b = 0; b < r; ++b) {
      if (a == b) continue;
      const double s = 0.5 * (f(a, b) + f(b, a));
      row[static_cast<std::size_t>(a)] += s;
      total += s;
      total_sq += s * s;
    }
  const double pairs = rd * (rd - 1.0);
  const double theta = total / pairs;
  const double zeta2 = std::max(total_sq / pairs - theta * theta, 0.0);
  for (double& x : row) x /= rd - 1.0;
  const double row_var = variance(row);
  const double zeta1 = std::max(row_var - zeta2 / (rd - 1.0), 0.0);
  MeanEstimate e;
  e.count = static_cast<std::size_t>(pairs);
  e.value = theta;
  e.se = std::sqrt(4.0 * zeta1 / rd + 2.0 * zeta2 / pairs);
  return e;
}

TraceCheck trace_identities(const PairKernelCache& cache, const LimitLaw& law) {
  TraceCheck t;
  t.trace_aa = offdiagonal_mean(cache.h.cwiseAbs2());
  t.trace_a2 = offdiagonal_mean(cache.h.cwiseProduct(cache.h.transpose()));
  t.integrated_lambda = law.integrated_lambda();
  return t;
}

VarianceTargets variance_targets(const LimitLaw& law, const std::function<double(double)>& p) {
  VarianceTargets v;
  v.lambda = law.lambda();
  v.integrated_lambda = law.integrated_lambda();
  v.sigma_sq = law.sigma_sq(p);
  return v;
}

NystromResult nystrom_covariance(const PairKernelCache& cache, std::span<const double> phi,
                                 std::span<const double> psi, double min_rcond) {
  const Eigen::Index r = cache.h.rows();
  require(r >= 1 && phi.size() == static_cast<std::size_t>(r) && psi.size() == static_cast<std::size_t>(r),
          Error::Code::kInvalidArgument, "nystrom: one value per sample path expected");
  Eigen::MatrixXd op = -cache.h.transpose() / static_cast<double>(r);
  op.diagonal().setOnes();
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(op);
  NystromResult out;
  out.rcond = lu.rcond();
  if (!(out.rcond >= min_rcond)) {
    fail(Error::Code::kNumerical,
         "nystrom: I - A is near singular (rcond estimate " + std::to_string(out.rcond) + ")");
  }
  const Eigen::Map<const Eigen::VectorXd> f(phi.data(), r), g(psi.data(), r);
  const Eigen::VectorXd u = lu.solve(f);
  const Eigen::VectorXd v = lu.solve(g);
  out.value = u.dot(v) / static_cast<double>(r);
  return out;
}

}  // namespace wips
