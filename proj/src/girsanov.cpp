#include "wips/girsanov.hpp"

#include <cmath>

#include "wips/error.hpp"

namespace wips {

namespace {

void check_inputs(const PathEnsemble& paths, const LimitLaw& law, const EdgeModel& edges) {
  require(paths.has_x() && paths.n >= 2, Error::Code::kInvalidArgument, "girsanov: need at least two limit paths");
  require(edges.types == 1, Error::Code::kConfig, "girsanov: single-type edge model required");
  require(paths.grid.steps == law.grid().steps && paths.grid.horizon == law.grid().horizon,
          Error::Code::kInvalidArgument, "girsanov: path grid does not match the limit law");
  require(law.factorized(), Error::Code::kConfig, "girsanov: factorized drift required");
}

}  // namespace

GirsanovValues girsanov_functionals(const PathEnsemble& paths, const LimitLaw& law, const EdgeModel& edges,
                                    const StreamKey& key, const std::function<double(double)>& p_limit) {
  check_inputs(paths, law, edges);
  const std::size_t n = paths.n;
  const auto d = static_cast<std::size_t>(paths.dim);
  const std::size_t q = law.rank();
  const double nd = static_cast<double>(n);
  const double dt = paths.grid.dt();
  const MembershipMap membership({n});
  EdgeProcess process(membership, edges, key, paths.grid);

  std::vector<double> gh(n * q), acc(n * q), cnt(n), cm(d * q), total(q), y(d), si(q), mg(q);
  GirsanovValues out;
  for (int k = 0; k < paths.grid.steps; ++k) {
    if (k > 0) process.advance();
    const EdgeSystem& es = process.current();
    const double t = paths.grid.time(k);
    const double pn = edges.probability(0, 0, t);
    require(pn > 0.0, Error::Code::kInvalidArgument, "girsanov: p_N(t) must be positive");
    const double pl = p_limit ? p_limit(t) : pn;
    require(pl > 0.0, Error::Code::kInvalidArgument, "girsanov: p(t) must be positive");

    std::fill(total.begin(), total.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      law.centered_features(k, paths.x_at(j, k), {gh.data() + j * q, q});
      for (std::size_t a = 0; a < q; ++a) total[a] += gh[j * q + a];
    }
    const bool dense = 2 * es.edge_count() > es.pair_count();
    if (dense) {
      for (std::size_t i = 0; i < n; ++i) {
        std::copy(total.begin(), total.end(), acc.begin() + static_cast<std::ptrdiff_t>(i * q));
        cnt[i] = nd;
      }
      es.for_each_missing([&](std::size_t i, std::size_t j) {
        for (std::size_t a = 0; a < q; ++a) {
          acc[i * q + a] -= gh[j * q + a];
          acc[j * q + a] -= gh[i * q + a];
        }
        cnt[i] -= 1.0;
        cnt[j] -= 1.0;
      });
    } else {
      acc = gh;
      std::fill(cnt.begin(), cnt.end(), 1.0);
      es.for_each_edge([&](std::size_t i, std::size_t j) {
        for (std::size_t a = 0; a < q; ++a) {
          acc[i * q + a] += gh[j * q + a];
          acc[j * q + a] += gh[i * q + a];
        }
        cnt[i] += 1.0;
        cnt[j] += 1.0;
      });
    }

    auto mm = law.mmat(k);
    double diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto x = paths.x_at(i, k);
      auto dw = paths.dw_at(i, k);
      law.coefficient_matrix(x, cm);
      const double* ai = acc.data() + i * q;
      const double* gi = gh.data() + i * q;
      for (std::size_t a = 0; a < q; ++a) si[a] = (ai[a] - gi[a]) / pn - (total[a] - gi[a]);
      double j1 = 0.0, j2 = 0.0, u = 0.0;
      for (std::size_t e = 0; e < d; ++e) {
        double v = 0.0, w = 0.0;
        for (std::size_t a = 0; a < q; ++a) {
          v += cm[e * q + a] * ai[a];
          w += cm[e * q + a] * si[a];
        }
        y[e] = v;
        j1 += v * dw[e];
        j2 += v * v;
        u += w * dw[e];
      }
      out.j1 += j1 / cnt[i];
      out.j2 += j2 / (cnt[i] * cnt[i]) * dt;
      out.j1_tilde += j1 / (nd * pn);
      out.u += u / nd;
      for (std::size_t a = 0; a < q; ++a) {
        mg[a] = 0.0;
        for (std::size_t c = 0; c < q; ++c) mg[a] += mm[a * q + c] * gi[c];
      }
      for (std::size_t a = 0; a < q; ++a) diag += gi[a] * mg[a];
    }
    double quad = 0.0;
    for (std::size_t a = 0; a < q; ++a)
      for (std::size_t c = 0; c < q; ++c) quad += total[a] * mm[a * q + c] * total[c];
    out.j2_tilde += ((nd - 2.0) / (nd * nd) * (quad - diag) + law.lambda()[static_cast<std::size_t>(k)] / pl) * dt;
  }
  return out;
}

double incomplete_u(const PathEnsemble& paths, const LimitLaw& law, const EdgeModel& edges, const StreamKey& key) {
  return girsanov_functionals(paths, law, edges, key).u;
}

double incomplete_u_direct(const PathEnsemble& paths, const LimitLaw& law, const EdgeModel& edges,
                           const StreamKey& key) {
  require(paths.has_x() && paths.n >= 2, Error::Code::kInvalidArgument, "incomplete_u: need two limit paths");
  require(edges.types == 1, Error::Code::kConfig, "incomplete_u: single-type edge model required");
  const std::size_t n = paths.n;
  const auto d = static_cast<std::size_t>(paths.dim);
  const MembershipMap membership({n});
  EdgeProcess process(membership, edges, key, paths.grid);
  std::vector<double> v(d);
  double sum = 0.0;
  for (int k = 0; k < paths.grid.steps; ++k) {
    if (k > 0) process.advance();
    const double pn = edges.probability(0, 0, paths.grid.time(k));
    require(pn > 0.0, Error::Code::kInvalidArgument, "incomplete_u: p_N(t) must be positive");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double w = ((process.current().edge(i, j) ? 1.0 : 0.0) - pn) / pn;
        double s = 0.0;
        law.centered_kernel(k, paths.x_at(i, k), paths.x_at(j, k), v);
        for (std::size_t e = 0; e < d; ++e) s += v[e] * paths.dw_at(i, k)[e];
        law.centered_kernel(k, paths.x_at(j, k), paths.x_at(i, k), v);
        for (std::size_t e = 0; e < d; ++e) s += v[e] * paths.dw_at(j, k)[e];
        sum += w * s;
      }
  }
  return sum / static_cast<double>(n);
}

}  // namespace wips
