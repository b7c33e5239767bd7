#include "wips/particles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "wips/error.hpp"

namespace wips {

double EmpiricalMeasure::mass() const noexcept { return std::accumulate(weights.begin(), weights.end(), 0.0); }

namespace {

// Neighbour averages for the whole population at one grid time.
//
// Factorized kernels: per (receiver type a, particle j) a feature row
// [drift features | diffusion features] of length `width_`, then per
// (particle i, neighbour type g) the sum of feature rows over neighbours.
// Dense graphs are handled as "all minus missing" so the cost is
// proportional to min(#edges, #non-edges).
//
// Other kernels: per (i, g) the sum of k(x_i, x_j) over neighbours.
class Interaction {
 public:
  Interaction(const MembershipMap& membership, const KernelSet& kernels, bool direct)
      : membership_(membership),
        kernels_(kernels),
        n_(membership.size()),
        k_(membership.types()),
        d_(kernels.dim()),
        direct_(direct || !kernels.factorized()) {
    if (direct_) {
      width_ = static_cast<std::size_t>(d_ + d_ * d_);
    } else {
      for (int a = 0; a < k_; ++a) {
        for (int g = 0; g < k_; ++g) {
          drift_rank_.push_back(static_cast<std::size_t>(kernels.drift(a, g).rank()));
          diff_rank_.push_back(static_cast<std::size_t>(kernels.diffusion(a, g).rank()));
          width_ = std::max(width_, drift_rank_.back() + diff_rank_.back());
          max_coef_ = std::max({max_coef_, drift_rank_.back() * static_cast<std::size_t>(d_),
                                diff_rank_.back() * static_cast<std::size_t>(d_ * d_)});
        }
      }
      feat_.assign(static_cast<std::size_t>(k_) * n_ * width_, 0.0);
      total_.assign(static_cast<std::size_t>(k_ * k_) * width_, 0.0);
    }
    acc_.assign(n_ * static_cast<std::size_t>(k_) * width_, 0.0);
    cnt_.assign(n_ * static_cast<std::size_t>(k_), 0.0);
    type_sizes_.resize(static_cast<std::size_t>(k_));
    for (int g = 0; g < k_; ++g) type_sizes_[static_cast<std::size_t>(g)] = static_cast<double>(membership.count(g));
    coef_.resize(std::max<std::size_t>(max_coef_, 1));
    work_.resize(width_);
  }

  /// Neighbour sums under `edges` for the state (N x d).
  void graph(const std::vector<double>& state, const EdgeSystem& edges) {
    if (direct_) {
      direct_graph(state, edges);
      return;
    }
    compute_features(state);
    const bool dense = 2 * edges.edge_count() > edges.pair_count();
    if (dense) {
      compute_totals();
      for (std::size_t i = 0; i < n_; ++i) {
        const int a = type(i);
        for (int g = 0; g < k_; ++g) {
          std::copy_n(total_row(a, g), width_, acc_row(i, g));
          cnt(i, g) = type_sizes_[static_cast<std::size_t>(g)];
        }
      }
      scatter<true>(edges);
    } else {
      std::fill(acc_.begin(), acc_.end(), 0.0);
      std::fill(cnt_.begin(), cnt_.end(), 0.0);
      for (std::size_t i = 0; i < n_; ++i) {
        const int a = type(i);
        add(acc_row(i, a), feat_row(a, i));
        cnt(i, a) += 1.0;
      }
      scatter<false>(edges);
    }
  }

  /// Sums over every particle of each type (complete interaction).
  void complete(const std::vector<double>& state) {
    if (direct_) {
      direct_complete(state);
      return;
    }
    compute_features(state);
    compute_totals();
  }

  /// Coefficients of particle i after graph().
  void coefficients_graph(std::size_t i, std::span<const double> xi, double* drift, double* diff) {
    combine(type(i), xi, acc_row(i, 0), &cnt_[i * static_cast<std::size_t>(k_)], drift, diff);
  }

  /// Coefficients of particle i after complete().
  void coefficients_complete(std::size_t i, std::span<const double> xi, double* drift, double* diff) {
    if (direct_) {
      combine(type(i), xi, acc_row(i, 0), type_sizes_.data(), drift, diff);
    } else {
      combine(type(i), xi, total_row(type(i), 0), type_sizes_.data(), drift, diff);
    }
  }

 private:
  int type(std::size_t i) const { return membership_.type_of(i); }
  double* feat_row(int a, std::size_t j) { return feat_.data() + (static_cast<std::size_t>(a) * n_ + j) * width_; }
  double* acc_row(std::size_t i, int g) { return acc_.data() + (i * static_cast<std::size_t>(k_) + static_cast<std::size_t>(g)) * width_; }
  double* total_row(int a, int g) { return total_.data() + static_cast<std::size_t>(a * k_ + g) * width_; }
  double& cnt(std::size_t i, int g) { return cnt_[i * static_cast<std::size_t>(k_) + static_cast<std::size_t>(g)]; }
  std::size_t pair(int a, int g) const { return static_cast<std::size_t>(a * k_ + g); }

  void add(double* dst, const double* src) const {
    for (std::size_t q = 0; q < width_; ++q) dst[q] += src[q];
  }

  void compute_features(const std::vector<double>& state) {
    for (int a = 0; a < k_; ++a) {
      for (std::size_t j = 0; j < n_; ++j) {
        const int g = type(j);
        std::span<const double> y(state.data() + j * static_cast<std::size_t>(d_), static_cast<std::size_t>(d_));
        double* row = feat_row(a, j);
        const std::size_t rd = drift_rank_[pair(a, g)];
        const std::size_t rs = diff_rank_[pair(a, g)];
        kernels_.drift(a, g).features(y, {row, rd});
        kernels_.diffusion(a, g).features(y, {row + rd, rs});
        std::fill(row + rd + rs, row + width_, 0.0);
      }
    }
  }

  void compute_totals() {
    std::fill(total_.begin(), total_.end(), 0.0);
    for (int a = 0; a < k_; ++a)
      for (std::size_t j = 0; j < n_; ++j) add(total_row(a, type(j)), feat_row(a, j));
  }

  template <bool Missing, std::size_t W>
  void scatter_single(const EdgeSystem& edges) {
    double* acc = acc_.data();
    const double* feat = feat_.data();
    double* cnt = cnt_.data();
    double row[W];
    double row_cnt = 0.0;
    edges.for_each_row<Missing>(
        [&](std::size_t) {
          for (std::size_t q = 0; q < W; ++q) row[q] = 0.0;
          row_cnt = 0.0;
        },
        [&](std::size_t i, std::size_t j) {
          double* aj = acc + j * W;
          const double* fi = feat + i * W;
          const double* fj = feat + j * W;
          for (std::size_t q = 0; q < W; ++q) {
            row[q] += fj[q];
            aj[q] += Missing ? -fi[q] : fi[q];
          }
          row_cnt += 1.0;
          cnt[j] += Missing ? -1.0 : 1.0;
        },
        [&](std::size_t i) {
          for (std::size_t q = 0; q < W; ++q) acc[i * W + q] += Missing ? -row[q] : row[q];
          cnt[i] += Missing ? -row_cnt : row_cnt;
        });
  }

  template <bool Missing>
  void scatter(const EdgeSystem& edges) {
    if (k_ == 1) {
      switch (width_) {
        case 1: return scatter_single<Missing, 1>(edges);
        case 2: return scatter_single<Missing, 2>(edges);
        case 3: return scatter_single<Missing, 3>(edges);
        case 4: return scatter_single<Missing, 4>(edges);
        case 6: return scatter_single<Missing, 6>(edges);
        default: break;
      }
    }
    const double sign = Missing ? -1.0 : 1.0;
    auto visit = [&](std::size_t i, std::size_t j) {
      const int a = type(i);
      const int g = type(j);
      double* ai = acc_row(i, g);
      double* aj = acc_row(j, a);
      const double* fj = feat_row(a, j);
      const double* fi = feat_row(g, i);
      if constexpr (Missing) {
        for (std::size_t q = 0; q < width_; ++q) {
          ai[q] -= fj[q];
          aj[q] -= fi[q];
        }
      } else {
        for (std::size_t q = 0; q < width_; ++q) {
          ai[q] += fj[q];
          aj[q] += fi[q];
        }
      }
      cnt(i, g) += sign;
      cnt(j, a) += sign;
    };
    if constexpr (Missing)
      edges.for_each_missing(visit);
    else
      edges.for_each_edge(visit);
  }

  void direct_pair(const std::vector<double>& state, std::size_t i, std::size_t j, double* dst) {
    const int a = type(i);
    const int g = type(j);
    const auto d = static_cast<std::size_t>(d_);
    std::span<const double> xi(state.data() + i * d, d);
    std::span<const double> xj(state.data() + j * d, d);
    kernels_.drift(a, g).eval(xi, xj, {work_.data(), d});
    kernels_.diffusion(a, g).eval(xi, xj, {work_.data() + d, d * d});
    add(dst, work_.data());
  }

  void direct_graph(const std::vector<double>& state, const EdgeSystem& edges) {
    std::fill(acc_.begin(), acc_.end(), 0.0);
    std::fill(cnt_.begin(), cnt_.end(), 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      direct_pair(state, i, i, acc_row(i, type(i)));
      cnt(i, type(i)) += 1.0;
    }
    edges.for_each_edge([&](std::size_t i, std::size_t j) {
      direct_pair(state, i, j, acc_row(i, type(j)));
      direct_pair(state, j, i, acc_row(j, type(i)));
      cnt(i, type(j)) += 1.0;
      cnt(j, type(i)) += 1.0;
    });
  }

  void direct_complete(const std::vector<double>& state) {
    std::fill(acc_.begin(), acc_.end(), 0.0);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) direct_pair(state, i, j, acc_row(i, type(j)));
  }

  // drift = sum_g [c_g > 0] average over type-g neighbours of the kernel.
  void combine(int a, std::span<const double> xi, const double* sums, const double* counts, double* drift,
               double* diff) {
    const auto d = static_cast<std::size_t>(d_);
    std::fill(drift, drift + d, 0.0);
    std::fill(diff, diff + d * d, 0.0);
    for (int g = 0; g < k_; ++g) {
      const double c = counts[g];
      if (c <= 0.0) continue;
      const double* s = sums + static_cast<std::size_t>(g) * width_;
      for (std::size_t q = 0; q < width_; ++q) work_[q] = s[q] / c;
      if (direct_) {
        for (std::size_t e = 0; e < d; ++e) drift[e] += work_[e];
        for (std::size_t e = 0; e < d * d; ++e) diff[e] += work_[d + e];
        continue;
      }
      const std::size_t rd = drift_rank_[pair(a, g)];
      const std::size_t rs = diff_rank_[pair(a, g)];
      kernels_.drift(a, g).coefficients(xi, coef_);
      for (std::size_t r = 0; r < rd; ++r)
        for (std::size_t e = 0; e < d; ++e) drift[e] += coef_[r * d + e] * work_[r];
      kernels_.diffusion(a, g).coefficients(xi, coef_);
      for (std::size_t r = 0; r < rs; ++r)
        for (std::size_t e = 0; e < d * d; ++e) diff[e] += coef_[r * d * d + e] * work_[rd + r];
    }
  }

  const MembershipMap& membership_;
  const KernelSet& kernels_;
  std::size_t n_;
  int k_;
  int d_;
  bool direct_;
  std::size_t width_ = 0;
  std::size_t max_coef_ = 0;
  std::vector<std::size_t> drift_rank_, diff_rank_;
  std::vector<double> feat_, total_, acc_, cnt_, type_sizes_, coef_, work_;
};

enum class Systems { kInteracting, kCoupled, kLimit };

PathEnsemble simulate(const Model& model, const StreamKey& key, const SimulationOptions& options, Systems which) {
  const std::size_t n = model.size();
  const auto d = static_cast<std::size_t>(model.dim());
  const TimeGrid grid = model.grid;
  const auto steps = static_cast<std::size_t>(grid.steps);
  const double dt = grid.dt();
  const double sqrt_dt = std::sqrt(dt);
  const bool run_z = which != Systems::kLimit;
  const bool run_x = which != Systems::kInteracting;

  PathEnsemble p;
  p.grid = grid;
  p.n = n;
  p.dim = model.dim();
  p.types = model.membership.assignments();
  const std::size_t stride = p.path_stride();
  if (run_z) p.z.assign(n * stride, 0.0);
  if (run_x) p.x.assign(n * stride, 0.0);
  p.dw.assign(n * p.noise_stride(), 0.0);

  std::vector<double> zcur(n * d), xcur(n * d), noise(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> x0(zcur.data() + i * d, d);
    model.initial[static_cast<std::size_t>(model.membership.type_of(i))].sample(key, static_cast<std::uint32_t>(i), x0);
    std::copy(x0.begin(), x0.end(), xcur.begin() + static_cast<std::ptrdiff_t>(i * d));
    if (run_z) std::copy(x0.begin(), x0.end(), p.z.begin() + static_cast<std::ptrdiff_t>(i * stride));
    if (run_x) std::copy(x0.begin(), x0.end(), p.x.begin() + static_cast<std::ptrdiff_t>(i * stride));
  }

  Interaction interaction(model.membership, model.kernels, options.force_direct);
  std::optional<EdgeProcess> process;
  if (run_z) process.emplace(model.membership, model.edges, key, grid);
  std::vector<double> drift(d), diff(d * d);

  auto advance = [&](std::vector<double>& cur, std::vector<double>& path, std::size_t k, bool graph, const char* label) {
    for (std::size_t i = 0; i < n; ++i) {
      std::span<const double> xi(cur.data() + i * d, d);
      if (graph)
        interaction.coefficients_graph(i, xi, drift.data(), diff.data());
      else
        interaction.coefficients_complete(i, xi, drift.data(), diff.data());
      const double* dw = noise.data() + i * d;
      double* out = path.data() + i * stride + (k + 1) * d;
      for (std::size_t c = 0; c < d; ++c) {
        double v = xi[c] + drift[c] * dt;
        for (std::size_t e = 0; e < d; ++e) v += diff[c * d + e] * dw[e];
        if (!std::isfinite(v)) {
          std::ostringstream msg;
          msg << label << " state of particle " << i << " became non-finite at step " << k + 1;
          fail(Error::Code::kNumerical, msg.str());
        }
        out[c] = v;
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(path.data() + i * stride + (k + 1) * d, d, cur.data() + i * d);
  };

  for (std::size_t k = 0; k < steps; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < d; c += 2) {
        const auto z = normal_pair(key.block(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(c / 2),
                                             static_cast<std::uint32_t>(k), Domain::kBrownian));
        noise[i * d + c] = sqrt_dt * z[0];
        if (c + 1 < d) noise[i * d + c + 1] = sqrt_dt * z[1];
      }
      std::copy_n(noise.data() + i * d, d, p.dw.data() + i * p.noise_stride() + k * d);
    }
    if (run_z) {
      if (k > 0) process->advance();
      interaction.graph(zcur, process->current());
      advance(zcur, p.z, k, true, "interacting");
    }
    if (run_x) {
      interaction.complete(xcur);
      advance(xcur, p.x, k, false, "mean-field");
    }
  }
  return p;
}

}  // namespace

Coefficients drift_and_diffusion_eval(std::size_t i, std::span<const double> states, const EdgeSystem& edges,
                                      const DegreeCounts& degrees, const KernelSet& kernels,
                                      const MembershipMap& membership) {
  const auto d = static_cast<std::size_t>(kernels.dim());
  const std::size_t n = membership.size();
  require(states.size() == n * d && edges.size() == n && degrees.size() == n, Error::Code::kInvalidArgument,
          "drift_and_diffusion_eval: inconsistent sizes");
  Coefficients out{std::vector<double>(d, 0.0), std::vector<double>(d * d, 0.0)};
  const int a = membership.type_of(i);
  std::vector<double> bsum(d), ssum(d * d), b(d), s(d * d);
  std::span<const double> xi = states.subspan(i * d, d);
  for (int g = 0; g < membership.types(); ++g) {
    const std::size_t count = degrees.at(i, g);
    if (count == 0) continue;
    std::fill(bsum.begin(), bsum.end(), 0.0);
    std::fill(ssum.begin(), ssum.end(), 0.0);
    for (std::size_t j = membership.first(g); j < membership.last(g); ++j) {
      if (!edges.edge(i, j)) continue;
      std::span<const double> xj = states.subspan(j * d, d);
      kernels.drift(a, g).eval(xi, xj, b);
      kernels.diffusion(a, g).eval(xi, xj, s);
      for (std::size_t e = 0; e < d; ++e) bsum[e] += b[e];
      for (std::size_t e = 0; e < d * d; ++e) ssum[e] += s[e];
    }
    const double c = static_cast<double>(count);
    for (std::size_t e = 0; e < d; ++e) out.drift[e] += bsum[e] / c;
    for (std::size_t e = 0; e < d * d; ++e) out.diffusion[e] += ssum[e] / c;
  }
  return out;
}

PathEnsemble simulate_interacting(const Model& model, const StreamKey& key, const SimulationOptions& options) {
  return simulate(model, key, options, Systems::kInteracting);
}

PathEnsemble simulate_coupled(const Model& model, const StreamKey& key, const SimulationOptions& options) {
  return simulate(model, key, options, Systems::kCoupled);
}

PathEnsemble simulate_limit(const Model& model, const StreamKey& key, const SimulationOptions& options) {
  return simulate(model, key, options, Systems::kLimit);
}

Model with_size(const Model& model, std::size_t n) {
  ScenarioConfig config = model.config;
  config.n = n;
  if (!config.membership.counts.empty()) {
    std::vector<double> proportions;
    for (std::size_t c : config.membership.counts)
      proportions.push_back(static_cast<double>(c) / static_cast<double>(model.size()));
    config.membership.counts.clear();
    config.membership.proportions = proportions;
  }
  Model out = model;
  out.config = config;
  out.membership = build_membership(config.membership, n);
  return out;
}

Model with_static_probability(const Model& model, double p) {
  require(p >= 0.0 && p <= 1.0, Error::Code::kInvalidArgument, "edge probability must lie in [0,1]");
  Model out = model;
  out.config.edge_mode = EdgeMode::kStatic;
  out.config.p0 = {{p}};
  out.config.lambda.clear();
  out.config.mu.clear();
  out.edges = EdgeModel::static_uniform(model.membership.types(), p);
  return out;
}

EmpiricalMeasure snapshot_empirical(const PathEnsemble& paths, int k, int type, PathSet which,
                                    std::optional<std::size_t> vertex, const EdgeSystem* edges) {
  require(k >= 0 && k <= paths.grid.steps, Error::Code::kInvalidArgument, "snapshot_empirical: bad time index");
  const bool interacting = which == PathSet::kInteracting;
  require(interacting ? paths.has_z() : paths.has_x(), Error::Code::kInvalidArgument,
          "snapshot_empirical: requested path set is empty");
  require(!vertex || (edges != nullptr && edges->size() == paths.n && *vertex < paths.n),
          Error::Code::kInvalidArgument, "snapshot_empirical: a vertex needs a matching edge system");
  EmpiricalMeasure m;
  m.dim = paths.dim;
  std::vector<std::size_t> members;
  for (std::size_t j = 0; j < paths.n; ++j) {
    if (paths.types[j] != type) continue;
    if (vertex && !edges->edge(*vertex, j)) continue;
    members.push_back(j);
  }
  for (std::size_t j : members) {
    auto pt = interacting ? paths.z_at(j, k) : paths.x_at(j, k);
    m.points.insert(m.points.end(), pt.begin(), pt.end());
    m.weights.push_back(1.0 / static_cast<double>(members.size()));
  }
  return m;
}

}  // namespace wips
