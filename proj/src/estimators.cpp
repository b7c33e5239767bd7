#include "wips/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "wips/error.hpp"

namespace wips {

CouplingError coupling_error(const PathEnsemble& paths) {
  require(paths.has_z() && paths.has_x(), Error::Code::kInvalidArgument,
          "coupling_error needs both interacting and mean-field paths");
  CouplingError out;
  out.sup_sq.resize(paths.n);
  out.sup_abs.resize(paths.n);
  const auto d = static_cast<std::size_t>(paths.dim);
  for (std::size_t i = 0; i < paths.n; ++i) {
    auto z = paths.z_path(i);
    auto x = paths.x_path(i);
    double best = 0.0;
    for (std::size_t k = 0; k < paths.points(); ++k) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = z[k * d + c] - x[k * d + c];
        s += diff * diff;
      }
      best = std::max(best, s);
    }
    out.sup_sq[i] = best;
    out.sup_abs[i] = std::sqrt(best);
    out.max_abs = std::max(out.max_abs, out.sup_abs[i]);
  }
  if (paths.n > 0) {
    out.mean_sup_sq = mean(out.sup_sq);
    out.mean_sup_abs = mean(out.sup_abs);
  }
  return out;
}

RateTable lln_rate_table(const std::vector<RateEntry>& entries, double floor) {
  require(entries.size() >= 3, Error::Code::kInvalidArgument, "rate table needs at least 3 entries");
  RateTable t;
  std::vector<double> lx, ly, scaled;
  double prev = 0.0;
  for (const RateEntry& e : entries) {
    RateRow row;
    row.entry = e;
    row.np = e.nbar * e.pbar;
    require(row.np > prev, Error::Code::kInvalidArgument, "rate table entries must have increasing N p");
    prev = row.np;
    row.scaled = std::sqrt(row.np) * e.error;
    row.used = e.error > floor;
    if (row.used) {
      lx.push_back(std::log(row.np));
      ly.push_back(std::log(e.error));
      scaled.push_back(row.scaled);
    } else {
      std::ostringstream note;
      note << "N=" << e.n << " excluded: error " << e.error << " at or below floor";
      t.notes.push_back(note.str());
    }
    t.rows.push_back(row);
  }
  if (lx.size() >= 2) {
    const Regression r = least_squares(lx, ly);
    t.slope = r.slope;
    t.intercept = r.intercept;
    const auto [lo, hi] = std::minmax_element(scaled.begin(), scaled.end());
    t.scaled_spread = *hi / *lo;
  } else {
    t.slope = std::numeric_limits<double>::quiet_NaN();
    t.scaled_spread = std::numeric_limits<double>::quiet_NaN();
    t.notes.push_back("fewer than two usable rows; slope undefined");
  }
  return t;
}

// ---------------------------------------------------------------- TestFunction

namespace {

enum TestKind { kTerminal = 1, kTimeAverage, kTanhTerminal, kSinTerminal, kCosTerminal };

struct TestEntry {
  const char* name;
  TestKind kind;
  const char* description;
};

constexpr TestEntry kTests[] = {
    {"terminal_coordinate", kTerminal, "x_c(T)"},
    {"time_average_coordinate", kTimeAverage, "(1/T) int_0^T x_c(t) dt, trapezoidal on the grid"},
    {"tanh_terminal", kTanhTerminal, "tanh(x_c(T))"},
    {"sin_terminal", kSinTerminal, "sin(x_c(T))"},
    {"cos_terminal", kCosTerminal, "cos(x_c(T))"},
};

}  // namespace

TestFunction::TestFunction(std::string name, std::vector<double> params)
    : name_(std::move(name)), params_(std::move(params)) {
  for (const TestEntry& e : kTests)
    if (name_ == e.name) kind_ = e.kind;
  require(kind_ != 0, Error::Code::kConfig, "unknown test function '" + name_ + "'");
  require(params_.size() <= 1, Error::Code::kConfig, "test function takes at most one parameter (component)");
  const double c = params_.empty() ? 0.0 : params_[0];
  require(c >= 0.0 && c == std::floor(c), Error::Code::kConfig, "component index must be a non-negative integer");
  component_ = static_cast<std::size_t>(c);
}

double TestFunction::operator()(std::span<const double> path, int dim, const TimeGrid& grid) const {
  const auto d = static_cast<std::size_t>(dim);
  require(component_ < d, Error::Code::kInvalidArgument, "test function component out of range");
  const auto m = static_cast<std::size_t>(grid.steps);
  const double terminal = path[m * d + component_];
  double v = 0.0;
  switch (kind_) {
    case kTerminal:
      v = terminal;
      break;
    case kTanhTerminal:
      v = std::tanh(terminal);
      break;
    case kSinTerminal:
      v = std::sin(terminal);
      break;
    case kCosTerminal:
      v = std::cos(terminal);
      break;
    case kTimeAverage: {
      double s = 0.5 * (path[component_] + terminal);
      for (std::size_t k = 1; k < m; ++k) s += path[k * d + component_];
      v = s / static_cast<double>(m);
      break;
    }
    default:
      fail(Error::Code::kInvalidArgument, "uninitialised test function");
  }
  return v - center_;
}

double TestFunction::of_z(const PathEnsemble& paths, std::size_t i) const {
  return (*this)(paths.z_path(i), paths.dim, paths.grid);
}

double TestFunction::of_x(const PathEnsemble& paths, std::size_t i) const {
  return (*this)(paths.x_path(i), paths.dim, paths.grid);
}

void TestFunction::center_on(const PathEnsemble& reference) {
  require(reference.has_x() && reference.n > 0, Error::Code::kInvalidArgument,
          "centering needs a non-empty limit-path sample");
  centered_ = false;
  center_ = 0.0;
  std::vector<double> v(reference.n);
  for (std::size_t i = 0; i < reference.n; ++i) v[i] = of_x(reference, i);
  set_center(mean(v));
}

std::vector<NamedEntry> test_function_registry() {
  std::vector<NamedEntry> out;
  for (const TestEntry& e : kTests) out.push_back({e.name, {"component"}, e.description});
  return out;
}

// ---------------------------------------------------------------- d_BL

BLDictionary default_bl_dictionary(int dim) {
  require(dim >= 1, Error::Code::kInvalidArgument, "dictionary dimension must be positive");
  BLDictionary dict;
  dict.dim = dim;
  auto add = [&](std::string label, std::function<double(std::span<const double>)> f) {
    dict.labels.push_back(std::move(label));
    dict.functions.push_back(std::move(f));
  };
  add("one", [](std::span<const double>) { return 1.0; });
  for (int c = 0; c < dim; ++c) {
    const auto cc = static_cast<std::size_t>(c);
    for (int k = -6; k <= 6; ++k) {
      const double s = 0.5 * k;
      std::ostringstream tl, hl;
      tl << "tanh(x" << c << "-" << s << ")";
      hl << "hat(x" << c << "-" << s << ")";
      add(tl.str(), [cc, s](std::span<const double> x) { return std::tanh(x[cc] - s); });
      add(hl.str(), [cc, s](std::span<const double> x) { return std::max(0.0, 1.0 - std::abs(x[cc] - s)); });
    }
    for (double w : {0.25, 0.5, 1.0}) {
      std::ostringstream cl, sl;
      cl << "cos(" << w << "x" << c << ")";
      sl << "sin(" << w << "x" << c << ")";
      add(cl.str(), [cc, w](std::span<const double> x) { return std::cos(w * x[cc]); });
      add(sl.str(), [cc, w](std::span<const double> x) { return std::sin(w * x[cc]); });
    }
  }
  add("tanh(|x|-1)", [](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::tanh(std::sqrt(s) - 1.0);
  });
  return dict;
}

double dbl_surrogate(const EmpiricalMeasure& a, const EmpiricalMeasure& b, const BLDictionary& dictionary) {
  require(a.dim == b.dim && a.dim == dictionary.dim, Error::Code::kInvalidArgument,
          "dbl_surrogate: dimension mismatch");
  auto integrate = [](const EmpiricalMeasure& m, const auto& f) {
    double s = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) s += m.weights[k] * f(m.point(k));
    return s;
  };
  double best = 0.0;
  for (const auto& f : dictionary.functions) best = std::max(best, std::abs(integrate(a, f) - integrate(b, f)));
  return best;
}

// ---------------------------------------------------------------- chaos

PocSample::PocSample(std::vector<std::pair<std::size_t, std::size_t>> pairs, bool allow_same)
    : pairs_(std::move(pairs)) {
  require(!pairs_.empty(), Error::Code::kInvalidArgument, "poc: empty pair list");
  if (!allow_same)
    for (const auto& [a, b] : pairs_)
      require(a != b, Error::Code::kInvalidArgument, "poc: particle indices of a pair must differ");
}

void PocSample::add(const PathEnsemble& paths, const TestFunction& phi, const TestFunction& psi) {
  require(paths.has_z(), Error::Code::kInvalidArgument, "poc: interacting paths required");
  std::vector<double> a, b;
  for (const auto& [i, j] : pairs_) {
    require(i < paths.n && j < paths.n, Error::Code::kInvalidArgument, "poc: particle index out of range");
    a.push_back(phi.of_z(paths, i));
    b.push_back(psi.of_z(paths, j));
  }
  add_values(a, b);
}

void PocSample::add_values(std::span<const double> phi_values, std::span<const double> psi_values) {
  require(phi_values.size() == pairs_.size() && psi_values.size() == pairs_.size(), Error::Code::kInvalidArgument,
          "poc: one value per pair expected");
  phi_.insert(phi_.end(), phi_values.begin(), phi_values.end());
  psi_.insert(psi_.end(), psi_values.begin(), psi_values.end());
  ++replications_;
}

CovarianceEstimate poc_cross_covariance(const PocSample& sample) {
  const std::size_t r = sample.replications();
  const std::size_t p = sample.pairs().size();
  require(r >= 2, Error::Code::kInvalidArgument, "poc: at least two replications required");
  std::vector<double> ma(p, 0.0), mb(p, 0.0);
  for (std::size_t rep = 0; rep < r; ++rep)
    for (std::size_t k = 0; k < p; ++k) {
      ma[k] += sample.phi()[rep * p + k];
      mb[k] += sample.psi()[rep * p + k];
    }
  for (std::size_t k = 0; k < p; ++k) {
    ma[k] /= static_cast<double>(r);
    mb[k] /= static_cast<double>(r);
  }
  std::vector<double> q(r, 0.0);
  for (std::size_t rep = 0; rep < r; ++rep) {
    double s = 0.0;
    for (std::size_t k = 0; k < p; ++k)
      s += (sample.phi()[rep * p + k] - ma[k]) * (sample.psi()[rep * p + k] - mb[k]);
    q[rep] = s / static_cast<double>(p);
  }
  const MeanEstimate e = mean_estimate(q);
  const double rd = static_cast<double>(r);
  return {e.value * rd / (rd - 1.0), e.se, r, p};
}

CovarianceEstimate exchangeable_cross_covariance(const std::vector<std::vector<double>>& phi,
                                                 const std::vector<std::vector<double>>& psi) {
  const std::size_t r = phi.size();
  require(r >= 2 && psi.size() == r, Error::Code::kInvalidArgument, "poc: at least two replications required");
  const std::size_t n = phi.front().size();
  require(n >= 2, Error::Code::kInvalidArgument, "poc: at least two particles required");
  double ma = 0.0, mb = 0.0;
  for (std::size_t rep = 0; rep < r; ++rep) {
    require(phi[rep].size() == n && psi[rep].size() == n, Error::Code::kInvalidArgument,
            "poc: one value per particle expected");
    for (std::size_t i = 0; i < n; ++i) {
      ma += phi[rep][i];
      mb += psi[rep][i];
    }
  }
  const double nd = static_cast<double>(n), rd = static_cast<double>(r);
  ma /= nd * rd;
  mb /= nd * rd;
  std::vector<double> q(r), abar(r), bbar(r);
  for (std::size_t rep = 0; rep < r; ++rep) {
    double sa = 0.0, sb = 0.0, diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = phi[rep][i] - ma, b = psi[rep][i] - mb;
      sa += a;
      sb += b;
      diag += a * b;
    }
    q[rep] = (sa * sb - diag) / (nd * (nd - 1.0));
    abar[rep] = sa / nd;
    bbar[rep] = sb / nd;
  }
  double cross = 0.0;
  for (std::size_t rep = 0; rep < r; ++rep) cross += abar[rep] * bbar[rep];
  cross /= rd - 1.0;  // abar and bbar already have mean zero
  const MeanEstimate e = mean_estimate(q);
  return {e.value + cross / rd, e.se, r, n * (n - 1)};
}

std::vector<std::pair<std::size_t, std::size_t>> disjoint_pairs(std::size_t count) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t k = 0; k < count; ++k) out.emplace_back(2 * k, 2 * k + 1);
  return out;
}

// ---------------------------------------------------------------- fluctuations

double fluctuation_field(const PathEnsemble& paths, const TestFunction& phi, PathSet which) {
  require(std::all_of(paths.types.begin(), paths.types.end(), [](int t) { return t == 0; }), Error::Code::kConfig,
          "fluctuation_field is defined for a single type only");
  const bool z = which == PathSet::kInteracting;
  require(z ? paths.has_z() : paths.has_x(), Error::Code::kInvalidArgument, "fluctuation_field: missing paths");
  require(paths.n > 0, Error::Code::kInvalidArgument, "fluctuation_field: empty ensemble");
  double s = 0.0;
  for (std::size_t i = 0; i < paths.n; ++i) s += z ? phi.of_z(paths, i) : phi.of_x(paths, i);
  return s / std::sqrt(static_cast<double>(paths.n));
}

// ---------------------------------------------------------------- U-statistics

double u_statistic(std::span<const double> sample, int k, const std::function<double(std::span<const double>)>& phi) {
  require(k >= 1, Error::Code::kInvalidArgument, "u_statistic: k must be >= 1");
  const std::size_t n = sample.size();
  const auto kk = static_cast<std::size_t>(k);
  if (n < kk) return 0.0;
  std::vector<std::size_t> idx(kk);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<double> args(kk);
  double total = 0.0;
  while (true) {
    for (std::size_t a = 0; a < kk; ++a) args[a] = sample[idx[a]];
    total += phi(args);
    // next combination in lexicographic order
    std::size_t pos = kk;
    while (pos > 0 && idx[pos - 1] == n - kk + pos - 1) --pos;
    if (pos == 0) break;
    ++idx[pos - 1];
    for (std::size_t a = pos; a < kk; ++a) idx[a] = idx[a - 1] + 1;
  }
  return total;
}

double scaled_u_statistic(std::span<const double> sample, int k,
                          const std::function<double(std::span<const double>)>& phi) {
  if (sample.empty()) return 0.0;
  return u_statistic(sample, k, phi) / std::pow(static_cast<double>(sample.size()), 0.5 * k);
}

double mwi_coefficient(int k, int j) {
  require(k >= 0 && j >= 0 && 2 * j <= k, Error::Code::kInvalidArgument, "mwi_coefficient: need 0 <= 2j <= k");
  // k! / ((k - 2j)! 2^j j!) as a running product to stay exact for moderate k.
  double c = 1.0;
  for (int m = k - 2 * j + 1; m <= k; ++m) c *= m;
  for (int m = 1; m <= j; ++m) c /= 2.0 * m;
  return c;
}

double mwi_product(double i1, double h_norm_sq, int k) {
  require(k >= 0, Error::Code::kInvalidArgument, "mwi_product: k must be >= 0");
  require(h_norm_sq >= 0.0, Error::Code::kInvalidArgument, "mwi_product: |h|^2 must be non-negative");
  if (k == 0) return 1.0;
  double s = 0.0;
  for (int j = 0; 2 * j <= k; ++j)
    s += (j % 2 == 0 ? 1.0 : -1.0) * mwi_coefficient(k, j) * std::pow(h_norm_sq, j) * std::pow(i1, k - 2 * j);
  return s;
}

double mwi_generating_sum(double i1, double h_norm_sq, double t, int degree) {
  double s = 0.0;
  double tk = 1.0;  // t^k / k!
  for (int k = 0; k <= degree; ++k) {
    s += tk * mwi_product(i1, h_norm_sq, k);
    tk *= t / (k + 1);
  }
  return s;
}

double mwi_truncation_bound(double i1, double h_norm_sq, double t, int degree) {
  // |I_k| <= sum_j C_{k,j} |h|^{2j} |I_1|^{k-2j} =: J_k, and
  // sum_k |t|^k / k! J_k = exp(|t I_1| + t^2 |h|^2 / 2), so the tail of that
  // series bounds the remainder.
  require(h_norm_sq >= 0.0, Error::Code::kInvalidArgument, "mwi_truncation_bound: |h|^2 must be non-negative");
  const double at = std::abs(t);
  const double ai = std::abs(i1);
  double tail = 0.0;
  double tk = 1.0;
  for (int k = 0; k <= 150; ++k) {
    if (k > degree) {
      double jk = 0.0;
      for (int j = 0; 2 * j <= k; ++j) jk += mwi_coefficient(k, j) * std::pow(h_norm_sq, j) * std::pow(ai, k - 2 * j);
      const double term = tk * jk;
      tail += term;
      if (k > degree + 5 && term < 1e-18 * std::max(tail, 1e-300)) break;
    }
    tk *= at / (k + 1);
  }
  return tail;
}

}  // namespace wips
