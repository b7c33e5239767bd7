#include "wips/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "wips/error.hpp"

namespace wips {

void PairKernel::features(std::span<const double>, std::span<double>) const {
  fail(Error::Code::kInvalidArgument, "kernel '" + name_ + "' has no factorized form");
}

void PairKernel::coefficients(std::span<const double>, std::span<double>) const {
  fail(Error::Code::kInvalidArgument, "kernel '" + name_ + "' has no factorized form");
}

namespace {

double clamp(double v, double bound) { return std::clamp(v, -bound, bound); }

// b(x, y) = a, every component.
class ConstantKernel final : public PairKernel {
 public:
  ConstantKernel(std::vector<double> params, int dim)
      : PairKernel("constant", params, dim, KernelRole::kDrift, std::abs(params[0]) * std::sqrt(dim)),
        a_(params[0]) {}
  void eval(std::span<const double>, std::span<const double>, std::span<double> out) const override {
    std::fill(out.begin(), out.end(), a_);
  }
  int rank() const noexcept override { return 1; }
  void features(std::span<const double>, std::span<double> g) const override { g[0] = 1.0; }
  void coefficients(std::span<const double>, std::span<double> coef) const override {
    std::fill(coef.begin(), coef.begin() + dim(), a_);
  }
  bool y_independent() const noexcept override { return true; }

 private:
  double a_;
};

// b(x, y) = a tanh(x), componentwise.
class TanhKernel final : public PairKernel {
 public:
  TanhKernel(std::vector<double> params, int dim)
      : PairKernel("x_only_tanh", params, dim, KernelRole::kDrift,
                   std::abs(params[0]) * std::max(1.0, std::sqrt(dim))),
        a_(params[0]) {}
  void eval(std::span<const double> x, std::span<const double>, std::span<double> out) const override {
    for (int c = 0; c < dim(); ++c) out[c] = a_ * std::tanh(x[c]);
  }
  int rank() const noexcept override { return 1; }
  void features(std::span<const double>, std::span<double> g) const override { g[0] = 1.0; }
  void coefficients(std::span<const double> x, std::span<double> coef) const override {
    for (int c = 0; c < dim(); ++c) coef[c] = a_ * std::tanh(x[c]);
  }
  bool y_independent() const noexcept override { return true; }

 private:
  double a_;
};

// b(x, y) = a sin(y - x), componentwise.
// sin(y - x) = cos(x) sin(y) - sin(x) cos(y): features (sin y_c, cos y_c).
class SineCouplingKernel final : public PairKernel {
 public:
  SineCouplingKernel(std::vector<double> params, int dim)
      : PairKernel("sine_coupling", params, dim, KernelRole::kDrift,
                   std::abs(params[0]) * std::max(1.0, std::sqrt(dim))),
        a_(params[0]) {}
  void eval(std::span<const double> x, std::span<const double> y, std::span<double> out) const override {
    for (int c = 0; c < dim(); ++c) out[c] = a_ * std::sin(y[c] - x[c]);
  }
  int rank() const noexcept override { return 2 * dim(); }
  void features(std::span<const double> y, std::span<double> g) const override {
    for (int c = 0; c < dim(); ++c) {
      g[2 * c] = std::sin(y[c]);
      g[2 * c + 1] = std::cos(y[c]);
    }
  }
  void coefficients(std::span<const double> x, std::span<double> coef) const override {
    const int d = dim();
    std::fill(coef.begin(), coef.begin() + rank() * d, 0.0);
    for (int c = 0; c < d; ++c) {
      coef[(2 * c) * d + c] = a_ * std::cos(x[c]);
      coef[(2 * c + 1) * d + c] = -a_ * std::sin(x[c]);
    }
  }

 private:
  double a_;
};

// b(x, y) = -a clamp(x, -B, B), componentwise.
class ClippedRestoringKernel final : public PairKernel {
 public:
  ClippedRestoringKernel(std::vector<double> params, int dim)
      : PairKernel("clipped_restoring", params, dim, KernelRole::kDrift,
                   std::max(std::abs(params[0]) * std::abs(params[1]) * std::sqrt(dim), std::abs(params[0]))),
        a_(params[0]),
        b_(std::abs(params[1])) {}
  void eval(std::span<const double> x, std::span<const double>, std::span<double> out) const override {
    for (int c = 0; c < dim(); ++c) out[c] = -a_ * clamp(x[c], b_);
  }
  int rank() const noexcept override { return 1; }
  void features(std::span<const double>, std::span<double> g) const override { g[0] = 1.0; }
  void coefficients(std::span<const double> x, std::span<double> coef) const override {
    for (int c = 0; c < dim(); ++c) coef[c] = -a_ * clamp(x[c], b_);
  }
  bool y_independent() const noexcept override { return true; }

 private:
  double a_, b_;
};

// b(x, y) = a clamp(y, -B, B), componentwise.
class ClippedLinearYKernel final : public PairKernel {
 public:
  ClippedLinearYKernel(std::vector<double> params, int dim)
      : PairKernel("clipped_linear_y", params, dim, KernelRole::kDrift,
                   std::max(std::abs(params[0]) * std::abs(params[1]) * std::sqrt(dim), std::abs(params[0]))),
        a_(params[0]),
        b_(std::abs(params[1])) {}
  void eval(std::span<const double>, std::span<const double> y, std::span<double> out) const override {
    for (int c = 0; c < dim(); ++c) out[c] = a_ * clamp(y[c], b_);
  }
  int rank() const noexcept override { return dim(); }
  void features(std::span<const double> y, std::span<double> g) const override {
    for (int c = 0; c < dim(); ++c) g[c] = clamp(y[c], b_);
  }
  void coefficients(std::span<const double>, std::span<double> coef) const override {
    const int d = dim();
    std::fill(coef.begin(), coef.begin() + d * d, 0.0);
    for (int c = 0; c < d; ++c) coef[c * d + c] = a_;
  }

 private:
  double a_, b_;
};

// b(x, y) = a clamp(y - x, -B, B), componentwise. No factorized form.
class ClippedAttractionKernel final : public PairKernel {
 public:
  ClippedAttractionKernel(std::vector<double> params, int dim)
      : PairKernel("clipped_attraction", params, dim, KernelRole::kDrift,
                   std::max(std::abs(params[0]) * std::abs(params[1]) * std::sqrt(dim), std::abs(params[0]))),
        a_(params[0]),
        b_(std::abs(params[1])) {}
  void eval(std::span<const double> x, std::span<const double> y, std::span<double> out) const override {
    for (int c = 0; c < dim(); ++c) out[c] = a_ * clamp(y[c] - x[c], b_);
  }

 private:
  double a_, b_;
};

// sigma(x, y) = s I_d.
class ScaledIdentityKernel final : public PairKernel {
 public:
  ScaledIdentityKernel(std::string name, std::vector<double> params, int dim, double scale)
      : PairKernel(std::move(name), std::move(params), dim, KernelRole::kDiffusion,
                   std::abs(scale) * std::sqrt(dim)),
        s_(scale) {}
  void eval(std::span<const double>, std::span<const double>, std::span<double> out) const override {
    write(out);
  }
  int rank() const noexcept override { return 1; }
  void features(std::span<const double>, std::span<double> g) const override { g[0] = 1.0; }
  void coefficients(std::span<const double>, std::span<double> coef) const override { write(coef); }
  bool y_independent() const noexcept override { return true; }

 private:
  void write(std::span<double> out) const {
    const int d = dim();
    std::fill(out.begin(), out.begin() + d * d, 0.0);
    for (int c = 0; c < d; ++c) out[c * d + c] = s_;
  }
  double s_;
};

template <class K>
KernelPtr make_drift(std::span<const double> params, int dim) {
  return std::make_shared<K>(std::vector<double>(params.begin(), params.end()), dim);
}

KernelPtr make_identity(std::span<const double>, int dim) {
  return std::make_shared<ScaledIdentityKernel>("identity_diffusion", std::vector<double>{}, dim, 1.0);
}

KernelPtr make_scaled_identity(std::span<const double> params, int dim) {
  return std::make_shared<ScaledIdentityKernel>("scaled_identity", std::vector<double>{params[0]}, dim, params[0]);
}

}  // namespace

const Registry& Registry::builtin() {
  static const Registry registry = [] {
    Registry r;
    auto add = [&r](KernelInfo info, KernelPtr (*factory)(std::span<const double>, int)) {
      const std::string name = info.name;
      r.entries_.emplace(name, Entry{std::move(info), factory});
    };
    add({"constant", KernelRole::kDrift, {"a"}, true, "b(x,y) = a", "", {}}, &make_drift<ConstantKernel>);
    add({"x_only_tanh", KernelRole::kDrift, {"a"}, true, "b(x,y) = a tanh(x)", "", {}},
        &make_drift<TanhKernel>);
    add({"sine_coupling", KernelRole::kDrift, {"a"}, true, "b(x,y) = a sin(y - x)", "", {}},
        &make_drift<SineCouplingKernel>);
    add({"clipped_restoring", KernelRole::kDrift, {"a", "B"}, true, "b(x,y) = -a clamp(x, -B, B)", "", {}},
        &make_drift<ClippedRestoringKernel>);
    add({"clipped_linear_y", KernelRole::kDrift, {"a", "B"}, true, "b(x,y) = a clamp(y, -B, B)", "", {}},
        &make_drift<ClippedLinearYKernel>);
    add({"clipped_attraction", KernelRole::kDrift, {"a", "B"}, false, "b(x,y) = a clamp(y - x, -B, B)", "", {}},
        &make_drift<ClippedAttractionKernel>);
    add({"identity_diffusion", KernelRole::kDiffusion, {}, true, "sigma(x,y) = I_d", "", {}}, &make_identity);
    add({"scaled_identity", KernelRole::kDiffusion, {"s"}, true, "sigma(x,y) = s I_d", "", {}},
        &make_scaled_identity);
    return r;
  }();
  return registry;
}

bool Registry::contains(const std::string& name) const { return entries_.count(name) != 0; }

void Registry::add_alias(const std::string& name, const std::string& base, std::vector<double> params) {
  require(!contains(name), Error::Code::kConfig, "registry entry '" + name + "' already exists");
  auto it = entries_.find(base);
  require(it != entries_.end(), Error::Code::kConfig, "alias '" + name + "' refers to unknown kernel '" + base + "'");
  require(it->second.info.alias_of.empty(), Error::Code::kConfig, "alias '" + name + "' must refer to a built-in kernel");
  require(params.size() == it->second.info.param_names.size(), Error::Code::kConfig,
          "alias '" + name + "': wrong parameter count for '" + base + "'");
  Entry entry = it->second;
  entry.info.name = name;
  entry.info.param_names.clear();
  entry.info.alias_of = base;
  entry.info.alias_params = std::move(params);
  entries_.emplace(name, std::move(entry));
}

KernelPtr Registry::make(const std::string& name, std::span<const double> params, int dim, double cap) const {
  auto it = entries_.find(name);
  require(it != entries_.end(), Error::Code::kConfig, "unknown kernel '" + name + "'");
  require(dim >= 1, Error::Code::kConfig, "kernel dimension must be positive");
  const KernelInfo& info = it->second.info;
  std::vector<double> resolved;
  if (!info.alias_of.empty()) {
    require(params.empty(), Error::Code::kConfig, "alias '" + name + "' takes no parameters");
    resolved = info.alias_params;
  } else {
    std::ostringstream msg;
    msg << "kernel '" << name << "' expects " << info.param_names.size() << " parameter(s), got " << params.size();
    require(params.size() == info.param_names.size(), Error::Code::kConfig, msg.str());
    resolved.assign(params.begin(), params.end());
  }
  for (double v : resolved) require(std::isfinite(v), Error::Code::kConfig, "kernel '" + name + "': non-finite parameter");
  KernelPtr kernel = it->second.factory(resolved, dim);
  std::ostringstream msg;
  msg << "kernel '" << name << "': bound " << kernel->bound() << " exceeds cap " << cap;
  require(kernel->bound() <= cap, Error::Code::kConfig, msg.str());
  return kernel;
}

std::vector<KernelInfo> Registry::kernels() const {
  std::vector<KernelInfo> out;
  out.reserve(entries_.size());
  for (const auto& [name, entry] : entries_) out.push_back(entry.info);
  return out;
}

KernelPtr kernel_registry_lookup(const std::string& name, std::span<const double> params, int dim, double cap) {
  return Registry::builtin().make(name, params, dim, cap);
}

KernelSet::KernelSet(int types, int dim, std::vector<KernelPtr> drift, std::vector<KernelPtr> diffusion)
    : types_(types), dim_(dim), drift_(std::move(drift)), diffusion_(std::move(diffusion)) {
  const auto pairs = static_cast<std::size_t>(types) * static_cast<std::size_t>(types);
  require(types >= 1 && drift_.size() == pairs && diffusion_.size() == pairs, Error::Code::kInvalidArgument,
          "kernel set needs one drift and one diffusion kernel per type pair");
  for (std::size_t k = 0; k < pairs; ++k) {
    require(drift_[k] && diffusion_[k], Error::Code::kInvalidArgument, "null kernel in kernel set");
    require(drift_[k]->role() == KernelRole::kDrift && diffusion_[k]->role() == KernelRole::kDiffusion,
            Error::Code::kInvalidArgument, "kernel role mismatch in kernel set");
    require(drift_[k]->dim() == dim && diffusion_[k]->dim() == dim, Error::Code::kInvalidArgument,
            "kernel dimension mismatch in kernel set");
    bound_ = std::max({bound_, drift_[k]->bound(), diffusion_[k]->bound()});
  }
}

KernelSet KernelSet::uniform(int types, KernelPtr drift, KernelPtr diffusion) {
  const auto pairs = static_cast<std::size_t>(types) * static_cast<std::size_t>(types);
  const int dim = drift ? drift->dim() : 0;
  return KernelSet(types, dim, std::vector<KernelPtr>(pairs, drift), std::vector<KernelPtr>(pairs, diffusion));
}

bool KernelSet::factorized() const noexcept {
  for (std::size_t k = 0; k < drift_.size(); ++k)
    if (drift_[k]->rank() == 0 || diffusion_[k]->rank() == 0) return false;
  return true;
}

bool KernelSet::identity_diffusion() const noexcept {
  const int d = dim_;
  std::vector<double> out(static_cast<std::size_t>(d * d));
  const std::vector<std::vector<double>> probes = {std::vector<double>(d, 0.0), std::vector<double>(d, 1.3),
                                                   std::vector<double>(d, -2.1)};
  for (const auto& kernel : diffusion_) {
    for (const auto& x : probes) {
      for (const auto& y : probes) {
        kernel->eval(x, y, out);
        for (int r = 0; r < d; ++r)
          for (int c = 0; c < d; ++c)
            if (out[static_cast<std::size_t>(r * d + c)] != (r == c ? 1.0 : 0.0)) return false;
      }
    }
  }
  return true;
}

PairGrid uniform_pair_grid(int dim, double lo, double hi, std::size_t per_axis) {
  require(dim >= 1 && per_axis >= 1 && hi >= lo, Error::Code::kInvalidArgument, "invalid pair grid");
  PairGrid grid;
  grid.dim = dim;
  const int axes = 2 * dim;
  std::size_t total = 1;
  for (int a = 0; a < axes; ++a) total *= per_axis;
  grid.points.reserve(total * static_cast<std::size_t>(axes));
  const double step = per_axis > 1 ? (hi - lo) / static_cast<double>(per_axis - 1) : 0.0;
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    for (int a = 0; a < axes; ++a) {
      const std::size_t k = rem % per_axis;
      rem /= per_axis;
      // Exact endpoints keep refinements nested.
      grid.points.push_back(k + 1 == per_axis && per_axis > 1 ? hi : lo + step * static_cast<double>(k));
    }
  }
  return grid;
}

BLEstimate validate_bl_norm(const PairKernel& kernel, const PairGrid& grid, double tolerance) {
  require(grid.dim == kernel.dim(), Error::Code::kInvalidArgument, "grid dimension does not match kernel");
  const std::size_t n = grid.size();
  require(n >= 2, Error::Code::kInvalidArgument, "grid needs at least two points");
  const auto d = static_cast<std::size_t>(grid.dim);
  const auto sz = static_cast<std::size_t>(kernel.size());
  std::vector<double> values(n * sz);
  BLEstimate result;
  for (std::size_t p = 0; p < n; ++p) {
    std::span<const double> pt(grid.points.data() + p * 2 * d, 2 * d);
    std::span<double> out(values.data() + p * sz, sz);
    kernel.eval(pt.first(d), pt.subspan(d), out);
    double norm2 = 0.0;
    for (double v : out) {
      require(std::isfinite(v), Error::Code::kNumerical, "kernel '" + kernel.name() + "' is not finite on the grid");
      norm2 += v * v;
    }
    result.sup_norm = std::max(result.sup_norm, std::sqrt(norm2));
  }
  for (std::size_t p = 0; p < n; ++p) {
    const double* a = grid.points.data() + p * 2 * d;
    for (std::size_t q = p + 1; q < n; ++q) {
      const double* b = grid.points.data() + q * 2 * d;
      double dx = 0.0, dy = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        dx += (a[c] - b[c]) * (a[c] - b[c]);
        dy += (a[d + c] - b[d + c]) * (a[d + c] - b[d + c]);
      }
      const double dist = std::sqrt(dx) + std::sqrt(dy);
      if (dist == 0.0) continue;
      double diff2 = 0.0;
      for (std::size_t e = 0; e < sz; ++e) {
        const double delta = values[p * sz + e] - values[q * sz + e];
        diff2 += delta * delta;
      }
      result.lipschitz = std::max(result.lipschitz, std::sqrt(diff2) / dist);
    }
  }
  result.estimate = std::max(result.sup_norm, result.lipschitz);
  result.violation = result.estimate > kernel.bound() * (1.0 + tolerance);
  return result;
}

}  // namespace wips
