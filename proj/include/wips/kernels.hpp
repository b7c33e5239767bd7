#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace wips {

enum class KernelRole { kDrift, kDiffusion };

/// Interaction kernel k(x, y) with values in R^{rows x cols}: drift kernels
/// are d x 1, diffusion kernels d x d.
///
/// Kernels with a factorized form additionally expose
///   k(x, y) = sum_r coefficient_r(x) * feature_r(y),
/// which turns neighbour averages into averages of feature vectors. `eval`
/// is always available and is the reference definition.
class PairKernel {
 public:
  PairKernel(std::string name, std::vector<double> params, int dim, KernelRole role, double bound)
      : name_(std::move(name)), params_(std::move(params)), dim_(dim), role_(role), bound_(bound) {}
  virtual ~PairKernel() = default;

  const std::string& name() const noexcept { return name_; }
  const std::vector<double>& params() const noexcept { return params_; }
  int dim() const noexcept { return dim_; }
  KernelRole role() const noexcept { return role_; }
  int rows() const noexcept { return dim_; }
  int cols() const noexcept { return role_ == KernelRole::kDrift ? 1 : dim_; }
  int size() const noexcept { return rows() * cols(); }
  /// Analytic bounded-Lipschitz bound L.
  double bound() const noexcept { return bound_; }

  /// out (row-major rows x cols) = k(x, y).
  virtual void eval(std::span<const double> x, std::span<const double> y, std::span<double> out) const = 0;

  /// Number of factorized terms; 0 means no factorized form.
  virtual int rank() const noexcept { return 0; }
  virtual void features(std::span<const double> y, std::span<double> g) const;
  /// coef[r * size() + e] is entry e of coefficient_r(x).
  virtual void coefficients(std::span<const double> x, std::span<double> coef) const;
  virtual bool y_independent() const noexcept { return false; }

 private:
  std::string name_;
  std::vector<double> params_;
  int dim_;
  KernelRole role_;
  double bound_;
};

using KernelPtr = std::shared_ptr<const PairKernel>;

struct KernelInfo {
  std::string name;
  KernelRole role;
  std::vector<std::string> param_names;
  bool factorized;
  std::string formula;
  /// Set for entries added as aliases of another kernel.
  std::string alias_of;
  std::vector<double> alias_params;
};

/// Named kernel factories. The built-in registry is immutable; copies can
/// carry extra aliases (a base kernel with frozen parameters).
class Registry {
 public:
  static const Registry& builtin();

  KernelPtr make(const std::string& name, std::span<const double> params, int dim, double cap) const;
  bool contains(const std::string& name) const;
  void add_alias(const std::string& name, const std::string& base, std::vector<double> params);
  std::vector<KernelInfo> kernels() const;

 private:
  struct Entry {
    KernelInfo info;
    KernelPtr (*factory)(std::span<const double>, int);
  };
  std::map<std::string, Entry> entries_;
};

inline constexpr double kDefaultBoundCap = 10.0;

/// Registry lookup with the analytic bound attached. Throws on unknown names,
/// wrong parameter counts and bounds above `cap`.
KernelPtr kernel_registry_lookup(const std::string& name, std::span<const double> params, int dim,
                                 double cap = kDefaultBoundCap);

/// Drift and diffusion kernels for every ordered type pair.
class KernelSet {
 public:
  KernelSet() = default;
  KernelSet(int types, int dim, std::vector<KernelPtr> drift, std::vector<KernelPtr> diffusion);
  static KernelSet uniform(int types, KernelPtr drift, KernelPtr diffusion);

  int types() const noexcept { return types_; }
  int dim() const noexcept { return dim_; }
  const PairKernel& drift(int from, int to) const { return *drift_[index(from, to)]; }
  const PairKernel& diffusion(int from, int to) const { return *diffusion_[index(from, to)]; }
  /// Shared bound L over all kernels.
  double bound() const noexcept { return bound_; }
  bool factorized() const noexcept;
  /// True when every diffusion kernel is identically I_d (checked on probe points).
  bool identity_diffusion() const noexcept;

 private:
  std::size_t index(int from, int to) const { return static_cast<std::size_t>(from * types_ + to); }
  int types_ = 0;
  int dim_ = 0;
  std::vector<KernelPtr> drift_;
  std::vector<KernelPtr> diffusion_;
  double bound_ = 0.0;
};

/// Sample points in R^d x R^d, stored as concatenated (x, y) rows of length 2d.
struct PairGrid {
  int dim = 1;
  std::vector<double> points;
  std::size_t size() const { return points.size() / static_cast<std::size_t>(2 * dim); }
};

/// Tensor grid with `per_axis` points per coordinate on [lo, hi]^{2d}.
PairGrid uniform_pair_grid(int dim, double lo, double hi, std::size_t per_axis);

struct BLEstimate {
  double sup_norm = 0.0;
  double lipschitz = 0.0;
  double estimate = 0.0;
  bool violation = false;
};

/// Sampled bounded-Lipschitz norm of a kernel: max of the sup norm over the
/// grid and the largest difference quotient over grid pairs. Distances on
/// R^d x R^d use |x - x'| + |y - y'|; kernel values use the Euclidean
/// (Frobenius) norm. Flags a violation when the estimate exceeds
/// bound * (1 + tolerance).
BLEstimate validate_bl_norm(const PairKernel& kernel, const PairGrid& grid, double tolerance = 1e-9);

}  // namespace wips
