#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "wips/config.hpp"
#include "wips/graph.hpp"

namespace wips {

/// Trajectories on a shared grid. Arrays are row-major:
/// z, x: [particle][grid point][component]; dw: [particle][step][component].
/// z holds the interacting system, x the coupled mean-field system; either
/// may be empty.
struct PathEnsemble {
  TimeGrid grid;
  std::size_t n = 0;
  int dim = 1;
  std::vector<int> types;
  std::vector<double> z;
  std::vector<double> x;
  std::vector<double> dw;

  bool has_z() const noexcept { return !z.empty(); }
  bool has_x() const noexcept { return !x.empty(); }
  std::size_t points() const noexcept { return static_cast<std::size_t>(grid.steps) + 1; }
  std::size_t path_stride() const noexcept { return points() * static_cast<std::size_t>(dim); }
  std::size_t noise_stride() const noexcept { return static_cast<std::size_t>(grid.steps) * static_cast<std::size_t>(dim); }

  std::span<const double> z_path(std::size_t i) const { return {z.data() + i * path_stride(), path_stride()}; }
  std::span<const double> x_path(std::size_t i) const { return {x.data() + i * path_stride(), path_stride()}; }
  std::span<const double> dw_path(std::size_t i) const { return {dw.data() + i * noise_stride(), noise_stride()}; }
  std::span<const double> z_at(std::size_t i, int k) const {
    return {z.data() + i * path_stride() + static_cast<std::size_t>(k * dim), static_cast<std::size_t>(dim)};
  }
  std::span<const double> x_at(std::size_t i, int k) const {
    return {x.data() + i * path_stride() + static_cast<std::size_t>(k * dim), static_cast<std::size_t>(dim)};
  }
  std::span<const double> dw_at(std::size_t i, int k) const {
    return {dw.data() + i * noise_stride() + static_cast<std::size_t>(k * dim), static_cast<std::size_t>(dim)};
  }
};

/// Weighted point set in R^d. Weights sum to 1, or to 0 for the zero measure.
struct EmpiricalMeasure {
  int dim = 1;
  std::vector<double> points;
  std::vector<double> weights;

  std::size_t size() const noexcept { return weights.size(); }
  double mass() const noexcept;
  std::span<const double> point(std::size_t k) const {
    return {points.data() + k * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
};

struct SimulationOptions {
  /// Evaluate every pair through PairKernel::eval instead of the factorized form.
  bool force_direct = false;
};

/// Drift vector and diffusion matrix (row-major d x d) of one particle.
struct Coefficients {
  std::vector<double> drift;
  std::vector<double> diffusion;
};

/// Coefficients of vertex i from neighbour averages, one pairwise kernel
/// evaluation per neighbour. Types with an empty neighbourhood contribute 0.
/// `states` is N x d row-major.
Coefficients drift_and_diffusion_eval(std::size_t i, std::span<const double> states, const EdgeSystem& edges,
                                      const DegreeCounts& degrees, const KernelSet& kernels,
                                      const MembershipMap& membership);

/// Euler-Maruyama for the graph-interacting system. All randomness comes from
/// `key`: edges (EdgeProcess), X_0 (per particle) and dW (per particle, step).
PathEnsemble simulate_interacting(const Model& model, const StreamKey& key, const SimulationOptions& options = {});

/// Interacting system plus the mean-field system driven by the same dW and
/// X_0. The limit law mu^g_t is replaced by the empirical law of the type-g
/// particles of the mean-field system itself.
PathEnsemble simulate_coupled(const Model& model, const StreamKey& key, const SimulationOptions& options = {});

/// Mean-field system only (x and dw filled). Used as the limit-law sample.
PathEnsemble simulate_limit(const Model& model, const StreamKey& key, const SimulationOptions& options = {});

/// The model with N replaced (type proportions preserved by largest remainder).
Model with_size(const Model& model, std::size_t n);
/// The model with every edge probability p0 replaced by p (static mode).
Model with_static_probability(const Model& model, double p);

enum class PathSet { kInteracting, kLimit };

/// Empirical law at grid index k of the type-g particles. With a vertex, the
/// weights are uniform over the type-g neighbours of that vertex under
/// `edges` (zero measure when there are none).
EmpiricalMeasure snapshot_empirical(const PathEnsemble& paths, int k, int type, PathSet which = PathSet::kInteracting,
                                    std::optional<std::size_t> vertex = std::nullopt,
                                    const EdgeSystem* edges = nullptr);

}  // namespace wips
