#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "wips/graph.hpp"
#include "wips/kernels.hpp"
#include "wips/membership.hpp"
#include "wips/rng.hpp"

namespace wips {

struct KernelSpec {
  std::string name;
  std::vector<double> params;
  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

struct InitialLawSpec {
  std::string name = "normal";
  std::vector<double> params{0.0, 1.0};
  friend bool operator==(const InitialLawSpec&, const InitialLawSpec&) = default;
};

/// Law of X_0 for one type. Components are i.i.d.
class InitialLaw {
 public:
  InitialLaw() = default;
  explicit InitialLaw(InitialLawSpec spec);

  /// Draws the initial point of `particle` (dim components) from `key`.
  void sample(const StreamKey& key, std::uint32_t particle, std::span<double> out) const;
  double mean() const noexcept;
  double variance() const noexcept;
  const InitialLawSpec& spec() const noexcept { return spec_; }

 private:
  enum class Kind { kNormal, kUniform, kPoint };
  InitialLawSpec spec_;
  Kind kind_ = Kind::kNormal;
};

/// All scenario inputs as read from a scenario document.
struct ScenarioConfig {
  std::string name = "scenario";
  std::size_t n = 0;
  MembershipSpec membership;  ///< empty means a single type
  int dimension = 1;
  std::vector<std::vector<KernelSpec>> drift;      ///< K x K, or 1 x 1 for all pairs
  std::vector<std::vector<KernelSpec>> diffusion;  ///< K x K, or 1 x 1 for all pairs
  double bound_cap = kDefaultBoundCap;
  std::vector<InitialLawSpec> initial;  ///< per type, or a single entry for all
  EdgeMode edge_mode = EdgeMode::kStatic;
  std::vector<std::vector<double>> p0;      ///< K x K or 1 x 1
  std::vector<std::vector<double>> lambda;  ///< markov only
  std::vector<std::vector<double>> mu;      ///< markov only
  double horizon = 1.0;
  int steps = 200;
  int replications = 64;
  std::uint64_t seed = 0;
  std::string output;

  int types() const noexcept;
  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

/// Canonical JSON encoding (every field present, matrices expanded).
nlohmann::json to_json(const ScenarioConfig& config);
/// Parses a scenario document; unknown keys are rejected.
ScenarioConfig scenario_from_json(const nlohmann::json& doc);
ScenarioConfig load_scenario(const std::string& path);
/// Range checks that do not need the registry.
void validate(const ScenarioConfig& config);

/// A scenario with every registry name resolved.
struct Model {
  ScenarioConfig config;
  MembershipMap membership;
  KernelSet kernels;
  EdgeModel edges;
  std::vector<InitialLaw> initial;  ///< one per type
  TimeGrid grid;

  int dim() const noexcept { return config.dimension; }
  std::size_t size() const noexcept { return membership.size(); }
};

Model build_model(const ScenarioConfig& config, const Registry& registry = Registry::builtin());

/// Names and parameter lists of the initial-law registry.
struct NamedEntry {
  std::string name;
  std::vector<std::string> param_names;
  std::string description;
};
std::vector<NamedEntry> initial_law_registry();

const char* to_string(EdgeMode mode) noexcept;
EdgeMode edge_mode_from_string(const std::string& text);

}  // namespace wips
