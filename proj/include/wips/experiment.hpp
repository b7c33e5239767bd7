#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wips/config.hpp"

namespace wips {

/// One acceptance threshold on a named metric of a scenario.
struct AcceptanceRule {
  std::string metric;
  std::optional<double> min;
  std::optional<double> max;
};

/// Sweep axes. Every combination of n x p x edge_mode is a sweep point;
/// an empty axis keeps the scenario's own value. When `p_power` is set,
/// p = N^{p_power} replaces the p axis.
struct SweepSpec {
  std::vector<std::size_t> n;
  std::vector<double> p;
  std::vector<EdgeMode> edge_mode;
  std::optional<double> p_power;
};

/// Knobs shared by the estimators of a scenario.
struct EstimatorSettings {
  std::string test_function = "terminal_coordinate";
  std::vector<double> test_params;
  std::size_t reference_size = 10000;  ///< limit-law reference sample
  std::size_t limit_paths = 2000;      ///< Nystrom / trace sample
  std::string poc_pairs = "disjoint";  ///< "disjoint", "first" or "all"
  std::size_t edge_replications = 100000;
  std::size_t tail_replications = 1000000;
  double tail_k = 1.0;
};

struct ScenarioPlan {
  ScenarioConfig config;
  SweepSpec sweep;
  std::vector<std::string> estimators;
  EstimatorSettings settings;
  std::vector<AcceptanceRule> acceptance;
};

struct KernelAlias {
  std::string name;
  std::string base;
  std::vector<double> params;
};

struct ExperimentPlan {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  bool strict = false;
  std::string output = "results";
  std::vector<KernelAlias> aliases;
  std::vector<ScenarioPlan> scenarios;
};

/// Parses a plan document; throws Error(kConfig) on anything invalid,
/// including an empty estimator selection.
ExperimentPlan plan_from_json(const nlohmann::json& doc);
ExperimentPlan load_plan(const std::string& path);
nlohmann::json to_json(const ExperimentPlan& plan);
Registry registry_for(const ExperimentPlan& plan);

/// Names accepted in a scenario's "estimators" list.
const std::vector<std::string>& estimator_names();

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  int threads = 1;
  bool strict = false;
};

struct RunResult {
  std::string output_dir;
  nlohmann::json summary;
  bool passed = false;
  bool all_ran = true;
};

/// Runs every scenario and writes
///   <out>/manifest.json, <out>/summary.json, <out>/<scenario>/<estimator>.tsv.
/// A failing scenario is recorded and the remaining ones still run.
RunResult run_experiment(const ExperimentPlan& plan, const RunOptions& options);

struct CheckResult {
  bool passed = false;
  std::string report;
};
/// Re-evaluates the acceptance rules stored in <out>/summary.json.
CheckResult check_outputs(const std::string& output_dir);

/// Listing of kernels (including aliases of `registry`), initial laws, test
/// functions, edge models and estimators.
nlohmann::json describe_registry_json(const Registry& registry = Registry::builtin());
std::string describe_registry_text(const Registry& registry = Registry::builtin());
/// Rebuilds a registry from the kernel aliases of a describe listing.
Registry registry_from_description(const nlohmann::json& listing);

/// Worker count from WIPS_THREADS, else 1.
int default_thread_count();

/// FNV-1a 64-bit.
std::uint64_t fnv1a(const std::string& bytes) noexcept;

}  // namespace wips
