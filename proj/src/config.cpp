#include "wips/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "wips/error.hpp"

namespace wips {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Membership

MembershipMap::MembershipMap(std::vector<std::size_t> counts) : counts_(std::move(counts)) {
  require(!counts_.empty(), Error::Code::kConfig, "membership needs at least one type");
  offsets_.assign(counts_.size() + 1, 0);
  min_count_ = counts_.front();
  for (std::size_t a = 0; a < counts_.size(); ++a) {
    require(counts_[a] >= 1, Error::Code::kConfig,
            "membership: type " + std::to_string(a + 1) + " has no vertices (every type needs N_a >= 1)");
    offsets_[a + 1] = offsets_[a] + counts_[a];
    min_count_ = std::min(min_count_, counts_[a]);
    assignment_.insert(assignment_.end(), counts_[a], static_cast<int>(a));
  }
}

std::vector<std::size_t> largest_remainder_counts(const std::vector<double>& proportions, std::size_t n) {
  require(!proportions.empty(), Error::Code::kConfig, "membership: empty proportion list");
  double total = 0.0;
  for (double p : proportions) {
    require(std::isfinite(p) && p > 0.0, Error::Code::kConfig, "membership: proportions must be positive");
    total += p;
  }
  require(std::abs(total - 1.0) <= 1e-9, Error::Code::kConfig, "membership: proportions must sum to 1");
  std::vector<std::size_t> counts(proportions.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t a = 0; a < proportions.size(); ++a) {
    const double share = proportions[a] * static_cast<double>(n);
    counts[a] = static_cast<std::size_t>(std::floor(share + 1e-12));
    assigned += counts[a];
    remainders.emplace_back(share - static_cast<double>(counts[a]), a);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& l, const auto& r) { return l.first > r.first + 1e-12; });
  for (std::size_t k = 0; assigned < n && k < remainders.size(); ++k, ++assigned) ++counts[remainders[k].second];
  return counts;
}

MembershipMap build_membership(const MembershipSpec& spec, std::size_t n) {
  require(n >= 1, Error::Code::kConfig, "membership: N must be positive");
  require(spec.counts.empty() || spec.proportions.empty(), Error::Code::kConfig,
          "membership: give counts or proportions, not both");
  if (!spec.counts.empty()) {
    const std::size_t total = std::accumulate(spec.counts.begin(), spec.counts.end(), std::size_t{0});
    require(total == n, Error::Code::kConfig, "membership: counts must sum to N");
    return MembershipMap(spec.counts);
  }
  if (!spec.proportions.empty()) return MembershipMap(largest_remainder_counts(spec.proportions, n));
  return MembershipMap({n});
}

// ---------------------------------------------------------------------------
// Initial laws

InitialLaw::InitialLaw(InitialLawSpec spec) : spec_(std::move(spec)) {
  auto need = [&](std::size_t count) {
    require(spec_.params.size() == count, Error::Code::kConfig,
            "initial law '" + spec_.name + "' expects " + std::to_string(count) + " parameter(s)");
    for (double v : spec_.params) require(std::isfinite(v), Error::Code::kConfig, "initial law: non-finite parameter");
  };
  if (spec_.name == "normal") {
    need(2);
    require(spec_.params[1] >= 0.0, Error::Code::kConfig, "initial law 'normal': sd must be non-negative");
    kind_ = Kind::kNormal;
  } else if (spec_.name == "uniform") {
    need(2);
    require(spec_.params[0] < spec_.params[1], Error::Code::kConfig, "initial law 'uniform': need lo < hi");
    kind_ = Kind::kUniform;
  } else if (spec_.name == "point") {
    need(1);
    kind_ = Kind::kPoint;
  } else {
    fail(Error::Code::kConfig, "unknown initial law '" + spec_.name + "'");
  }
}

void InitialLaw::sample(const StreamKey& key, std::uint32_t particle, std::span<double> out) const {
  const std::size_t d = out.size();
  for (std::size_t c = 0; c < d; c += 2) {
    const auto words = key.block(particle, static_cast<std::uint32_t>(c / 2), 0, Domain::kInitial);
    double v[2] = {0.0, 0.0};
    switch (kind_) {
      case Kind::kNormal: {
        const auto z = normal_pair(words);
        v[0] = spec_.params[0] + spec_.params[1] * z[0];
        v[1] = spec_.params[0] + spec_.params[1] * z[1];
        break;
      }
      case Kind::kUniform: {
        const double width = spec_.params[1] - spec_.params[0];
        v[0] = spec_.params[0] + width * to_unit(words[0], words[1]);
        v[1] = spec_.params[0] + width * to_unit(words[2], words[3]);
        break;
      }
      case Kind::kPoint:
        v[0] = v[1] = spec_.params[0];
        break;
    }
    out[c] = v[0];
    if (c + 1 < d) out[c + 1] = v[1];
  }
}

double InitialLaw::mean() const noexcept {
  switch (kind_) {
    case Kind::kNormal:
    case Kind::kPoint:
      return spec_.params[0];
    case Kind::kUniform:
      return 0.5 * (spec_.params[0] + spec_.params[1]);
  }
  return 0.0;
}

double InitialLaw::variance() const noexcept {
  switch (kind_) {
    case Kind::kNormal:
      return spec_.params[1] * spec_.params[1];
    case Kind::kUniform: {
      const double w = spec_.params[1] - spec_.params[0];
      return w * w / 12.0;
    }
    case Kind::kPoint:
      return 0.0;
  }
  return 0.0;
}

std::vector<NamedEntry> initial_law_registry() {
  return {{"normal", {"mean", "sd"}, "i.i.d. Normal(mean, sd^2) components"},
          {"point", {"value"}, "every component equal to value"},
          {"uniform", {"lo", "hi"}, "i.i.d. Uniform(lo, hi) components"}};
}

// ---------------------------------------------------------------------------
// Scenario documents

const char* to_string(EdgeMode mode) noexcept { return mode == EdgeMode::kStatic ? "static" : "markov"; }

EdgeMode edge_mode_from_string(const std::string& text) {
  if (text == "static") return EdgeMode::kStatic;
  if (text == "markov") return EdgeMode::kMarkov;
  fail(Error::Code::kConfig, "unknown edge mode '" + text + "'");
}

int ScenarioConfig::types() const noexcept {
  if (!membership.counts.empty()) return static_cast<int>(membership.counts.size());
  if (!membership.proportions.empty()) return static_cast<int>(membership.proportions.size());
  return 1;
}

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  require(obj.is_object(), Error::Code::kConfig, where + " must be an object");
  std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items())
    require(keys.count(key) != 0, Error::Code::kConfig, "unknown key '" + key + "' in " + where);
}

template <class T>
T get_as(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(Error::Code::kConfig, where + "." + key + ": " + e.what());
  }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  return get_as<T>(obj, key, where);
}

json kernel_to_json(const KernelSpec& k) { return json{{"name", k.name}, {"params", k.params}}; }

KernelSpec kernel_from_json(const json& j, const std::string& where) {
  reject_unknown(j, {"name", "params"}, where);
  KernelSpec k;
  k.name = get_as<std::string>(j, "name", where);
  k.params = get_or<std::vector<double>>(j, "params", {}, where);
  return k;
}

std::vector<std::vector<KernelSpec>> kernels_from_json(const json& j, const std::string& where) {
  if (j.is_object()) return {{kernel_from_json(j, where)}};
  require(j.is_array() && !j.empty(), Error::Code::kConfig, where + " must be a kernel object or a K x K array");
  std::vector<std::vector<KernelSpec>> out;
  for (const auto& row : j) {
    require(row.is_array(), Error::Code::kConfig, where + " rows must be arrays");
    std::vector<KernelSpec> r;
    for (const auto& k : row) r.push_back(kernel_from_json(k, where));
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<std::vector<double>> matrix_from_json(const json& j, const std::string& where) {
  if (j.is_number()) return {{j.get<double>()}};
  try {
    return j.get<std::vector<std::vector<double>>>();
  } catch (const json::exception&) {
    fail(Error::Code::kConfig, where + " must be a number or a K x K array");
  }
}

bool square_or_scalar(const auto& m, int k) {
  if (m.size() == 1 && m[0].size() == 1) return true;
  if (m.size() != static_cast<std::size_t>(k)) return false;
  for (const auto& row : m)
    if (row.size() != static_cast<std::size_t>(k)) return false;
  return true;
}

template <class T>
T expand(const std::vector<std::vector<T>>& m, int a, int g) {
  if (m.size() == 1 && m[0].size() == 1) return m[0][0];
  return m[static_cast<std::size_t>(a)][static_cast<std::size_t>(g)];
}

}  // namespace

json to_json(const ScenarioConfig& c) {
  json doc;
  doc["name"] = c.name;
  doc["n"] = c.n;
  if (!c.membership.proportions.empty())
    doc["types"] = json{{"proportions", c.membership.proportions}};
  else
    doc["types"] = json{{"counts", c.membership.counts}};
  doc["dimension"] = c.dimension;
  auto kernels = [](const auto& m) {
    json rows = json::array();
    for (const auto& row : m) {
      json r = json::array();
      for (const auto& k : row) r.push_back(kernel_to_json(k));
      rows.push_back(r);
    }
    return rows;
  };
  doc["drift"] = kernels(c.drift);
  doc["diffusion"] = kernels(c.diffusion);
  doc["bound_cap"] = c.bound_cap;
  json laws = json::array();
  for (const auto& law : c.initial) laws.push_back(json{{"name", law.name}, {"params", law.params}});
  doc["initial_law"] = laws;
  json edges{{"mode", to_string(c.edge_mode)}, {"p0", c.p0}};
  if (c.edge_mode == EdgeMode::kMarkov) {
    edges["lambda"] = c.lambda;
    edges["mu"] = c.mu;
  }
  doc["edges"] = edges;
  doc["horizon"] = c.horizon;
  doc["steps"] = c.steps;
  doc["replications"] = c.replications;
  doc["seed"] = c.seed;
  doc["output"] = c.output;
  return doc;
}

ScenarioConfig scenario_from_json(const json& doc) {
  const std::string where = "scenario";
  reject_unknown(doc,
                 {"name", "n", "types", "dimension", "drift", "diffusion", "bound_cap", "initial_law", "edges",
                  "horizon", "steps", "replications", "seed", "output"},
                 where);
  ScenarioConfig c;
  c.name = get_or<std::string>(doc, "name", c.name, where);
  c.n = get_as<std::size_t>(doc, "n", where);
  if (doc.contains("types")) {
    const json& t = doc.at("types");
    reject_unknown(t, {"counts", "proportions"}, "scenario.types");
    c.membership.counts = get_or<std::vector<std::size_t>>(t, "counts", {}, "scenario.types");
    c.membership.proportions = get_or<std::vector<double>>(t, "proportions", {}, "scenario.types");
  }
  c.dimension = get_or<int>(doc, "dimension", 1, where);
  require(doc.contains("drift"), Error::Code::kConfig, "scenario.drift is required");
  c.drift = kernels_from_json(doc.at("drift"), "scenario.drift");
  c.diffusion = doc.contains("diffusion") ? kernels_from_json(doc.at("diffusion"), "scenario.diffusion")
                                          : std::vector<std::vector<KernelSpec>>{{{"identity_diffusion", {}}}};
  c.bound_cap = get_or<double>(doc, "bound_cap", kDefaultBoundCap, where);
  if (doc.contains("initial_law")) {
    const json& law = doc.at("initial_law");
    auto one = [](const json& j) {
      reject_unknown(j, {"name", "params"}, "scenario.initial_law");
      InitialLawSpec s;
      s.name = get_as<std::string>(j, "name", "scenario.initial_law");
      s.params = get_or<std::vector<double>>(j, "params", {}, "scenario.initial_law");
      return s;
    };
    if (law.is_array()) {
      for (const auto& j : law) c.initial.push_back(one(j));
    } else {
      c.initial.push_back(one(law));
    }
  } else {
    c.initial.push_back(InitialLawSpec{});
  }
  require(doc.contains("edges"), Error::Code::kConfig, "scenario.edges is required");
  const json& e = doc.at("edges");
  reject_unknown(e, {"mode", "p0", "lambda", "mu"}, "scenario.edges");
  c.edge_mode = edge_mode_from_string(get_or<std::string>(e, "mode", "static", "scenario.edges"));
  require(e.contains("p0"), Error::Code::kConfig, "scenario.edges.p0 is required");
  c.p0 = matrix_from_json(e.at("p0"), "scenario.edges.p0");
  if (c.edge_mode == EdgeMode::kMarkov) {
    require(e.contains("lambda") && e.contains("mu"), Error::Code::kConfig, "markov edges need lambda and mu");
    c.lambda = matrix_from_json(e.at("lambda"), "scenario.edges.lambda");
    c.mu = matrix_from_json(e.at("mu"), "scenario.edges.mu");
  } else {
    require(!e.contains("lambda") && !e.contains("mu"), Error::Code::kConfig,
            "static edges take no lambda or mu");
  }
  c.horizon = get_or<double>(doc, "horizon", 1.0, where);
  c.steps = get_or<int>(doc, "steps", 200, where);
  c.replications = get_or<int>(doc, "replications", 64, where);
  c.seed = get_or<std::uint64_t>(doc, "seed", 0, where);
  c.output = get_or<std::string>(doc, "output", "", where);
  validate(c);
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Error::Code::kIo, "cannot open scenario file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(Error::Code::kConfig, "scenario file '" + path + "': " + e.what());
  }
  return scenario_from_json(doc);
}

void validate(const ScenarioConfig& c) {
  require(c.n >= 1, Error::Code::kConfig, "scenario: n must be positive");
  require(c.dimension >= 1, Error::Code::kConfig, "scenario: dimension must be positive");
  require(std::isfinite(c.horizon) && c.horizon > 0.0, Error::Code::kConfig, "scenario: horizon must be positive");
  require(c.steps >= 1, Error::Code::kConfig, "scenario: steps must be at least 1");
  require(c.replications >= 1, Error::Code::kConfig, "scenario: replications must be at least 1");
  require(c.bound_cap > 0.0, Error::Code::kConfig, "scenario: bound_cap must be positive");
  const int k = c.types();
  require(square_or_scalar(c.drift, k), Error::Code::kConfig, "scenario: drift must be 1 x 1 or K x K");
  require(square_or_scalar(c.diffusion, k), Error::Code::kConfig, "scenario: diffusion must be 1 x 1 or K x K");
  require(c.initial.size() == 1 || c.initial.size() == static_cast<std::size_t>(k), Error::Code::kConfig,
          "scenario: initial_law must have 1 or K entries");
  auto check_matrix = [&](const std::vector<std::vector<double>>& m, const char* what, bool probability) {
    require(square_or_scalar(m, k), Error::Code::kConfig, std::string("scenario: ") + what + " must be 1 x 1 or K x K");
    for (const auto& row : m) {
      for (double v : row) {
        require(std::isfinite(v), Error::Code::kConfig, std::string("scenario: non-finite ") + what);
        if (probability)
          require(v >= 0.0 && v <= 1.0, Error::Code::kConfig, std::string("scenario: ") + what + " must lie in [0,1]");
        else
          require(v >= 0.0, Error::Code::kConfig, std::string("scenario: ") + what + " must be non-negative");
      }
    }
  };
  check_matrix(c.p0, "p0", true);
  if (c.edge_mode == EdgeMode::kMarkov) {
    check_matrix(c.lambda, "lambda", false);
    check_matrix(c.mu, "mu", false);
  }
}

Model build_model(const ScenarioConfig& config, const Registry& registry) {
  validate(config);
  Model m;
  m.config = config;
  m.membership = build_membership(config.membership, config.n);
  const int k = m.membership.types();
  const int d = config.dimension;
  std::vector<KernelPtr> drift, diffusion;
  for (int a = 0; a < k; ++a) {
    for (int g = 0; g < k; ++g) {
      const KernelSpec& ds = expand(config.drift, a, g);
      const KernelSpec& ss = expand(config.diffusion, a, g);
      KernelPtr dk = registry.make(ds.name, ds.params, d, config.bound_cap);
      KernelPtr sk = registry.make(ss.name, ss.params, d, config.bound_cap);
      require(dk->role() == KernelRole::kDrift, Error::Code::kConfig, "'" + ds.name + "' is not a drift kernel");
      require(sk->role() == KernelRole::kDiffusion, Error::Code::kConfig, "'" + ss.name + "' is not a diffusion kernel");
      drift.push_back(std::move(dk));
      diffusion.push_back(std::move(sk));
    }
  }
  m.kernels = KernelSet(k, d, std::move(drift), std::move(diffusion));
  m.edges.mode = config.edge_mode;
  m.edges.types = k;
  for (int a = 0; a < k; ++a) {
    for (int g = 0; g < k; ++g) {
      m.edges.p0.push_back(expand(config.p0, a, g));
      if (config.edge_mode == EdgeMode::kMarkov) {
        m.edges.lambda.push_back(expand(config.lambda, a, g));
        m.edges.mu.push_back(expand(config.mu, a, g));
      }
    }
  }
  m.edges.validate();
  for (int a = 0; a < k; ++a)
    m.initial.emplace_back(config.initial.size() == 1 ? config.initial[0] : config.initial[static_cast<std::size_t>(a)]);
  m.grid = TimeGrid{config.horizon, config.steps};
  return m;
}

}  // namespace wips
