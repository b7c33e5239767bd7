#include "wips/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "wips/error.hpp"
#include "wips/estimators.hpp"
#include "wips/girsanov.hpp"
#include "wips/oracles.hpp"
#include "wips/pair_kernels.hpp"

namespace wips {

using nlohmann::json;
namespace fs = std::filesystem;

std::uint64_t fnv1a(const std::string& bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

int default_thread_count() {
  if (const char* env = std::getenv("WIPS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1 && v <= 1024) return static_cast<int>(v);
  }
  return 1;
}

const std::vector<std::string>& estimator_names() {
  static const std::vector<std::string> names = {
      "coupling_error", "lln_rate",    "poc_covariance", "clt_variance",  "nystrom",          "trace_identities",
      "girsanov",       "incomplete_u", "dbl_surrogate",  "lemma_oracles", "markov_marginals",
  };
  return names;
}

// ------------------------------------------------------------------ plan I/O

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  require(obj.is_object(), Error::Code::kConfig, where + " must be an object");
  std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items())
    require(keys.count(key) != 0, Error::Code::kConfig, "unknown key '" + key + "' in " + where);
}

template <class T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(Error::Code::kConfig, where + "." + key + ": " + e.what());
  }
}

KernelAlias alias_from_json(const json& j) {
  reject_unknown(j, {"name", "base", "params"}, "registry.kernels[]");
  KernelAlias a;
  a.name = get_or<std::string>(j, "name", "", "registry.kernels[]");
  a.base = get_or<std::string>(j, "base", "", "registry.kernels[]");
  a.params = get_or<std::vector<double>>(j, "params", {}, "registry.kernels[]");
  require(!a.name.empty() && !a.base.empty(), Error::Code::kConfig, "registry alias needs a name and a base");
  return a;
}

ScenarioPlan scenario_plan_from_json(const json& j, std::size_t index) {
  const std::string where = "scenarios[" + std::to_string(index) + "]";
  reject_unknown(j, {"config", "sweep", "estimators", "settings", "acceptance"}, where);
  ScenarioPlan s;
  require(j.contains("config"), Error::Code::kConfig, where + ".config is required");
  s.config = scenario_from_json(j.at("config"));
  if (j.contains("sweep")) {
    const json& w = j.at("sweep");
    reject_unknown(w, {"n", "p", "edge_mode", "p_power"}, where + ".sweep");
    s.sweep.n = get_or<std::vector<std::size_t>>(w, "n", {}, where + ".sweep");
    s.sweep.p = get_or<std::vector<double>>(w, "p", {}, where + ".sweep");
    for (const auto& m : get_or<std::vector<std::string>>(w, "edge_mode", {}, where + ".sweep"))
      s.sweep.edge_mode.push_back(edge_mode_from_string(m));
    if (w.contains("p_power")) s.sweep.p_power = get_or<double>(w, "p_power", 0.0, where + ".sweep");
    require(!w.contains("n") || !s.sweep.n.empty(), Error::Code::kConfig, where + ".sweep.n must not be empty");
    require(!w.contains("p") || !s.sweep.p.empty(), Error::Code::kConfig, where + ".sweep.p must not be empty");
    require(!(s.sweep.p_power && !s.sweep.p.empty()), Error::Code::kConfig,
            where + ".sweep: p and p_power are exclusive");
    for (std::size_t n : s.sweep.n) require(n >= 1, Error::Code::kConfig, where + ".sweep.n entries must be >= 1");
    for (double p : s.sweep.p)
      require(p >= 0.0 && p <= 1.0, Error::Code::kConfig, where + ".sweep.p entries must lie in [0,1]");
  }
  s.estimators = get_or<std::vector<std::string>>(j, "estimators", {}, where);
  require(!s.estimators.empty(), Error::Code::kConfig, where + ": empty estimator selection");
  for (const auto& e : s.estimators)
    require(std::find(estimator_names().begin(), estimator_names().end(), e) != estimator_names().end(),
            Error::Code::kConfig, where + ": unknown estimator '" + e + "'");
  if (j.contains("settings")) {
    const json& t = j.at("settings");
    const std::string sw = where + ".settings";
    reject_unknown(t,
                   {"test_function", "reference_size", "limit_paths", "poc_pairs", "edge_replications",
                    "tail_replications", "tail_k"},
                   sw);
    EstimatorSettings& st = s.settings;
    if (t.contains("test_function")) {
      const json& f = t.at("test_function");
      reject_unknown(f, {"name", "params"}, sw + ".test_function");
      st.test_function = get_or<std::string>(f, "name", st.test_function, sw + ".test_function");
      st.test_params = get_or<std::vector<double>>(f, "params", {}, sw + ".test_function");
      TestFunction probe(st.test_function, st.test_params);
      (void)probe;
    }
    st.reference_size = get_or<std::size_t>(t, "reference_size", st.reference_size, sw);
    st.limit_paths = get_or<std::size_t>(t, "limit_paths", st.limit_paths, sw);
    st.poc_pairs = get_or<std::string>(t, "poc_pairs", st.poc_pairs, sw);
    st.edge_replications = get_or<std::size_t>(t, "edge_replications", st.edge_replications, sw);
    st.tail_replications = get_or<std::size_t>(t, "tail_replications", st.tail_replications, sw);
    st.tail_k = get_or<double>(t, "tail_k", st.tail_k, sw);
    require(st.poc_pairs == "disjoint" || st.poc_pairs == "first" || st.poc_pairs == "all", Error::Code::kConfig,
            sw + ".poc_pairs must be 'disjoint', 'first' or 'all'");
    require(st.reference_size >= 2 && st.limit_paths >= 3, Error::Code::kConfig,
            sw + ": reference_size >= 2 and limit_paths >= 3 required");
    require(st.tail_k > 0.0, Error::Code::kConfig, sw + ".tail_k must be positive");
  }
  if (j.contains("acceptance")) {
    const json& a = j.at("acceptance");
    require(a.is_array(), Error::Code::kConfig, where + ".acceptance must be an array");
    for (const json& r : a) {
      reject_unknown(r, {"metric", "min", "max"}, where + ".acceptance[]");
      AcceptanceRule rule;
      rule.metric = get_or<std::string>(r, "metric", "", where + ".acceptance[]");
      if (r.contains("min")) rule.min = get_or<double>(r, "min", 0.0, where + ".acceptance[]");
      if (r.contains("max")) rule.max = get_or<double>(r, "max", 0.0, where + ".acceptance[]");
      require(!rule.metric.empty() && (rule.min || rule.max), Error::Code::kConfig,
              where + ".acceptance[] needs a metric and a min or max");
      s.acceptance.push_back(rule);
    }
  }
  return s;
}

json rule_to_json(const AcceptanceRule& r) {
  json j{{"metric", r.metric}};
  if (r.min) j["min"] = *r.min;
  if (r.max) j["max"] = *r.max;
  return j;
}

}  // namespace

ExperimentPlan plan_from_json(const json& doc) {
  reject_unknown(doc, {"name", "seed", "strict", "output", "registry", "scenarios"}, "plan");
  ExperimentPlan plan;
  plan.name = get_or<std::string>(doc, "name", plan.name, "plan");
  plan.seed = get_or<std::uint64_t>(doc, "seed", 0, "plan");
  plan.strict = get_or<bool>(doc, "strict", false, "plan");
  plan.output = get_or<std::string>(doc, "output", plan.output, "plan");
  if (doc.contains("registry")) {
    const json& r = doc.at("registry");
    reject_unknown(r, {"kernels"}, "plan.registry");
    if (r.contains("kernels")) {
      require(r.at("kernels").is_array(), Error::Code::kConfig, "plan.registry.kernels must be an array");
      for (const json& k : r.at("kernels")) plan.aliases.push_back(alias_from_json(k));
    }
  }
  require(doc.contains("scenarios") && doc.at("scenarios").is_array() && !doc.at("scenarios").empty(),
          Error::Code::kConfig, "plan.scenarios must be a non-empty array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < doc.at("scenarios").size(); ++i) {
    plan.scenarios.push_back(scenario_plan_from_json(doc.at("scenarios")[i], i));
    require(names.insert(plan.scenarios.back().config.name).second, Error::Code::kConfig,
            "duplicate scenario name '" + plan.scenarios.back().config.name + "'");
  }
  // Resolve every kernel once so registry errors surface as config errors.
  const Registry registry = registry_for(plan);
  for (const ScenarioPlan& s : plan.scenarios) build_model(s.config, registry);
  return plan;
}

ExperimentPlan load_plan(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Error::Code::kConfig, "cannot open plan '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(Error::Code::kConfig, "plan '" + path + "': " + e.what());
  }
  return plan_from_json(doc);
}

json to_json(const ExperimentPlan& plan) {
  json scenarios = json::array();
  for (const ScenarioPlan& s : plan.scenarios) {
    json sweep = json::object();
    if (!s.sweep.n.empty()) sweep["n"] = s.sweep.n;
    if (!s.sweep.p.empty()) sweep["p"] = s.sweep.p;
    if (!s.sweep.edge_mode.empty()) {
      json modes = json::array();
      for (EdgeMode m : s.sweep.edge_mode) modes.push_back(to_string(m));
      sweep["edge_mode"] = modes;
    }
    if (s.sweep.p_power) sweep["p_power"] = *s.sweep.p_power;
    const EstimatorSettings& st = s.settings;
    json settings{{"test_function", {{"name", st.test_function}, {"params", st.test_params}}},
                  {"reference_size", st.reference_size},
                  {"limit_paths", st.limit_paths},
                  {"poc_pairs", st.poc_pairs},
                  {"edge_replications", st.edge_replications},
                  {"tail_replications", st.tail_replications},
                  {"tail_k", st.tail_k}};
    json rules = json::array();
    for (const AcceptanceRule& r : s.acceptance) rules.push_back(rule_to_json(r));
    scenarios.push_back({{"config", to_json(s.config)},
                         {"sweep", sweep},
                         {"estimators", s.estimators},
                         {"settings", settings},
                         {"acceptance", rules}});
  }
  json kernels = json::array();
  for (const KernelAlias& a : plan.aliases) kernels.push_back({{"name", a.name}, {"base", a.base}, {"params", a.params}});
  return {{"name", plan.name},
          {"seed", plan.seed},
          {"strict", plan.strict},
          {"output", plan.output},
          {"registry", {{"kernels", kernels}}},
          {"scenarios", scenarios}};
}

Registry registry_for(const ExperimentPlan& plan) {
  Registry r = Registry::builtin();
  for (const KernelAlias& a : plan.aliases) r.add_alias(a.name, a.base, a.params);
  return r;
}

// ------------------------------------------------------------------ running

namespace {

/// Runs f(0..count-1) on up to `threads` workers. Results must be written by
/// index; the first exception (lowest index) is rethrown.
template <class F>
void parallel_for(std::size_t count, int threads, F&& f) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_index = count;
  std::exception_ptr failure;
  auto body = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Shortest round-trip form, for labels.
std::string short_num(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string str() const {
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t c = 0; c < cells.size(); ++c) out << (c ? "\t" : "") << cells[c];
      out << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out.str();
  }
};

struct Point {
  std::size_t n = 0;
  double p = 0.0;
  EdgeMode mode = EdgeMode::kStatic;
  std::string label;
  Model model;
};

Model with_edges(const Model& model, EdgeMode mode, std::optional<double> p) {
  if (mode == EdgeMode::kStatic) {
    require(p.has_value() || model.config.edge_mode == EdgeMode::kStatic, Error::Code::kConfig,
            "static sweep point needs a p value");
    return p ? with_static_probability(model, *p) : model;
  }
  require(!model.config.lambda.empty() && !model.config.mu.empty(), Error::Code::kConfig,
          "markov sweep point needs lambda and mu in the scenario");
  Model out = model;
  out.config.edge_mode = EdgeMode::kMarkov;
  out.edges.mode = EdgeMode::kMarkov;
  if (p) {
    out.config.p0 = {{*p}};
    std::fill(out.edges.p0.begin(), out.edges.p0.end(), *p);
  }
  out.edges.validate();
  return out;
}

std::vector<Point> sweep_points(const ScenarioPlan& plan, const Model& base) {
  const ScenarioConfig& c = plan.config;
  std::vector<std::size_t> ns = plan.sweep.n.empty() ? std::vector<std::size_t>{c.n} : plan.sweep.n;
  std::vector<EdgeMode> modes =
      plan.sweep.edge_mode.empty() ? std::vector<EdgeMode>{c.edge_mode} : plan.sweep.edge_mode;
  std::vector<std::optional<double>> ps;
  if (plan.sweep.p.empty())
    ps.push_back(std::nullopt);
  else
    for (double p : plan.sweep.p) ps.push_back(p);
  std::vector<Point> out;
  for (EdgeMode mode : modes)
    for (const auto& p_axis : ps)
      for (std::size_t n : ns) {
        Point pt;
        pt.n = n;
        pt.mode = mode;
        std::optional<double> p = p_axis;
        if (plan.sweep.p_power) p = std::min(1.0, std::pow(static_cast<double>(n), *plan.sweep.p_power));
        Model sized = with_size(base, n);
        pt.model = (p || mode != c.edge_mode) ? with_edges(sized, mode, p) : sized;
        pt.p = pt.model.edges.probability(0, 0, 0.0);
        std::ostringstream label;
        label << "n=" << n << ",p=" << short_num(pt.p) << "," << to_string(mode);
        pt.label = label.str();
        out.push_back(std::move(pt));
      }
  return out;
}

enum KeyTag : std::uint64_t {
  kTagReference = 1,
  kTagLimitPaths = 2,
  kTagCoupling = 10,
  kTagPoc = 11,
  kTagClt = 12,
  kTagGirsanov = 13,
  kTagDbl = 14,
  kTagOracle = 15,
  kTagMarkov = 16,
};

class ScenarioRunner {
 public:
  ScenarioRunner(const ScenarioPlan& plan, const Registry& registry, StreamKey key, int threads)
      : plan_(plan), key_(key), threads_(threads) {
    base_ = build_model(plan.config, registry);
    points_ = sweep_points(plan, base_);
    replications_ = static_cast<std::size_t>(plan.config.replications);
  }

  void run() {
    for (const std::string& e : plan_.estimators) {
      if (e == "coupling_error") coupling_table();
      if (e == "lln_rate") lln_rate();
      if (e == "poc_covariance") poc();
      if (e == "clt_variance") clt();
      if (e == "nystrom") nystrom();
      if (e == "trace_identities") traces();
      if (e == "girsanov") girsanov();
      if (e == "incomplete_u") incomplete();
      if (e == "dbl_surrogate") dbl();
      if (e == "lemma_oracles") oracles();
      if (e == "markov_marginals") markov();
    }
  }

  const std::map<std::string, Table>& tables() const { return tables_; }
  const json& metrics() const { return metrics_; }
  const std::vector<Point>& points() const { return points_; }

 private:
  StreamKey rep_key(KeyTag tag, std::size_t r) const { return key_.derive(tag, r); }
  std::string pm(const Point& p, const std::string& name) const { return "[" + p.label + "]." + name; }
  void metric(const std::string& estimator, const std::string& name, double v) { metrics_[estimator + name] = v; }
  void metric(const std::string& estimator, const Point& p, const std::string& name, double v) {
    metrics_[estimator + pm(p, name)] = v;
  }
  bool single_type() const { return base_.membership.types() == 1; }

  TestFunction test_function() const { return TestFunction(plan_.settings.test_function, plan_.settings.test_params); }

  // Shared per-point coupling errors (used by coupling_error and lln_rate).
  const std::vector<MeanEstimate>& coupling() {
    if (!coupling_.empty()) return coupling_;
    for (const Point& pt : points_) {
      std::vector<double> sq(replications_), first(replications_), mx(replications_);
      parallel_for(replications_, threads_, [&](std::size_t r) {
        const CouplingError ce = coupling_error(simulate_coupled(pt.model, rep_key(kTagCoupling, r)));
        sq[r] = ce.mean_sup_sq;
        first[r] = ce.mean_sup_abs;
        mx[r] = ce.max_abs;
      });
      coupling_.push_back(mean_estimate(sq));
      coupling_first_.push_back(mean_estimate(first));
      coupling_max_.push_back(*std::max_element(mx.begin(), mx.end()));
    }
    return coupling_;
  }

  void coupling_table() {
    coupling();
    Table t{{"n", "p", "edge_mode", "mean_sup_sq", "se", "mean_sup_abs", "se_abs", "max_abs"}, {}};
    for (std::size_t k = 0; k < points_.size(); ++k) {
      const Point& p = points_[k];
      t.rows.push_back({std::to_string(p.n), num(p.p), to_string(p.mode), num(coupling_[k].value),
                        num(coupling_[k].se), num(coupling_first_[k].value), num(coupling_first_[k].se),
                        num(coupling_max_[k])});
      metric("coupling_error", p, "mean_sup_sq", coupling_[k].value);
      metric("coupling_error", p, "mean_sup_abs", coupling_first_[k].value);
      metric("coupling_error", p, "max_abs", coupling_max_[k]);
    }
    double worst = 0.0;
    for (double m : coupling_max_) worst = std::max(worst, m);
    metric("coupling_error", ".max_abs", worst);
    tables_["coupling_error"] = t;
  }

  void lln_rate() {
    coupling();
    std::vector<RateEntry> entries;
    for (std::size_t k = 0; k < points_.size(); ++k) {
      const Point& p = points_[k];
      entries.push_back({p.n, static_cast<double>(p.model.membership.min_count()),
                         pbar(p.model.edges, p.model.grid), coupling_[k].value});
    }
    std::vector<std::size_t> order(entries.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return entries[a].nbar * entries[a].pbar < entries[b].nbar * entries[b].pbar;
    });
    std::vector<RateEntry> sorted;
    for (std::size_t k : order) sorted.push_back(entries[k]);
    const RateTable rt = lln_rate_table(sorted);
    Table t{{"n", "nbar", "pbar", "nbar_pbar", "error", "scaled", "used"}, {}};
    bool decreasing = true;
    for (std::size_t k = 0; k < rt.rows.size(); ++k) {
      const RateRow& r = rt.rows[k];
      t.rows.push_back({std::to_string(r.entry.n), num(r.entry.nbar), num(r.entry.pbar), num(r.np),
                        num(r.entry.error), num(r.scaled), r.used ? "1" : "0"});
      if (k > 0 && !(r.entry.error < rt.rows[k - 1].entry.error)) decreasing = false;
    }
    metric("lln_rate", ".slope", rt.slope);
    metric("lln_rate", ".scaled_spread", rt.scaled_spread);
    metric("lln_rate", ".strictly_decreasing", decreasing ? 1.0 : 0.0);
    metric("lln_rate", ".rows", static_cast<double>(rt.rows.size()));
    tables_["lln_rate"] = t;
  }

  void poc() {
    const TestFunction phi = test_function();
    const bool all = plan_.settings.poc_pairs == "all";
    Table t{{"n", "p", "edge_mode", "pairs", "covariance", "se"}, {}};
    std::vector<CovarianceEstimate> est;
    for (const Point& pt : points_) {
      require(pt.n >= 2, Error::Code::kConfig, "poc_covariance needs n >= 2");
      auto pairs = plan_.settings.poc_pairs == "first" ? std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}}
                                                       : disjoint_pairs(pt.n / 2);
      std::vector<std::vector<double>> a(replications_), b(replications_);
      parallel_for(replications_, threads_, [&](std::size_t r) {
        const PathEnsemble paths = simulate_interacting(pt.model, rep_key(kTagPoc, r));
        if (all) {
          for (std::size_t i = 0; i < paths.n; ++i) a[r].push_back(phi.of_z(paths, i));
          return;
        }
        for (const auto& [i, j] : pairs) {
          a[r].push_back(phi.of_z(paths, i));
          b[r].push_back(phi.of_z(paths, j));
        }
      });
      CovarianceEstimate e;
      if (all) {
        e = exchangeable_cross_covariance(a, a);
      } else {
        PocSample sample(pairs);
        for (std::size_t r = 0; r < replications_; ++r) sample.add_values(a[r], b[r]);
        e = poc_cross_covariance(sample);
      }
      est.push_back(e);
      t.rows.push_back({std::to_string(pt.n), num(pt.p), to_string(pt.mode), std::to_string(e.pairs), num(e.value),
                        num(e.se)});
      metric("poc_covariance", pt, "covariance", e.value);
      metric("poc_covariance", pt, "se", e.se);
    }
    const CovarianceEstimate& last = est.back();
    metric("poc_covariance", ".last_abs_over_se", std::abs(last.value) / last.se);
    metric("poc_covariance", ".last_below_first", std::abs(last.value) < std::abs(est.front().value) ? 1.0 : 0.0);
    tables_["poc_covariance"] = t;
  }

  const PathEnsemble& reference() {
    if (!reference_) {
      reference_ = simulate_limit(with_size(base_, plan_.settings.reference_size), key_.derive(kTagReference));
    }
    return *reference_;
  }

  const LimitLaw& law() {
    require(single_type(), Error::Code::kConfig, "CLT estimators need a single-type scenario");
    if (!law_) law_ = LimitLaw(with_size(base_, plan_.settings.reference_size), reference());
    return *law_;
  }

  void clt() {
    require(single_type(), Error::Code::kConfig, "clt_variance needs a single-type scenario");
    TestFunction phi = test_function();
    phi.center_on(reference());
    Table t{{"n", "p", "edge_mode", "variance", "se", "ci_lo", "ci_hi", "mean"}, {}};
    clt_.clear();
    for (const Point& pt : points_) {
      std::vector<double> eta(replications_);
      parallel_for(replications_, threads_, [&](std::size_t r) {
        eta[r] = fluctuation_field(simulate_interacting(pt.model, rep_key(kTagClt, r)), phi);
      });
      const VarianceEstimate v = variance_estimate(eta);
      clt_.push_back({&pt, v});
      t.rows.push_back({std::to_string(pt.n), num(pt.p), to_string(pt.mode), num(v.value), num(v.se), num(v.lo),
                        num(v.hi), num(mean(eta))});
      metric("clt_variance", pt, "variance", v.value);
      metric("clt_variance", pt, "se", v.se);
    }
    if (clt_.size() >= 2) {
      const VarianceEstimate& a = clt_.front().second;
      const VarianceEstimate& b = clt_.back().second;
      metric("clt_variance", ".rel_diff", std::abs(a.value - b.value) / (0.5 * (a.value + b.value)));
      metric("clt_variance", ".ci_overlap", (a.lo <= b.hi && b.lo <= a.hi) ? 1.0 : 0.0);
    }
    tables_["clt_variance"] = t;
  }

  const PairKernelCache& cache() {
    if (!cache_) {
      limit_paths_ = simulate_independent_limit(law(), plan_.settings.limit_paths, key_.derive(kTagLimitPaths));
      cache_ = pair_kernels(*limit_paths_, law());
    }
    return *cache_;
  }

  void nystrom() {
    const PairKernelCache& c = cache();
    TestFunction phi = test_function();
    phi.center_on(*limit_paths_);
    std::vector<double> v(limit_paths_->n);
    for (std::size_t r = 0; r < v.size(); ++r) v[r] = phi.of_x(*limit_paths_, r);
    const NystromResult res = nystrom_covariance(c, v, v);
    double plain = 0.0;
    for (double x : v) plain += x * x;
    plain /= static_cast<double>(v.size());
    Table t{{"paths", "covariance", "rcond", "plain_variance"}, {}};
    t.rows.push_back({std::to_string(v.size()), num(res.value), num(res.rcond), num(plain)});
    metric("nystrom", ".value", res.value);
    metric("nystrom", ".rcond", res.rcond);
    metric("nystrom", ".plain_variance", plain);
    if (!clt_.empty()) {
      // Compare with the empirical variance at the largest p (then largest n).
      auto best = std::max_element(clt_.begin(), clt_.end(), [](const auto& a, const auto& b) {
        return std::pair(a.first->p, a.first->n) < std::pair(b.first->p, b.first->n);
      });
      metric("nystrom", ".rel_err_vs_clt", std::abs(res.value - best->second.value) / best->second.value);
    }
    tables_["nystrom"] = t;
  }

  void traces() {
    const TraceCheck tc = trace_identities(cache(), law());
    Table t{{"quantity", "estimate", "se", "target"}, {}};
    t.rows.push_back({"trace_aa", num(tc.trace_aa.value), num(tc.trace_aa.se), num(tc.integrated_lambda)});
    t.rows.push_back({"trace_a2", num(tc.trace_a2.value), num(tc.trace_a2.se), "0"});
    metric("trace_identities", ".trace_aa", tc.trace_aa.value);
    metric("trace_identities", ".integrated_lambda", tc.integrated_lambda);
    metric("trace_identities", ".trace_aa_z", std::abs(tc.trace_aa.value - tc.integrated_lambda) / tc.trace_aa.se);
    metric("trace_identities", ".trace_a2", tc.trace_a2.value);
    metric("trace_identities", ".trace_a2_z", std::abs(tc.trace_a2.value) / tc.trace_a2.se);
    tables_["trace_identities"] = t;
  }

  const std::vector<std::vector<GirsanovValues>>& girsanov_values() {
    if (!girsanov_.empty()) return girsanov_;
    const LimitLaw& lw = law();
    for (const Point& pt : points_) {
      std::vector<GirsanovValues> vals(replications_);
      parallel_for(replications_, threads_, [&](std::size_t r) {
        const StreamKey key = rep_key(kTagGirsanov, r);
        const PathEnsemble paths = simulate_independent_limit(lw, pt.n, key);
        vals[r] = girsanov_functionals(paths, lw, pt.model.edges, key);
      });
      girsanov_.push_back(std::move(vals));
    }
    return girsanov_;
  }

  void girsanov() {
    const auto& all = girsanov_values();
    Table t{{"n", "p", "edge_mode", "mean_d1_sq", "se_d1", "mean_d2_abs", "se_d2", "mean_exp_j", "se_exp_j"}, {}};
    std::vector<double> d1m, d2m;
    for (std::size_t k = 0; k < points_.size(); ++k) {
      const Point& pt = points_[k];
      std::vector<double> d1, d2, ej;
      for (const GirsanovValues& g : all[k]) {
        d1.push_back((g.j1 - g.j1_tilde) * (g.j1 - g.j1_tilde));
        d2.push_back(std::abs(g.j2 - g.j2_tilde));
        ej.push_back(std::exp(g.log_density()));
      }
      const MeanEstimate a = mean_estimate(d1), b = mean_estimate(d2), c = mean_estimate(ej);
      d1m.push_back(a.value);
      d2m.push_back(b.value);
      t.rows.push_back({std::to_string(pt.n), num(pt.p), to_string(pt.mode), num(a.value), num(a.se), num(b.value),
                        num(b.se), num(c.value), num(c.se)});
      metric("girsanov", pt, "mean_d1_sq", a.value);
      metric("girsanov", pt, "mean_d2_abs", b.value);
      metric("girsanov", pt, "mean_exp_j", c.value);
      metric("girsanov", pt, "exp_j_z", std::abs(c.value - 1.0) / c.se);
    }
    auto decreasing = [](const std::vector<double>& v) {
      for (std::size_t k = 1; k < v.size(); ++k)
        if (!(v[k] < v[k - 1])) return 0.0;
      return 1.0;
    };
    metric("girsanov", ".d1_decreasing", decreasing(d1m));
    metric("girsanov", ".d2_decreasing", decreasing(d2m));
    tables_["girsanov"] = t;
  }

  void incomplete() {
    const auto& all = girsanov_values();
    const LimitLaw& lw = law();
    Table t{{"n", "p", "edge_mode", "variance", "se", "formula", "z"}, {}};
    for (std::size_t k = 0; k < points_.size(); ++k) {
      const Point& pt = points_[k];
      std::vector<double> u;
      for (const GirsanovValues& g : all[k]) u.push_back(g.u);
      const VarianceEstimate v = variance_estimate(u);
      const EdgeModel em = pt.model.edges;
      const double nd = static_cast<double>(pt.n);
      const double formula = (nd - 1.0) / nd * lw.sigma_sq([&em](double s) { return em.probability(0, 0, s); });
      const double z = std::abs(v.value - formula) / v.se;
      t.rows.push_back({std::to_string(pt.n), num(pt.p), to_string(pt.mode), num(v.value), num(v.se), num(formula),
                        num(z)});
      metric("incomplete_u", pt, "variance", v.value);
      metric("incomplete_u", pt, "formula", formula);
      metric("incomplete_u", pt, "z", z);
    }
    tables_["incomplete_u"] = t;
  }

  void dbl() {
    const PathEnsemble& ref = reference();
    const BLDictionary dict = default_bl_dictionary(base_.dim());
    const int m = base_.grid.steps;
    const int types = base_.membership.types();
    std::vector<EmpiricalMeasure> target;
    for (int g = 0; g < types; ++g) target.push_back(snapshot_empirical(ref, m, g, PathSet::kLimit));
    Table t{{"n", "p", "edge_mode", "mean_dbl", "se"}, {}};
    std::vector<double> means;
    for (const Point& pt : points_) {
      std::vector<double> v(replications_);
      parallel_for(replications_, threads_, [&](std::size_t r) {
        const PathEnsemble paths = simulate_interacting(pt.model, rep_key(kTagDbl, r));
        double worst = 0.0;
        for (int g = 0; g < types; ++g)
          worst = std::max(worst, dbl_surrogate(snapshot_empirical(paths, m, g), target[static_cast<std::size_t>(g)], dict));
        v[r] = worst;
      });
      const MeanEstimate e = mean_estimate(v);
      means.push_back(e.value);
      t.rows.push_back({std::to_string(pt.n), num(pt.p), to_string(pt.mode), num(e.value), num(e.se)});
      metric("dbl_surrogate", pt, "mean", e.value);
    }
    double dec = 1.0;
    for (std::size_t k = 1; k < means.size(); ++k)
      if (!(means[k] < means[k - 1])) dec = 0.0;
    metric("dbl_surrogate", ".decreasing", dec);
    tables_["dbl_surrogate"] = t;
  }

  void oracles() {
    Table t{{"statistic", "n", "p", "bound", "empirical", "se", "margin"}, {}};
    double max_diff = 0.0;
    double min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n <= 20; ++n)
      for (int pi = 1; pi <= 10; ++pi) {
        const BinomialSpec spec{n, pi / 10.0};
        const double exact = binomial_inverse_moment(spec, 1, 1).value;
        const double enumerated = binomial_inverse_moment_enumerated(spec, 1, 1);
        max_diff = std::max(max_diff, std::abs(exact - enumerated));
        min_margin = std::min(min_margin, 1.0 / ((n + 1.0) * spec.p) - enumerated);
        for (int m = 2; m <= 5; ++m) {
          min_margin = std::min(min_margin, binomial_inverse_moment(spec, m, 1).value -
                                                binomial_inverse_moment_enumerated(spec, m, 1));
          min_margin = std::min(min_margin, binomial_inverse_moment(spec, 1, m).value -
                                                binomial_inverse_moment_enumerated(spec, 1, m));
        }
      }
    t.rows.push_back({"binomial_inverse_moment", "0..20", "0.1..1", "", num(max_diff), "", num(min_margin)});
    metric("lemma_oracles", ".binomial_max_abs_diff", max_diff);
    metric("lemma_oracles", ".binomial_min_bound_margin", min_margin);
    for (std::size_t k = 0; k < points_.size(); ++k) {
      const Point& pt = points_[k];
      const StreamKey key = rep_key(kTagOracle, k);
      std::vector<OracleRow> rows;
      if (pt.p > 0.0 && pt.n >= 4) {
        auto ns = neighbor_sum_checks(pt.n / 2, pt.n - pt.n / 2, pt.p, replications_, key.derive(1));
        rows.insert(rows.end(), ns.begin(), ns.end());
      }
      rows.push_back(degree_tail_check(pt.n, pt.p, plan_.settings.tail_k, plan_.settings.tail_replications,
                                       key.derive(2)));
      for (const OracleRow& r : rows) {
        t.rows.push_back({r.statistic, std::to_string(pt.n), num(pt.p), num(r.bound), num(r.empirical), num(r.se),
                          num(r.margin())});
        metric("lemma_oracles", pt, r.statistic + "_margin", r.margin());
      }
    }
    tables_["lemma_oracles"] = t;
  }

  void markov() {
    Table t{{"p0", "lambda", "mu", "time", "frequency", "se", "exact", "z"}, {}};
    const std::size_t reps = plan_.settings.edge_replications;
    for (std::size_t k = 0; k < points_.size(); ++k) {
      const Point& pt = points_[k];
      if (pt.mode != EdgeMode::kMarkov) continue;
      const EdgeModel em = pt.model.edges;
      const TimeGrid grid = pt.model.grid;
      const MembershipMap two({2});
      std::vector<std::vector<std::uint8_t>> state(reps);
      parallel_for(reps, threads_, [&](std::size_t r) {
        EdgeProcess proc(two, em, rep_key(kTagMarkov, r), grid);
        std::vector<std::uint8_t> s;
        s.push_back(proc.current().edge(0, 1) ? 1 : 0);
        for (int step = 1; step <= grid.steps; ++step) {
          proc.advance();
          s.push_back(proc.current().edge(0, 1) ? 1 : 0);
        }
        state[r] = std::move(s);
      });
      for (int q = 0; q <= 4; ++q) {
        const int step = grid.steps * q / 4;
        std::size_t on = 0;
        for (const auto& s : state) on += s[static_cast<std::size_t>(step)];
        const double freq = static_cast<double>(on) / static_cast<double>(reps);
        const double tt = grid.time(step);
        const double exact =
            marginal_edge_probability(tt, em.initial(0, 0), em.on_rate(0, 0), em.off_rate(0, 0));
        const double se = binomial_se(exact, reps);
        const double z = se > 0.0 ? std::abs(freq - exact) / se : (freq == exact ? 0.0 : HUGE_VAL);
        t.rows.push_back({num(em.initial(0, 0)), num(em.on_rate(0, 0)), num(em.off_rate(0, 0)), num(tt), num(freq),
                          num(se), num(exact), num(z)});
        if (q == 4) {
          metric("markov_marginals", pt, "frequency", freq);
          metric("markov_marginals", pt, "exact", exact);
          metric("markov_marginals", pt, "z", z);
        }
      }
    }
    tables_["markov_marginals"] = t;
  }

  const ScenarioPlan& plan_;
  StreamKey key_;
  int threads_;
  Model base_;
  std::vector<Point> points_;
  std::size_t replications_ = 0;
  std::map<std::string, Table> tables_;
  json metrics_ = json::object();
  std::vector<MeanEstimate> coupling_, coupling_first_;
  std::vector<double> coupling_max_;
  std::vector<std::pair<const Point*, VarianceEstimate>> clt_;
  std::optional<PathEnsemble> reference_;
  std::optional<LimitLaw> law_;
  std::optional<PathEnsemble> limit_paths_;
  std::optional<PairKernelCache> cache_;
  std::vector<std::vector<GirsanovValues>> girsanov_;
};

json evaluate_rules(const json& rules, const json& metrics, bool& all_pass) {
  json out = json::array();
  for (const json& r : rules) {
    const std::string name = r.at("metric").get<std::string>();
    json row = r;
    bool pass = metrics.contains(name) && metrics.at(name).is_number();
    if (pass) {
      const double v = metrics.at(name).get<double>();
      row["value"] = v;
      if (r.contains("min")) pass = pass && v >= r.at("min").get<double>();
      if (r.contains("max")) pass = pass && v <= r.at("max").get<double>();
    } else {
      row["value"] = nullptr;
    }
    row["pass"] = pass;
    all_pass = all_pass && pass;
    out.push_back(row);
  }
  return out;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), Error::Code::kIo, "cannot write " + path.string());
  out << content;
  require(static_cast<bool>(out), Error::Code::kIo, "failed writing " + path.string());
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

RunResult run_experiment(const ExperimentPlan& plan, const RunOptions& options) {
  const std::uint64_t seed = options.seed.value_or(plan.seed);
  const bool strict = options.strict || plan.strict;
  const fs::path out_dir = options.output.value_or(plan.output);
  const Registry registry = registry_for(plan);
  fs::create_directories(out_dir);

  RunResult result;
  result.output_dir = out_dir.string();
  json scenarios = json::array();
  std::map<std::string, std::string> files;
  bool all_pass = true;
  for (std::size_t s = 0; s < plan.scenarios.size(); ++s) {
    const ScenarioPlan& sp = plan.scenarios[s];
    json entry{{"name", sp.config.name}};
    json rules = json::array();
    for (const AcceptanceRule& r : sp.acceptance) rules.push_back(rule_to_json(r));
    json metrics = json::object();
    try {
      ScenarioRunner runner(sp, registry, StreamKey(seed).derive(s + 1, sp.config.seed), options.threads);
      runner.run();
      metrics = runner.metrics();
      const fs::path dir = out_dir / sp.config.name;
      fs::create_directories(dir);
      for (const auto& [name, table] : runner.tables()) {
        const std::string text = table.str();
        write_file(dir / (name + ".tsv"), text);
        files[sp.config.name + "/" + name + ".tsv"] = hex(fnv1a(text));
      }
      json labels = json::array();
      for (const auto& p : runner.points()) labels.push_back(p.label);
      entry["points"] = labels;
      entry["status"] = "ok";
    } catch (const std::exception& e) {
      entry["status"] = "error";
      entry["error"] = e.what();
      result.all_ran = false;
    }
    bool pass = entry["status"] == "ok";
    entry["metrics"] = metrics;
    entry["acceptance"] = evaluate_rules(rules, metrics, pass);
    entry["pass"] = pass;
    all_pass = all_pass && pass;
    scenarios.push_back(entry);
  }
  result.summary = {{"plan", plan.name}, {"seed", seed}, {"strict", strict}, {"scenarios", scenarios}, {"pass", all_pass}};
  result.passed = all_pass;
  const std::string summary_text = result.summary.dump(2) + "\n";
  write_file(out_dir / "summary.json", summary_text);
  files["summary.json"] = hex(fnv1a(summary_text));
  const json manifest{{"plan", plan.name},
                      {"version", WIPS_VERSION_STRING},
                      {"seed", seed},
                      {"strict", strict},
                      {"config_hash", hex(fnv1a(to_json(plan).dump()))},
                      {"files", files}};
  write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return result;
}

CheckResult check_outputs(const std::string& output_dir) {
  const fs::path path = fs::path(output_dir) / "summary.json";
  std::ifstream in(path);
  require(static_cast<bool>(in), Error::Code::kConfig, "no summary.json in '" + output_dir + "'");
  json summary;
  try {
    summary = json::parse(in);
  } catch (const json::exception& e) {
    fail(Error::Code::kConfig, "summary.json: " + std::string(e.what()));
  }
  require(summary.contains("scenarios") && summary.at("scenarios").is_array(), Error::Code::kConfig,
          "summary.json has no scenarios");
  CheckResult result;
  result.passed = true;
  std::ostringstream report;
  for (const json& s : summary.at("scenarios")) {
    bool pass = s.value("status", "") == "ok";
    json rules = json::array();
    for (const json& r : s.value("acceptance", json::array())) {
      json rule{{"metric", r.at("metric")}};
      if (r.contains("min")) rule["min"] = r.at("min");
      if (r.contains("max")) rule["max"] = r.at("max");
      rules.push_back(rule);
    }
    const json evaluated = evaluate_rules(rules, s.value("metrics", json::object()), pass);
    report << (pass ? "PASS " : "FAIL ") << s.value("name", "?");
    if (s.value("status", "") != "ok") report << " (" << s.value("error", "scenario failed") << ")";
    report << '\n';
    for (const json& r : evaluated) {
      report << "  " << (r.at("pass").get<bool>() ? "ok   " : "fail ") << r.at("metric").get<std::string>() << " = "
             << (r.at("value").is_null() ? std::string("missing") : num(r.at("value").get<double>()));
      if (r.contains("min")) report << " min " << num(r.at("min").get<double>());
      if (r.contains("max")) report << " max " << num(r.at("max").get<double>());
      report << '\n';
    }
    result.passed = result.passed && pass;
  }
  result.report = report.str();
  return result;
}

// ------------------------------------------------------------------ describe

json describe_registry_json(const Registry& registry) {
  json kernels = json::array();
  for (const KernelInfo& k : registry.kernels()) {
    json e{{"name", k.name},
           {"role", k.role == KernelRole::kDrift ? "drift" : "diffusion"},
           {"params", k.param_names},
           {"factorized", k.factorized},
           {"formula", k.formula}};
    if (!k.alias_of.empty()) {
      e["base"] = k.alias_of;
      e["alias_params"] = k.alias_params;
    }
    kernels.push_back(e);
  }
  json laws = json::array();
  for (const NamedEntry& e : initial_law_registry())
    laws.push_back({{"name", e.name}, {"params", e.param_names}, {"description", e.description}});
  json tests = json::array();
  for (const NamedEntry& e : test_function_registry())
    tests.push_back({{"name", e.name}, {"params", e.param_names}, {"description", e.description}});
  json edges = json::array({{{"name", "static"}, {"params", {"p0"}}},
                            {{"name", "markov"}, {"params", {"p0", "lambda", "mu"}}}});
  return {{"kernels", kernels},
          {"initial_laws", laws},
          {"test_functions", tests},
          {"edge_models", edges},
          {"estimators", estimator_names()}};
}

std::string describe_registry_text(const Registry& registry) {
  std::ostringstream out;
  out << "kernels:\n";
  for (const KernelInfo& k : registry.kernels()) {
    out << "  " << k.name << " (" << (k.role == KernelRole::kDrift ? "drift" : "diffusion");
    if (!k.param_names.empty()) {
      out << "; params:";
      for (const auto& p : k.param_names) out << ' ' << p;
    }
    if (!k.alias_of.empty()) {
      out << "; alias of " << k.alias_of << " with";
      for (double p : k.alias_params) out << ' ' << num(p);
    }
    out << (k.factorized ? "; factorized" : "") << ")  " << k.formula << '\n';
  }
  out << "initial laws:\n";
  for (const NamedEntry& e : initial_law_registry()) out << "  " << e.name << "  " << e.description << '\n';
  out << "test functions:\n";
  for (const NamedEntry& e : test_function_registry()) out << "  " << e.name << "  " << e.description << '\n';
  out << "edge models:\n  static (p0)\n  markov (p0, lambda, mu)\n";
  out << "estimators:\n";
  for (const auto& e : estimator_names()) out << "  " << e << '\n';
  return out.str();
}

Registry registry_from_description(const json& listing) {
  require(listing.contains("kernels") && listing.at("kernels").is_array(), Error::Code::kConfig,
          "registry listing has no kernels array");
  Registry r = Registry::builtin();
  for (const json& k : listing.at("kernels")) {
    const std::string name = k.at("name").get<std::string>();
    if (k.contains("base")) {
      r.add_alias(name, k.at("base").get<std::string>(), k.at("alias_params").get<std::vector<double>>());
    } else {
      require(r.contains(name), Error::Code::kConfig, "listing names unknown built-in kernel '" + name + "'");
    }
  }
  return r;
}

}  // namespace wips
