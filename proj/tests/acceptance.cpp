// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance --plan-dir DIR [--criterion K]... [--work DIR] [--threads T]
//
// Criteria 1, 4 and 13 call the library directly. The others run the matching
// scenario of DIR/acceptance.json and compare its metrics with the thresholds
// below. Criterion 14 runs DIR/golden_demo.json several times and compares bytes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wips/error.hpp"
#include "wips/estimators.hpp"
#include "wips/experiment.hpp"
#include "wips/oracles.hpp"
#include "wips/particles.hpp"

namespace fs = std::filesystem;
using namespace wips;

namespace {

// Thresholds, pinned.
constexpr double kOracleTol = 1e-12;          // 1: closed form vs enumeration, and bound slack
constexpr double kOracleSeconds = 1.0;        // 1: runtime
constexpr double kRateSlopeMax = -0.4;        // 2: regression slope
constexpr double kRateSpreadMax = 2.0;        // 2: max/min of sqrt(Np) * error
constexpr double kCouplingNullTol = 1e-12;    // 4: sup |Z - X|
constexpr double kCouplingNullSeconds = 1.0;  // 4: runtime
constexpr double kChaosSeBand = 3.0;          // 5: |cov| / se at the largest N
constexpr double kMarkovZ = 3.0;              // 6: binomial standard errors
constexpr double kMarkovExact = 0.26190;      // 6: closed form at t = 1
constexpr double kMarkovExactTol = 1e-5;      // 6: quoted value is truncated to 5 places
constexpr double kTraceZ = 3.0;               // 8: standard errors
constexpr double kCltRelDiff = 0.10;          // 9: relative difference of variances
constexpr double kNystromRelErr = 0.15;       // 10: Nystrom vs empirical variance
constexpr double kIncompleteZ = 3.0;          // 12: standard errors
constexpr double kMwiMaxT = 0.5;              // 13: |t| range
constexpr int kMwiDegree = 6;                 // 13: truncation degree
constexpr double kMwiRounding = 1e-14;        // 13: floating-point slack on the remainder

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

class Suite {
 public:
  Suite(fs::path plan_dir, fs::path work, int threads)
      : plan_dir_(std::move(plan_dir)), work_(std::move(work)), threads_(threads) {}

  // Runs one scenario of acceptance.json once and returns its summary entry.
  const nlohmann::json& scenario(const std::string& name) {
    auto it = runs_.find(name);
    if (it != runs_.end()) return it->second;
    ExperimentPlan plan = load_plan((plan_dir_ / "acceptance.json").string());
    std::erase_if(plan.scenarios, [&](const ScenarioPlan& s) { return s.config.name != name; });
    require(plan.scenarios.size() == 1, Error::Code::kConfig, "acceptance.json has no scenario " + name);
    RunOptions opt;
    opt.output = (work_ / name).string();
    opt.threads = threads_;
    opt.strict = true;
    const RunResult r = run_experiment(plan, opt);
    const nlohmann::json& entry = r.summary.at("scenarios").at(0);
    require(entry.at("status") == "ok", Error::Code::kInvalidArgument,
            name + " failed: " + entry.value("error", std::string("unknown error")));
    return runs_.emplace(name, entry).first->second;
  }

  double metric(const std::string& scenario_name, const std::string& key) {
    const nlohmann::json& m = scenario(scenario_name).at("metrics");
    require(m.contains(key), Error::Code::kInvalidArgument, scenario_name + " has no metric " + key);
    return m.at(key).get<double>();
  }

  const fs::path& plan_dir() const { return plan_dir_; }
  const fs::path& work() const { return work_; }
  int threads() const { return threads_; }

 private:
  fs::path plan_dir_;
  fs::path work_;
  int threads_;
  std::map<std::string, nlohmann::json> runs_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome oracle_exactness(Suite&) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_diff = 0.0, worst_margin = HUGE_VAL;
  for (std::size_t n = 0; n <= 20; ++n)
    for (int k = 1; k <= 10; ++k) {
      const BinomialSpec s{n, k / 10.0};
      const double nd = static_cast<double>(n);
      const double exact = binomial_inverse_moment_enumerated(s, 1, 1);
      worst_diff = std::max(worst_diff, std::abs(binomial_inverse_moment(s, 1, 1).value - exact));
      // E 1/(X+1) <= 1/((n+1)p)
      worst_margin = std::min(worst_margin, 1.0 / ((nd + 1.0) * s.p) - exact);
      for (int m = 2; m <= 6; ++m) {
        // E 1/(X+m) <= (1-q^{n+1})/((n+m)p) and E 1/(X+1)^m <= m^m/((n+1)^m p^m)
        worst_margin = std::min(worst_margin, binomial_inverse_moment(s, m, 1).value -
                                                  binomial_inverse_moment_enumerated(s, m, 1));
        worst_margin = std::min(worst_margin, binomial_inverse_moment(s, 1, m).value -
                                                  binomial_inverse_moment_enumerated(s, 1, m));
      }
    }
  const double secs = seconds_since(t0);
  return {worst_diff <= kOracleTol && worst_margin >= -kOracleTol && secs < kOracleSeconds,
          "max_diff=" + fmt(worst_diff) + " min_bound_margin=" + fmt(worst_margin) + " seconds=" + fmt(secs)};
}

Outcome lln_rate(Suite& s) {
  const std::string sc = "c02_lln_rate";
  const double slope = s.metric(sc, "lln_rate.slope");
  const double spread = s.metric(sc, "lln_rate.scaled_spread");
  std::string rows;
  for (int n : {128, 256, 512, 1024})
    rows += " e" + std::to_string(n) + "=" +
            fmt(s.metric(sc, "coupling_error[n=" + std::to_string(n) + ",p=0.5,static].mean_sup_sq"));
  return {slope <= kRateSlopeMax && spread < kRateSpreadMax, "slope=" + fmt(slope) + " spread=" + fmt(spread) + rows};
}

Outcome decaying_p(Suite& s) {
  const std::string sc = "c03_decaying_p";
  const nlohmann::json& entry = s.scenario(sc);
  std::vector<double> e;
  std::string rows;
  for (const auto& label : entry.at("points")) {
    e.push_back(s.metric(sc, "coupling_error[" + label.get<std::string>() + "].mean_sup_sq"));
    rows += " [" + label.get<std::string>() + "]=" + fmt(e.back());
  }
  bool dec = e.size() == 3;
  for (std::size_t k = 1; k < e.size(); ++k) dec = dec && e[k] < e[k - 1];
  return {dec, "strictly_decreasing=" + std::string(dec ? "yes" : "no") + rows};
}

Outcome coupling_null(Suite&) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (double p : {0.0, 0.3, 0.5, 1.0})
    for (std::size_t n : {2, 64, 256}) {
      ScenarioConfig c;
      c.name = "coupling_null";
      c.n = n;
      c.drift = {{{"x_only_tanh", {1.0}}}};
      c.diffusion = {{{"identity_diffusion", {}}}};
      c.initial = {InitialLawSpec{}};
      c.p0 = {{p}};
      c.steps = 200;
      const PathEnsemble paths = simulate_coupled(build_model(c), StreamKey(4).derive(n));
      worst = std::max(worst, coupling_error(paths).max_abs);
    }
  const double secs = seconds_since(t0);
  return {worst <= kCouplingNullTol && secs < kCouplingNullSeconds,
          "max_sup_abs=" + fmt(worst) + " seconds=" + fmt(secs)};
}

Outcome chaos(Suite& s) {
  const std::string sc = "c05_chaos";
  const double c128 = s.metric(sc, "poc_covariance[n=128,p=0.5,static].covariance");
  const double c1024 = s.metric(sc, "poc_covariance[n=1024,p=0.5,static].covariance");
  const double se1024 = s.metric(sc, "poc_covariance[n=1024,p=0.5,static].se");
  const bool ok = std::abs(c1024) < kChaosSeBand * se1024 && std::abs(c1024) < std::abs(c128);
  return {ok, "cov128=" + fmt(c128) + " cov1024=" + fmt(c1024) + " se1024=" + fmt(se1024) +
                  " abs_over_se=" + fmt(std::abs(c1024) / se1024)};
}

Outcome markov_edge(Suite& s) {
  const std::string sc = "c06_markov_edge", pt = "markov_marginals[n=2,p=0.9,markov].";
  const double freq = s.metric(sc, pt + "frequency");
  const double exact = s.metric(sc, pt + "exact");
  const double z = s.metric(sc, pt + "z");
  const bool ok = z <= kMarkovZ && std::abs(exact - kMarkovExact) <= kMarkovExactTol;
  return {ok, "frequency=" + fmt(freq) + " exact=" + fmt(exact) + " z=" + fmt(z)};
}

Outcome degree_tail(Suite& s) {
  const double margin = s.metric("c07_degree_tail", "lemma_oracles[n=500,p=0.5,static].degree_tail_margin");
  return {margin >= 0.0, "bound+3se-freq=" + fmt(margin)};
}

Outcome traces(Suite& s) {
  const std::string sc = "c08_traces";
  const double z1 = s.metric(sc, "trace_identities.trace_aa_z");
  const double z2 = s.metric(sc, "trace_identities.trace_a2_z");
  return {z1 <= kTraceZ && z2 <= kTraceZ,
          "trace_aa=" + fmt(s.metric(sc, "trace_identities.trace_aa")) +
              " sum_lambda=" + fmt(s.metric(sc, "trace_identities.integrated_lambda")) + " z_aa=" + fmt(z1) +
              " trace_a2=" + fmt(s.metric(sc, "trace_identities.trace_a2")) + " z_a2=" + fmt(z2)};
}

Outcome clt_invariance(Suite& s) {
  const std::string sc = "c09_c10_clt";
  const double v6 = s.metric(sc, "clt_variance[n=512,p=0.6,static].variance");
  const double v1 = s.metric(sc, "clt_variance[n=512,p=1,static].variance");
  const double rel = s.metric(sc, "clt_variance.rel_diff");
  const bool overlap = s.metric(sc, "clt_variance.ci_overlap") == 1.0;
  return {overlap && rel <= kCltRelDiff, "var_p0.6=" + fmt(v6) + " var_p1=" + fmt(v1) + " rel_diff=" + fmt(rel) +
                                             " ci_overlap=" + (overlap ? "yes" : "no")};
}

Outcome clt_formula(Suite& s) {
  const std::string sc = "c09_c10_clt";
  const double ny = s.metric(sc, "nystrom.value");
  const double v1 = s.metric(sc, "clt_variance[n=512,p=1,static].variance");
  const double rel = std::abs(ny - v1) / v1;
  return {rel <= kNystromRelErr, "nystrom=" + fmt(ny) + " var_p1=" + fmt(v1) + " rel_err=" + fmt(rel)};
}

Outcome girsanov(Suite& s) {
  const std::string sc = "c11_girsanov";
  std::vector<double> d1, d2;
  std::string rows;
  for (int n : {64, 128, 256}) {
    const std::string pt = "girsanov[n=" + std::to_string(n) + ",p=0.5,static].";
    d1.push_back(s.metric(sc, pt + "mean_d1_sq"));
    d2.push_back(s.metric(sc, pt + "mean_d2_abs"));
    rows += " n" + std::to_string(n) + "=(" + fmt(d1.back()) + "," + fmt(d2.back()) + ")";
  }
  const bool ok = d1[1] < d1[0] && d1[2] < d1[1] && d2[1] < d2[0] && d2[2] < d2[1];
  return {ok, "(d1,d2):" + rows};
}

Outcome incomplete(Suite& s) {
  const std::string sc = "c12_incomplete_u", pt = "incomplete_u[n=256,p=0.5,static].";
  const double z = s.metric(sc, pt + "z");
  return {z <= kIncompleteZ, "variance=" + fmt(s.metric(sc, pt + "variance")) +
                                 " formula=" + fmt(s.metric(sc, pt + "formula")) + " z=" + fmt(z)};
}

Outcome mwi(Suite&) {
  double worst = -HUGE_VAL;
  std::size_t cases = 0;
  PhiloxEngine rng(StreamKey(13), Domain::kInitial);
  for (int a = 0; a < 200; ++a) {
    const double i1 = 8.0 * (rng.uniform() - 0.5);
    const double h = 3.0 * rng.uniform();
    for (int k = -10; k <= 10; ++k) {
      const double t = kMwiMaxT * k / 10.0;
      const double exact = std::exp(t * i1 - t * t * h / 2.0);
      const double err = std::abs(mwi_generating_sum(i1, h, t, kMwiDegree) - exact);
      worst = std::max(worst, err - mwi_truncation_bound(i1, h, t, kMwiDegree) - kMwiRounding * exact);
      ++cases;
    }
  }
  return {worst <= 0.0, "cases=" + std::to_string(cases) + " max(err-remainder)=" + fmt(worst)};
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), root).string()] = ss.str();
  }
  return files;
}

Outcome determinism(Suite& s) {
  const ExperimentPlan plan = load_plan((s.plan_dir() / "golden_demo.json").string());
  std::vector<std::map<std::string, std::string>> trees;
  int k = 0;
  for (int threads : {1, 1, 4}) {
    RunOptions opt;
    opt.output = (s.work() / ("golden_" + std::to_string(k++) + "_t" + std::to_string(threads))).string();
    fs::remove_all(*opt.output);
    opt.threads = threads;
    opt.strict = true;
    run_experiment(plan, opt);
    trees.push_back(read_tree(*opt.output));
  }
  const bool ok = !trees[0].empty() && trees[0] == trees[1] && trees[0] == trees[2];
  return {ok, "files=" + std::to_string(trees[0].size()) + " runs=3 threads={1,1,4} identical=" + (ok ? "yes" : "no")};
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome(Suite&)> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "oracle exactness", oracle_exactness},
      {2, "LLN rate", lln_rate},
      {3, "decaying p", decaying_p},
      {4, "coupling null", coupling_null},
      {5, "propagation of chaos", chaos},
      {6, "Markov edge marginal", markov_edge},
      {7, "degree tail", degree_tail},
      {8, "trace identities", traces},
      {9, "CLT variance p-invariance", clt_invariance},
      {10, "CLT covariance formula", clt_formula},
      {11, "Girsanov reductions", girsanov},
      {12, "incomplete U-statistic", incomplete},
      {13, "MWI generating identity", mwi},
      {14, "determinism", determinism},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria 1-14"};
  std::string plan_dir, work = (fs::temp_directory_path() / "wips_acceptance").string();
  std::vector<int> selected;
  int threads = default_thread_count();
  app.add_option("--plan-dir", plan_dir, "directory holding acceptance.json and golden_demo.json")->required();
  app.add_option("--criterion", selected, "criterion number (repeatable); default all")->check(CLI::Range(1, 14));
  app.add_option("--work", work, "scratch directory for result bundles");
  app.add_option("--threads", threads, "worker threads")->check(CLI::Range(1, 1024));
  CLI11_PARSE(app, argc, argv);

  const std::set<int> want(selected.begin(), selected.end());
  Suite suite(plan_dir, work, threads);
  int failed = 0;
  for (const Criterion& c : criteria()) {
    if (!want.empty() && !want.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(suite);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("criterion %2d [%s] %s %s (%.1fs)\n", c.id, c.title, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
