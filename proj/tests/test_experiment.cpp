#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "wips/error.hpp"
#include "wips/experiment.hpp"

using namespace wips;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string plan_dir() {
  const char* d = std::getenv("WIPS_PLAN_DIR");
  return d ? d : "plans";
}

json small_plan() {
  return json::parse(R"({
    "name": "unit_plan", "seed": 3,
    "scenarios": [{
      "config": {"name": "s", "n": 16, "drift": {"name": "sine_coupling", "params": [1.0]},
                 "edges": {"mode": "static", "p0": 0.5}, "steps": 10, "replications": 4},
      "sweep": {"n": [16, 32, 64, 128]},
      "estimators": ["coupling_error", "lln_rate"],
      "acceptance": [{"metric": "lln_rate.slope", "max": 0.0}]
    }]
  })");
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    out[fs::relative(e.path(), root).string()] = s.str();
  }
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("wips_unit_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("plan validation") {
  CHECK_NOTHROW(plan_from_json(small_plan()));
  auto rejects = [](auto mutate) {
    json p = small_plan();
    mutate(p);
    CHECK_THROWS_AS(plan_from_json(p), Error);
  };
  rejects([](json& p) { p["scenarios"][0]["estimators"] = json::array(); });
  rejects([](json& p) { p["scenarios"][0]["estimators"] = {"nope"}; });
  rejects([](json& p) { p["scenarios"] = json::array(); });
  rejects([](json& p) { p["scenarios"][0]["sweep"]["n"] = json::array(); });
  rejects([](json& p) { p["scenarios"][0]["sweep"]["p"] = {1.5}; });
  rejects([](json& p) { p["scenarios"][0]["sweep"]["edge_mode"] = {"sometimes"}; });
  rejects([](json& p) { p["bogus"] = 1; });
  rejects([](json& p) { p["scenarios"][0]["acceptance"] = {{{"metric", "x"}}}; });
  rejects([](json& p) { p["scenarios"][0]["config"]["drift"] = {{"name", "undefined_alias"}}; });
  rejects([](json& p) { p["scenarios"].push_back(p["scenarios"][0]); });
  rejects([](json& p) { p["scenarios"][0]["settings"] = {{"test_function", {{"name", "nope"}}}}; });
  const ExperimentPlan plan = plan_from_json(small_plan());
  CHECK(to_json(plan_from_json(to_json(plan))) == to_json(plan));
}

TEST_CASE("empty estimator selection writes nothing") {
  const fs::path out = scratch("empty");
  json p = small_plan();
  p["output"] = out.string();
  p["scenarios"][0]["estimators"] = json::array();
  CHECK_THROWS_AS(plan_from_json(p), Error);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("rate sweep produces a four-row table") {
  const fs::path out = scratch("rate");
  const RunResult r = run_experiment(plan_from_json(small_plan()), {.output = out.string()});
  CHECK(r.all_ran);
  const json& s = r.summary["scenarios"][0];
  CHECK(s["status"] == "ok");
  CHECK(s["metrics"]["lln_rate.rows"] == 4.0);
  CHECK(s["metrics"].contains("lln_rate.slope"));
  CHECK(s["points"].size() == 4);
  std::ifstream table(out / "s" / "lln_rate.tsv");
  std::string line;
  int lines = 0;
  while (std::getline(table, line)) ++lines;
  CHECK(lines == 5);
  CHECK(fs::exists(out / "manifest.json"));
  const CheckResult c = check_outputs(out.string());
  CHECK(c.passed == r.passed);
  CHECK(c.report.find("lln_rate.slope") != std::string::npos);
}

TEST_CASE("failing scenarios are recorded and the rest still run") {
  json p = small_plan();
  json broken = p["scenarios"][0];
  broken["config"]["name"] = "broken";
  broken["estimators"] = {"clt_variance"};
  broken["config"]["types"] = {{"counts", {8, 8}}};
  p["scenarios"].insert(p["scenarios"].begin(), broken);
  const fs::path out = scratch("broken");
  const RunResult r = run_experiment(plan_from_json(p), {.output = out.string()});
  CHECK_FALSE(r.all_ran);
  CHECK_FALSE(r.passed);
  CHECK(r.summary["scenarios"][0]["status"] == "error");
  CHECK(r.summary["scenarios"][1]["status"] == "ok");
  CHECK_FALSE(check_outputs(out.string()).passed);
}

TEST_CASE("sweep axes") {
  json p = small_plan();
  p["scenarios"][0]["config"]["edges"] = {{"mode", "markov"}, {"p0", 0.5}, {"lambda", 1.0}, {"mu", 1.0}};
  p["scenarios"][0]["sweep"] = {{"n", {16, 64}}, {"p_power", -0.25}, {"edge_mode", {"static", "markov"}}};
  p["scenarios"][0]["estimators"] = {"coupling_error"};
  const RunResult r = run_experiment(plan_from_json(p), {.output = scratch("axes").string()});
  const json points = r.summary["scenarios"][0]["points"];
  REQUIRE(points.size() == 4);
  CHECK(points[0] == "n=16,p=0.5,static");
  CHECK(points[3] == "n=64,p=0.3535533905932738,markov");
}

TEST_CASE("golden plan is byte-identical across runs and thread counts") {
  ExperimentPlan plan = load_plan(plan_dir() + "/golden_demo.json");
  const fs::path a = scratch("golden_a"), b = scratch("golden_b"), c = scratch("golden_c");
  run_experiment(plan, {.output = a.string(), .threads = 1, .strict = true});
  run_experiment(plan, {.output = b.string(), .threads = 1, .strict = true});
  run_experiment(plan, {.output = c.string(), .threads = 3, .strict = true});
  const auto ta = read_tree(a);
  CHECK(ta.size() > 5);
  CHECK(ta == read_tree(b));
  CHECK(ta == read_tree(c));
  const RunResult other = run_experiment(plan, {.seed = 99, .output = scratch("golden_d").string()});
  CHECK(other.summary.dump() != json::parse(ta.at("summary.json")).dump());
}

TEST_CASE("registry listing") {
  const json listing = describe_registry_json();
  bool sine = false;
  for (const json& k : listing["kernels"]) sine = sine || k["name"] == "sine_coupling";
  CHECK(sine);
  CHECK(describe_registry_text().find("sine_coupling") != std::string::npos);
  CHECK(listing["estimators"].size() == estimator_names().size());

  const ExperimentPlan plan = load_plan(plan_dir() + "/golden_demo.json");
  const Registry r = registry_for(plan);
  const json with_alias = describe_registry_json(r);
  CHECK(with_alias.dump().find("sine_half") != std::string::npos);
  const Registry back = registry_from_description(json::parse(with_alias.dump()));
  CHECK(describe_registry_json(back) == with_alias);

  // A plan can declare its aliases from a listing.
  json p = small_plan();
  json kernels = json::array();
  for (const json& k : with_alias["kernels"])
    if (k.contains("base")) kernels.push_back({{"name", k["name"]}, {"base", k["base"]}, {"params", k["alias_params"]}});
  p["registry"] = {{"kernels", kernels}};
  p["scenarios"][0]["config"]["drift"] = {{"name", "sine_half"}};
  CHECK_NOTHROW(plan_from_json(p));
}

TEST_CASE("thread count from the environment") {
  setenv("WIPS_THREADS", "3", 1);
  CHECK(default_thread_count() == 3);
  setenv("WIPS_THREADS", "zero", 1);
  CHECK(default_thread_count() == 1);
  unsetenv("WIPS_THREADS");
  CHECK(default_thread_count() == 1);
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}
