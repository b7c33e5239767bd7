#include <cmath>
#include <cstdlib>
#include <string>

#include "doctest.h"
#include "wips/wips.h"

namespace {
std::string plan_path() {
  const char* d = std::getenv("WIPS_PLAN_DIR");
  return std::string(d ? d : "plans") + "/golden_demo.json";
}
}  // namespace

TEST_CASE("version and closed form") {
  CHECK(std::string(wips_version()).size() > 0);
  double v = 0.0;
  CHECK(wips_marginal_edge_probability(1.0, 0.9, 1.0, 3.0, &v) == WIPS_OK);
  CHECK(v == doctest::Approx(0.25 + 0.65 * std::exp(-4.0)));
  CHECK(wips_marginal_edge_probability(1.0, 0.9, 1.0, 3.0, nullptr) == WIPS_INVALID_ARGUMENT);
}

TEST_CASE("plan errors map to status codes") {
  wips_plan* plan = nullptr;
  CHECK(wips_plan_parse("{not json", &plan) == WIPS_CONFIG_ERROR);
  CHECK(plan == nullptr);
  CHECK(std::string(wips_last_error()).size() > 0);
  CHECK(wips_plan_load("/nonexistent/plan.json", &plan) == WIPS_CONFIG_ERROR);
  CHECK(wips_plan_parse(R"({"scenarios": [{"config": {"n": 4, "drift": {"name": "constant", "params": [0]},
        "edges": {"p0": 1}}, "estimators": []}]})", &plan) == WIPS_CONFIG_ERROR);
  CHECK(std::string(wips_last_error()).find("empty estimator") != std::string::npos);
  CHECK(wips_plan_parse(nullptr, &plan) == WIPS_INVALID_ARGUMENT);
}

TEST_CASE("run, check and describe through the C interface") {
  wips_plan* plan = nullptr;
  REQUIRE(wips_plan_load(plan_path().c_str(), &plan) == WIPS_OK);
  wips_run_options options;
  wips_run_options_init(&options);
  const std::string out = "wips_c_api_out";
  options.output_dir = out.c_str();
  options.threads = 2;
  wips_result* result = nullptr;
  const wips_status s = wips_run(plan, &options, &result);
  REQUIRE(result != nullptr);
  CHECK((s == WIPS_OK) == (wips_result_passed(result) == 1));
  CHECK(wips_result_scenario_count(result) == 3);
  CHECK(std::string(wips_result_output_dir(result)) == out);
  CHECK(std::string(wips_result_summary_json(result)).find("\"scenarios\"") != std::string::npos);
  wips_result_free(result);

  char* report = nullptr;
  CHECK(wips_check(out.c_str(), &report) == s);
  REQUIRE(report != nullptr);
  CHECK(std::string(report).find("lln_small") != std::string::npos);
  wips_string_free(report);
  CHECK(wips_check("/nonexistent/dir", &report) == WIPS_CONFIG_ERROR);

  char* text = nullptr;
  REQUIRE(wips_describe(plan, 1, &text) == WIPS_OK);
  CHECK(std::string(text).find("sine_half") != std::string::npos);
  wips_string_free(text);
  REQUIRE(wips_describe(nullptr, 0, &text) == WIPS_OK);
  CHECK(std::string(text).find("sine_coupling") != std::string::npos);
  wips_string_free(text);
  wips_plan_free(plan);
}
