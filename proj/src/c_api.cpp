#include "wips/wips.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "wips/error.hpp"
#include "wips/experiment.hpp"
#include "wips/graph.hpp"

struct wips_plan {
  wips::ExperimentPlan plan;
};

struct wips_result {
  wips::RunResult result;
  std::string summary;
};

namespace {

thread_local std::string last_error;

wips_status status_of(wips::Error::Code code) {
  switch (code) {
    case wips::Error::Code::kConfig:
      return WIPS_CONFIG_ERROR;
    case wips::Error::Code::kInvalidArgument:
    case wips::Error::Code::kModeMismatch:
      return WIPS_INVALID_ARGUMENT;
    case wips::Error::Code::kNumerical:
      return WIPS_NUMERICAL;
    case wips::Error::Code::kIo:
      return WIPS_IO;
  }
  return WIPS_INTERNAL;
}

template <class F>
wips_status guarded(F&& f) {
  try {
    last_error.clear();
    return f();
  } catch (const wips::Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return WIPS_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return WIPS_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return WIPS_INTERNAL;
  }
}

char* duplicate(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

wips_status missing(const char* what) {
  last_error = std::string(what) + " must not be NULL";
  return WIPS_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* wips_version(void) { return WIPS_VERSION_STRING; }

const char* wips_last_error(void) { return last_error.c_str(); }

wips_status wips_plan_load(const char* path, wips_plan** out) {
  if (path == nullptr || out == nullptr) return missing("path and out");
  *out = nullptr;
  return guarded([&] {
    *out = new wips_plan{wips::load_plan(path)};
    return WIPS_OK;
  });
}

wips_status wips_plan_parse(const char* json_text, wips_plan** out) {
  if (json_text == nullptr || out == nullptr) return missing("json_text and out");
  *out = nullptr;
  return guarded([&] {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
      wips::fail(wips::Error::Code::kConfig, std::string("plan: ") + e.what());
    }
    *out = new wips_plan{wips::plan_from_json(doc)};
    return WIPS_OK;
  });
}

void wips_plan_free(wips_plan* plan) { delete plan; }

void wips_run_options_init(wips_run_options* options) {
  if (options == nullptr) return;
  options->has_seed = 0;
  options->seed = 0;
  options->output_dir = nullptr;
  options->threads = 0;
  options->strict = 0;
}

wips_status wips_run(const wips_plan* plan, const wips_run_options* options, wips_result** out) {
  if (plan == nullptr || out == nullptr) return missing("plan and out");
  *out = nullptr;
  return guarded([&] {
    wips::RunOptions ro;
    ro.threads = wips::default_thread_count();
    if (options != nullptr) {
      if (options->has_seed) ro.seed = options->seed;
      if (options->output_dir != nullptr) ro.output = std::string(options->output_dir);
      if (options->threads > 0) ro.threads = options->threads;
      ro.strict = options->strict != 0;
    }
    auto* r = new wips_result{wips::run_experiment(plan->plan, ro), {}};
    r->summary = r->result.summary.dump(2);
    *out = r;
    return r->result.passed ? WIPS_OK : WIPS_ACCEPTANCE_FAILED;
  });
}

int wips_result_passed(const wips_result* result) { return result != nullptr && result->result.passed ? 1 : 0; }

const char* wips_result_summary_json(const wips_result* result) {
  return result == nullptr ? "" : result->summary.c_str();
}

const char* wips_result_output_dir(const wips_result* result) {
  return result == nullptr ? "" : result->result.output_dir.c_str();
}

size_t wips_result_scenario_count(const wips_result* result) {
  return result == nullptr ? 0 : result->result.summary.at("scenarios").size();
}

void wips_result_free(wips_result* result) { delete result; }

wips_status wips_check(const char* output_dir, char** report) {
  if (output_dir == nullptr || report == nullptr) return missing("output_dir and report");
  *report = nullptr;
  return guarded([&] {
    const wips::CheckResult c = wips::check_outputs(output_dir);
    *report = duplicate(c.report);
    return c.passed ? WIPS_OK : WIPS_ACCEPTANCE_FAILED;
  });
}

wips_status wips_describe(const wips_plan* plan, int json, char** out) {
  if (out == nullptr) return missing("out");
  *out = nullptr;
  return guarded([&] {
    const wips::Registry registry = plan ? wips::registry_for(plan->plan) : wips::Registry::builtin();
    *out = duplicate(json ? wips::describe_registry_json(registry).dump(2) + "\n"
                          : wips::describe_registry_text(registry));
    return WIPS_OK;
  });
}

void wips_string_free(char* text) { std::free(text); }

wips_status wips_marginal_edge_probability(double t, double p0, double lambda, double mu, double* out) {
  if (out == nullptr) return missing("out");
  return guarded([&] {
    *out = wips::marginal_edge_probability(t, p0, lambda, mu);
    return WIPS_OK;
  });
}

}  // extern "C"
