// Command-line front end. Talks to the library only through the C API.
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "wips/wips.h"

namespace {

int exit_code(wips_status s) {
  switch (s) {
    case WIPS_OK:
      return 0;
    case WIPS_ACCEPTANCE_FAILED:
      return 1;
    case WIPS_CONFIG_ERROR:
    case WIPS_INVALID_ARGUMENT:
      return 2;
    default:
      return 3;
  }
}

int report_error(const char* verb, wips_status s) {
  std::cerr << "wips " << verb << ": " << wips_last_error() << '\n';
  return exit_code(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo experiments for interacting diffusions on dynamic random graphs"};
  app.set_version_flag("--version", wips_version());
  app.require_subcommand(1);

  std::string plan_path, out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  bool strict = false, as_json = false;

  CLI::App* run = app.add_subcommand("run", "run every scenario of a plan and write the result bundle");
  run->add_option("--plan", plan_path, "experiment plan (JSON)")->required()->check(CLI::ExistingFile);
  CLI::Option* seed_opt = run->add_option("--seed", seed, "master seed (overrides the plan)");
  run->add_option("--threads", threads, "worker threads (default: WIPS_THREADS or 1)")->check(CLI::Range(1, 1024));
  run->add_flag("--strict", strict, "strict reproducibility");
  CLI::Option* out_opt = run->add_option("--out", out_dir, "output directory (overrides the plan)");

  CLI::App* describe = app.add_subcommand("describe", "list kernels, initial laws, test functions and edge models");
  describe->add_flag("--json", as_json, "machine-readable listing");
  describe->add_option("--plan", plan_path, "include the registry aliases of this plan")->check(CLI::ExistingFile);

  CLI::App* check = app.add_subcommand("check", "re-evaluate acceptance rules on an existing result bundle");
  check->add_option("--out", out_dir, "result directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*run) {
    wips_plan* plan = nullptr;
    wips_status s = wips_plan_load(plan_path.c_str(), &plan);
    if (s != WIPS_OK) return report_error("run", s);
    wips_run_options options;
    wips_run_options_init(&options);
    if (*seed_opt) {
      options.has_seed = 1;
      options.seed = seed;
    }
    if (*out_opt) options.output_dir = out_dir.c_str();
    options.threads = threads;
    options.strict = strict ? 1 : 0;
    wips_result* result = nullptr;
    s = wips_run(plan, &options, &result);
    wips_plan_free(plan);
    if (result == nullptr) return report_error("run", s);
    char* report = nullptr;
    const std::string dir = wips_result_output_dir(result);
    wips_result_free(result);
    const wips_status c = wips_check(dir.c_str(), &report);
    if (report != nullptr) std::cout << report;
    wips_string_free(report);
    std::cout << "results in " << dir << '\n';
    return exit_code(c == WIPS_OK ? s : c);
  }

  if (*describe) {
    wips_plan* plan = nullptr;
    if (!plan_path.empty()) {
      const wips_status s = wips_plan_load(plan_path.c_str(), &plan);
      if (s != WIPS_OK) return report_error("describe", s);
    }
    char* text = nullptr;
    const wips_status s = wips_describe(plan, as_json ? 1 : 0, &text);
    wips_plan_free(plan);
    if (s != WIPS_OK) return report_error("describe", s);
    std::cout << text;
    wips_string_free(text);
    return 0;
  }

  char* report = nullptr;
  const wips_status s = wips_check(out_dir.c_str(), &report);
  if (report == nullptr) return report_error("check", s);
  std::cout << report;
  wips_string_free(report);
  return exit_code(s);
}
