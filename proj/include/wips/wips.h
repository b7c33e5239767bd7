#ifndef WIPS_WIPS_H
#define WIPS_WIPS_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define WIPS_API __attribute__((visibility("default")))
#else
#define WIPS_API
#endif

typedef enum wips_status {
  WIPS_OK = 0,
  WIPS_ACCEPTANCE_FAILED = 1,
  WIPS_CONFIG_ERROR = 2,
  WIPS_INVALID_ARGUMENT = 3,
  WIPS_NUMERICAL = 4,
  WIPS_IO = 5,
  WIPS_INTERNAL = 6
} wips_status;

typedef struct wips_plan wips_plan;
typedef struct wips_result wips_result;

typedef struct wips_run_options {
  int has_seed;
  uint64_t seed;
  const char* output_dir; /* NULL: the plan's output directory */
  int threads;            /* <= 0: WIPS_THREADS or 1 */
  int strict;
} wips_run_options;

WIPS_API const char* wips_version(void);
/* Message of the last failing call on this thread; never NULL. */
WIPS_API const char* wips_last_error(void);

WIPS_API wips_status wips_plan_load(const char* path, wips_plan** out);
WIPS_API wips_status wips_plan_parse(const char* json_text, wips_plan** out);
WIPS_API void wips_plan_free(wips_plan* plan);

WIPS_API void wips_run_options_init(wips_run_options* options);
/* Runs every scenario. Returns WIPS_OK or WIPS_ACCEPTANCE_FAILED with *out
   set; other codes leave *out NULL. */
WIPS_API wips_status wips_run(const wips_plan* plan, const wips_run_options* options, wips_result** out);
WIPS_API int wips_result_passed(const wips_result* result);
WIPS_API const char* wips_result_summary_json(const wips_result* result);
WIPS_API const char* wips_result_output_dir(const wips_result* result);
WIPS_API size_t wips_result_scenario_count(const wips_result* result);
WIPS_API void wips_result_free(wips_result* result);

/* Re-evaluates the acceptance rules of a finished run. *report is owned by
   the caller (wips_string_free). */
WIPS_API wips_status wips_check(const char* output_dir, char** report);
/* Registry listing as text (json = 0) or JSON, including the aliases of
   `plan` when it is not NULL. */
WIPS_API wips_status wips_describe(const wips_plan* plan, int json, char** out);
WIPS_API void wips_string_free(char* text);

/* P(edge on at time t) for a two-state chain started on with probability p0. */
WIPS_API wips_status wips_marginal_edge_probability(double t, double p0, double lambda, double mu, double* out);

#ifdef __cplusplus
}
#endif

#endif
