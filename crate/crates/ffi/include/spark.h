#ifndef SPARK_H
#define SPARK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SparkStatus {
  SPARK_STATUS_OK = 0,
  SPARK_STATUS_NULL_POINTER = 1,
  SPARK_STATUS_INVALID_UTF8 = 2,
  SPARK_STATUS_INVALID_CONFIG = 3,
  SPARK_STATUS_INVALID_ARGUMENT = 4,
  SPARK_STATUS_PARSE = 5,
  SPARK_STATUS_RUNTIME = 6,
  SPARK_STATUS_PANIC = 7,
} SparkStatus;

/**
 * Simulation config.
 */
typedef struct SparkConfig SparkConfig;

/**
 * Metrics computed from a trace.
 */
typedef struct SparkReport SparkReport;

/**
 * Result of one run.
 */
typedef struct SparkTrace SparkTrace;

/**
 * Headline numbers of a report. Optional values are NaN when not applicable.
 */
typedef struct SparkSummary {
  double avg_pods;
  uint32_t peak_pods;
  uint32_t peak_desired;
  /**
   * Percent of admitted requests.
   */
  double timeout_rate;
  /**
   * Seconds.
   */
  double scale_lag;
  /**
   * Seconds.
   */
  double time_to_stabilize;
  double ingress_drop_fraction;
  uint64_t admitted;
  uint64_t timed_out;
  uint64_t error_count;
  uint64_t seed;
} SparkSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. Valid until the next
 * failing call on the same thread.
 */
const char *spark_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *spark_version(void);

/**
 * Built-in scenario config, e.g. `("flash-crowd", "predictive")`.
 *
 * # Safety
 * `name` and `variant` must be NUL-terminated strings; `out` must be writable.
 */
enum SparkStatus spark_config_scenario(const char *name,
                                       const char *variant,
                                       struct SparkConfig **out);

/**
 * Parses and validates a TOML config document.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum SparkStatus spark_config_from_toml(const char *text, struct SparkConfig **out);

/**
 * # Safety
 * `config` must be a live handle or NULL.
 */
enum SparkStatus spark_config_set_seed(struct SparkConfig *config, uint64_t seed);

/**
 * Replica count the reactive rule gives for `rps` under this config.
 *
 * # Safety
 * `config` must be a live handle; `out` must be writable.
 */
enum SparkStatus spark_config_reactive_desired(const struct SparkConfig *config,
                                               double rps,
                                               uint32_t *out);

/**
 * # Safety
 * `config` must be a handle from this library or NULL; it is invalid afterwards.
 */
void spark_config_free(struct SparkConfig *config);

/**
 * Runs the simulation.
 *
 * # Safety
 * `config` must be a live handle; `out` must be writable.
 */
enum SparkStatus spark_run(const struct SparkConfig *config, struct SparkTrace **out);

/**
 * Number of ticks in the trace.
 *
 * # Safety
 * `trace` must be a live handle; `out` must be writable.
 */
enum SparkStatus spark_trace_len(const struct SparkTrace *trace, uint64_t *out);

/**
 * Full trace as JSON; free with [`spark_string_free`].
 *
 * # Safety
 * `trace` must be a live handle; `out` must be writable.
 */
enum SparkStatus spark_trace_to_json(const struct SparkTrace *trace, char **out);

/**
 * # Safety
 * `trace` must be a handle from this library or NULL; it is invalid afterwards.
 */
void spark_trace_free(struct SparkTrace *trace);

/**
 * # Safety
 * `trace` must be a live handle; `out` must be writable.
 */
enum SparkStatus spark_report_compute(const struct SparkTrace *trace, struct SparkReport **out);

/**
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum SparkStatus spark_report_summary(const struct SparkReport *report, struct SparkSummary *out);

/**
 * Report as JSON; free with [`spark_string_free`].
 *
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum SparkStatus spark_report_to_json(const struct SparkReport *report, char **out);

/**
 * Comparison of `candidate` against `baseline` as JSON; free with
 * [`spark_string_free`]. Fails when the reports have different seeds.
 *
 * # Safety
 * Both reports must be live handles; `out` must be writable.
 */
enum SparkStatus spark_report_compare_json(const struct SparkReport *baseline,
                                           const struct SparkReport *candidate,
                                           char **out);

/**
 * # Safety
 * `report` must be a handle from this library or NULL; it is invalid afterwards.
 */
void spark_report_free(struct SparkReport *report);

/**
 * Percent change from `baseline` to `candidate`. Fails with
 * `InvalidArgument` when undefined (non-zero against a zero baseline).
 *
 * # Safety
 * `out` must be writable.
 */
enum SparkStatus spark_relative_delta(double baseline, double candidate, double *out);

/**
 * Legitimacy score of a response mix and whether it meets `threshold`.
 *
 * # Safety
 * `score` and `legitimate` must be writable.
 */
enum SparkStatus spark_legitimacy_score(uint64_t http_2xx,
                                        uint64_t errors,
                                        double threshold,
                                        double *score,
                                        bool *legitimate);

/**
 * # Safety
 * `s` must be a string returned by this library or NULL.
 */
void spark_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPARK_H */
