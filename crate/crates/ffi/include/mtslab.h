#ifndef MTSLAB_H
#define MTSLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MtsStatus {
  MTS_STATUS_OK = 0,
  MTS_STATUS_NULL_POINTER = 1,
  MTS_STATUS_INVALID_UTF8 = 2,
  MTS_STATUS_PARSE = 3,
  MTS_STATUS_INVALID_PARAMETER = 4,
  MTS_STATUS_INVALID_METRIC = 5,
  MTS_STATUS_INVALID_STATE = 6,
  MTS_STATUS_INVALID_TRACE = 7,
  MTS_STATUS_NOT_SET_CHASING = 8,
  MTS_STATUS_UNSUPPORTED_METRIC = 9,
  MTS_STATUS_SEQUENCE_TOO_LONG = 10,
  MTS_STATUS_TOO_LARGE = 11,
  MTS_STATUS_UNKNOWN = 12,
  MTS_STATUS_IO = 13,
  MTS_STATUS_NO_PIVOT = 14,
  MTS_STATUS_PANIC = 15,
} MtsStatus;

/**
 * A validated problem instance.
 */
typedef struct MtsInstance MtsInstance;

/**
 * The result of a simulation.
 */
typedef struct MtsReport MtsReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into this library on the same thread.
 */
const char *mts_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *mts_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void mts_string_free(char *s);

/**
 * Checks a metric given as JSON. Returns `InvalidMetric` with the violated
 * axiom as the error message when it is not a valid metric.
 *
 * # Safety
 * `json` must be a valid nul-terminated string.
 */
enum MtsStatus mts_validate_metric(const char *json);

/**
 * Parses and validates an instance.
 *
 * # Safety
 * `json` must be a valid nul-terminated string and `out` a valid pointer.
 */
enum MtsStatus mts_instance_from_json(const char *json, struct MtsInstance **out);

/**
 * # Safety
 * `inst` must come from [`mts_instance_from_json`] and not be freed twice.
 */
void mts_instance_free(struct MtsInstance *inst);

/**
 * Number of points of the instance's metric, or 0 for a null handle.
 *
 * # Safety
 * `inst` must be null or a live handle.
 */
size_t mts_instance_points(const struct MtsInstance *inst);

/**
 * Exact offline optimum from the instance's start state, written as a
 * string: `p/q`, an integer, or `inf`.
 *
 * # Safety
 * `inst` must be a live handle and `out` a valid pointer.
 */
enum MtsStatus mts_instance_optimal(const struct MtsInstance *inst, char **out);

/**
 * Serves the instance's sequence with a named algorithm.
 *
 * # Safety
 * `inst` must be a live handle, `algorithm` a valid string, `out` a valid pointer.
 */
enum MtsStatus mts_run_fixed(const struct MtsInstance *inst,
                             const char *algorithm,
                             uint64_t seed,
                             uint64_t cap,
                             struct MtsReport **out);

/**
 * Runs an experiment described as JSON, for example
 * `{"adversary":"paired-uniform","algorithm":"lazy","n":8,"C":"8","phases":5}`.
 *
 * # Safety
 * `spec_json` must be a valid string and `out` a valid pointer.
 */
enum MtsStatus mts_simulate(const char *spec_json, struct MtsReport **out);

/**
 * The full report as JSON.
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum MtsStatus mts_report_json(const struct MtsReport *report, char **out);

/**
 * 1 if every check row passed, 0 if some failed, -1 for a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
int32_t mts_report_passed(const struct MtsReport *report);

/**
 * Completed phases summed over trials, or 0 for a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
size_t mts_report_completed_phases(const struct MtsReport *report);

/**
 * # Safety
 * `report` must come from this library and not be freed twice.
 */
void mts_report_free(struct MtsReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MTSLAB_H */
