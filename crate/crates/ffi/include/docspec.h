#ifndef DOCSPEC_H
#define DOCSPEC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum DocspecStatus {
  DOCSPEC_STATUS_OK = 0,
  // A required pointer argument was null.
  DOCSPEC_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  DOCSPEC_STATUS_INVALID_UTF8 = 2,
  // The input could not be parsed. The last error holds the report.
  DOCSPEC_STATUS_PARSE = 3,
  // The input parsed but failed validation. The last error holds the report.
  DOCSPEC_STATUS_INVALID = 4,
  // Evaluation failed (unbound name, kind mismatch).
  DOCSPEC_STATUS_EVAL = 5,
  // A constraint was violated at some sample.
  DOCSPEC_STATUS_VIOLATED = 6,
  // The requested unit does not exist.
  DOCSPEC_STATUS_UNKNOWN_UNIT = 7,
  // Widget compilation failed.
  DOCSPEC_STATUS_COMPILE = 8,
  // An argument was out of range.
  DOCSPEC_STATUS_BAD_ARGUMENT = 9,
  // The library panicked; the handle arguments should be considered poisoned.
  DOCSPEC_STATUS_PANIC = 10,
} DocspecStatus;

// Kind of an evaluated expression result.
typedef enum DocspecKind {
  DOCSPEC_KIND_NUMBER = 0,
  DOCSPEC_KIND_BOOLEAN = 1,
} DocspecKind;

// A parsed expression.
typedef struct DocspecExpr DocspecExpr;

// A parsed and validated DocSpec.
typedef struct DocspecSpec DocspecSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *docspec_version(void);

// Message for the last failed call on this thread. Empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *docspec_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and must not be used afterwards.
void docspec_string_free(char *s);

// Parses and validates a DocSpec JSON document.
//
// Returns `Parse` for malformed or structurally wrong input and `Invalid`
// for semantic violations; in both cases the last error is the JSON report.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum DocspecStatus docspec_spec_parse(const char *json, struct DocspecSpec **out);

// Validates a DocSpec JSON document and writes the report (a JSON array,
// empty when valid) to `report_out`.
//
// # Safety
// `json` must be a NUL-terminated string; `report_out` must be writable.
enum DocspecStatus docspec_validate(const char *json, char **report_out);

// Releases a spec handle. Null is ignored.
//
// # Safety
// `spec` must come from [`docspec_spec_parse`] and must not be used afterwards.
void docspec_spec_free(struct DocspecSpec *spec);

// Number of knowledge units, or 0 for a null handle.
//
// # Safety
// `spec` must be null or a live handle.
size_t docspec_spec_unit_count(const struct DocspecSpec *spec);

// Canonical JSON serialization of the spec.
//
// # Safety
// `spec` must be a live handle; `out` must be writable.
enum DocspecStatus docspec_spec_to_json(const struct DocspecSpec *spec, char **out);

// Sweeps every unit's constraint and writes `[{"unit", "report"}, ...]` to
// `out`. Returns `Violated` when any unit has a violating sample; the
// reports are written either way.
//
// # Safety
// `spec` must be a live handle; `out` must be writable.
enum DocspecStatus docspec_spec_verify(const struct DocspecSpec *spec,
                                       size_t grid_points,
                                       size_t cap,
                                       char **out);

// Compiles the widget for `unit_id` into a self-contained HTML fragment
// whose root element has id `container_id`.
//
// # Safety
// `spec` must be a live handle; the strings must be NUL-terminated; `out`
// must be writable.
enum DocspecStatus docspec_compile_widget(const struct DocspecSpec *spec,
                                          const char *unit_id,
                                          const char *container_id,
                                          char **out);

// Parses an expression.
//
// # Safety
// `src` must be a NUL-terminated string; `out` must be writable.
enum DocspecStatus docspec_expr_parse(const char *src, struct DocspecExpr **out);

// Releases an expression handle. Null is ignored.
//
// # Safety
// `expr` must come from [`docspec_expr_parse`] and must not be used afterwards.
void docspec_expr_free(struct DocspecExpr *expr);

// Canonical text of the expression.
//
// # Safety
// `expr` must be a live handle; `out` must be writable.
enum DocspecStatus docspec_expr_format(const struct DocspecExpr *expr, char **out);

// Evaluates the expression with `count` numeric bindings. Booleans come
// back as 1.0 or 0.0 with `out_kind` set to `Boolean`.
//
// # Safety
// `expr` must be a live handle. `names` and `values` must each point to
// `count` elements (either may be null when `count` is 0). `out_value`
// and `out_kind` must be writable.
enum DocspecStatus docspec_expr_eval(const struct DocspecExpr *expr,
                                     const char *const *names,
                                     const double *values,
                                     size_t count,
                                     double *out_value,
                                     enum DocspecKind *out_kind);

// Nonzero when `status` is `Ok`. Convenience for bindings without enums.
int docspec_status_ok(enum DocspecStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DOCSPEC_H */
