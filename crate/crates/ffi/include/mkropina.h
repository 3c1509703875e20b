#ifndef MKROPINA_H
#define MKROPINA_H

/* This file is generated by cbindgen from mkropina-ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status of an FFI call.
typedef enum MkStatus {
  MK_OK = 0,
  // Invalid configuration or expression input.
  MK_CONFIG_ERROR = 1,
  // A verdict precondition failed (e.g. metrizing a non-metrizable space).
  MK_PRECONDITION_ERROR = 2,
  // A numerical computation failed.
  MK_NUMERICAL_ERROR = 3,
  // Null pointer or malformed argument at the boundary.
  MK_INVALID_ARGUMENT = 4,
} MkStatus;

// Analysis verdict, mirroring the `verdict` report field.
typedef enum MkVerdict {
  MK_METRIZABLE = 0,
  MK_NOT_METRIZABLE = 1,
  MK_NOT_BERWALD = 2,
  // The analysis could not reach a verdict (out-of-scope input).
  MK_UNDETERMINED = 3,
} MkVerdict;

// Opaque analysis result; release with [`mk_analysis_free`].
typedef struct MkAnalysis MkAnalysis;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static string (do not free).
const char *mk_version(void);

// Message of the last error raised on this thread. The pointer stays valid
// until the next failing call on the same thread; do not free it.
const char *mk_last_error(void);

// Runs the analysis pipeline on a JSON geometry configuration.
//
// # Safety
// `config_json` must point to a NUL-terminated string and `out_analysis`
// to a writable pointer slot.
enum MkStatus mk_analyze(const char *config_json, struct MkAnalysis **out_analysis);

// Serializes the analysis report as pretty JSON; free with
// [`mk_string_free`].
//
// # Safety
// `analysis` must come from [`mk_analyze`] and not have been freed.
enum MkStatus mk_analysis_report_json(const struct MkAnalysis *analysis, char **out_json);

// The verdict of an analysis.
//
// # Safety
// `analysis` must come from [`mk_analyze`] and not have been freed.
enum MkVerdict mk_analysis_verdict(const struct MkAnalysis *analysis);

// Max skew of the affine Ricci tensor over the sample grid; NaN when the
// analysis did not compute it.
//
// # Safety
// `analysis` must come from [`mk_analyze`] and not have been freed.
double mk_analysis_ricci_skew_max(const struct MkAnalysis *analysis);

// Residual of the Berwald certificate; NaN when unavailable.
//
// # Safety
// `analysis` must come from [`mk_analyze`] and not have been freed.
double mk_analysis_berwald_residual(const struct MkAnalysis *analysis);

// Builds and verifies the metrizing metric; the report JSON goes to
// `out_json` (free with [`mk_string_free`]).
//
// # Safety
// Pointer arguments as in [`mk_analyze`].
enum MkStatus mk_metrize(const char *config_json, double u0, char **out_json);

// Integrates a spray curve; `init` is "x1,..,xn;y1,..,yn". The trajectory
// CSV (`t,x1..xn,y1..yn`) goes to `out_csv` (free with [`mk_string_free`]).
// A non-positive `rel_tol` selects the default integrator tolerances.
//
// # Safety
// Pointer arguments as in [`mk_analyze`].
enum MkStatus mk_geodesic_csv(const char *config_json,
                              const char *init,
                              double t_end,
                              double rel_tol,
                              char **out_csv);

// Releases an analysis handle.
//
// # Safety
// `analysis` must come from [`mk_analyze`] and not be used afterwards.
void mk_analysis_free(struct MkAnalysis *analysis);

// Releases a string allocated by this library.
//
// # Safety
// `s` must come from an `out_*` parameter of this library and not be used
// afterwards.
void mk_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MKROPINA_H */
