#ifndef DYADIC_BUMP_H
#define DYADIC_BUMP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Which bump constant [`db_bump_constant`] computes.
typedef enum DbBump {
  // Two-weight A_p; the Young handle is ignored and may be NULL.
  DB_BUMP_AP = 0,
  // Bump on the σ side.
  DB_BUMP_SEPARATED_A = 1,
  // Bump on the u side.
  DB_BUMP_SEPARATED_B = 2,
} DbBump;

// Shift coefficient mode for [`db_shift_random`].
typedef enum DbShiftMode {
  // Coefficients projected to mean zero.
  DB_SHIFT_MODE_CANCELLATIVE = 0,
  DB_SHIFT_MODE_POSITIVE = 1,
} DbShiftMode;

// Result codes. Zero is success.
typedef enum DbStatus {
  DB_STATUS_OK = 0,
  DB_STATUS_NULL_POINTER = 1,
  // Bad string, mesh, cube, spec or weight.
  DB_STATUS_INVALID_ARGUMENT = 2,
  // Argument outside the mathematical domain of the operation.
  DB_STATUS_DOMAIN = 3,
  DB_STATUS_MESH_MISMATCH = 4,
  // Configuration text could not be parsed or validated.
  DB_STATUS_CONFIG = 5,
  DB_STATUS_IO = 6,
  // A Rust panic was caught at the boundary.
  DB_STATUS_PANIC = 7,
} DbStatus;

// A grid function on a dyadic mesh.
typedef struct DbGrid DbGrid;

// A Haar shift kernel.
typedef struct DbShift DbShift;

// A Young function.
typedef struct DbYoung DbYoung;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. Valid until the
// next call on the same thread; do not free.
const char *db_last_error(void);

// Library version, a static string.
const char *db_version(void);

// # Safety
// `s` must be NULL or a string returned by this library, not yet freed.
void db_string_free(char *s);

// Grid of `len` cell values in row-major order on the `dim`-dimensional
// mesh of depth `depth`.
//
// # Safety
// `values` must point to `len` readable doubles; `out` must be writable.
enum DbStatus db_grid_new(uint32_t dim,
                          uint32_t depth,
                          const double *values,
                          size_t len,
                          struct DbGrid **out);

// Weight from a generator spec such as `cascade:0.5,7`.
//
// # Safety
// `spec` must be a NUL-terminated string; `out` must be writable.
enum DbStatus db_grid_weight(uint32_t dim, uint32_t depth, const char *spec, struct DbGrid **out);

// # Safety
// `g` must be NULL or a live grid handle.
void db_grid_free(struct DbGrid *g);

// Number of cells, or 0 for NULL.
//
// # Safety
// `g` must be NULL or a live grid handle.
size_t db_grid_len(const struct DbGrid *g);

// Copy the cell values into `buf`, which holds `len` doubles.
//
// # Safety
// `buf` must point to `len` writable doubles.
enum DbStatus db_grid_values(const struct DbGrid *g, double *buf, size_t len);

// # Safety
// `spec` must be a NUL-terminated string; `out` must be writable.
enum DbStatus db_young_parse(const char *spec, struct DbYoung **out);

// # Safety
// `a` must be NULL or a live Young handle.
void db_young_free(struct DbYoung *a);

// # Safety
// `a` must be a live Young handle; `out` must be writable.
enum DbStatus db_young_value(const struct DbYoung *a, double t, double *out);

// # Safety
// `a` must be a live Young handle; `out` must be writable.
enum DbStatus db_young_inverse(const struct DbYoung *a, double t, double *out);

// New handle for the complementary function.
//
// # Safety
// `a` must be a live Young handle; `out` must be writable.
enum DbStatus db_young_complement(const struct DbYoung *a, struct DbYoung **out);

// Luxemburg average of `f` over the cube `(level, index)`.
//
// # Safety
// Handles must be live; `out` must be writable.
enum DbStatus db_luxemburg_norm(const struct DbGrid *f,
                                const struct DbYoung *a,
                                uint32_t level,
                                size_t index,
                                double *out);

// # Safety
// Handles must be live (the Young handle may be NULL for `Ap`); `out` must
// be writable.
enum DbStatus db_bump_constant(enum DbBump kind,
                               const struct DbGrid *u,
                               const struct DbGrid *sigma,
                               const struct DbYoung *a,
                               double p,
                               double *out);

// Random shift of complexity `(m, n)`.
//
// # Safety
// `out` must be writable.
enum DbStatus db_shift_random(uint32_t dim,
                              uint32_t depth,
                              uint32_t m,
                              uint32_t n,
                              uint64_t seed,
                              enum DbShiftMode mode,
                              struct DbShift **out);

// # Safety
// `s` must be NULL or a live shift handle.
void db_shift_free(struct DbShift *s);

// # Safety
// Handles must be live; `out` must be writable.
enum DbStatus db_shift_apply(const struct DbShift *s, const struct DbGrid *f, struct DbGrid **out);

// Norm of `f ↦ S(fσ)` from `L^p(σ)` to `L^p(u)`: exact for `p = 2`,
// a lower bound otherwise.
//
// # Safety
// Handles must be live; `out` must be writable.
enum DbStatus db_shift_weighted_norm(const struct DbShift *s,
                                     const struct DbGrid *u,
                                     const struct DbGrid *sigma,
                                     double p,
                                     size_t budget,
                                     uint64_t seed,
                                     double *out);

// # Safety
// Handles must be live; `out` must be writable.
enum DbStatus db_shift_testing(const struct DbShift *s,
                               const struct DbGrid *u,
                               const struct DbGrid *sigma,
                               double p,
                               double *out);

// Truncated Hilbert transform of a one-dimensional grid.
//
// # Safety
// `f` must be live; `out` must be writable.
enum DbStatus db_hilbert_apply(const struct DbGrid *f, double eps, struct DbGrid **out);

// Run a named suite and return its JSON report. `config_toml` may be NULL,
// in which case the suite defaults are used with `seed`; otherwise `seed`
// overrides the config's seed. `passed` (optional) receives 1 iff every
// verdict passed.
//
// # Safety
// Strings must be NUL-terminated; `out_json` must be writable; the
// returned string is freed with [`db_string_free`].
enum DbStatus db_run_suite(const char *suite,
                           const char *config_toml,
                           uint64_t seed,
                           char **out_json,
                           int32_t *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DYADIC_BUMP_H */
