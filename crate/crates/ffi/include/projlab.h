#ifndef PROJLAB_H
#define PROJLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PlStatus {
  PL_STATUS_OK = 0,
  PL_STATUS_NULL_POINTER = 1,
  PL_STATUS_INVALID_ARGUMENT = 2,
  PL_STATUS_PARSE = 3,
  PL_STATUS_NUMERICAL = 4,
  PL_STATUS_CERTIFICATION = 5,
  PL_STATUS_IO = 6,
  PL_STATUS_PANIC = 7,
} PlStatus;

typedef struct PlProjection PlProjection;

typedef struct PlReport PlReport;

typedef struct PlSpace PlSpace;

typedef struct PlSubspace PlSubspace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. Valid until the
// next failing call on the same thread.
const char *pl_last_error_message(void);

// Library version, a static string.
const char *pl_version(void);

// Releases a string returned by this library.
//
// # Safety
// `s` is NULL or a string returned by `pl_report_json`, not yet freed.
void pl_string_free(char *s);

// `l_p^dim`; pass `INFINITY` for the max norm.
//
// # Safety
// `out` must be a valid pointer.
enum PlStatus pl_space_lp(size_t dim, double p, struct PlSpace **out);

// A space from its JSON document.
//
// # Safety
// `json` must be a NUL-terminated string, `out` a valid pointer.
enum PlStatus pl_space_from_json(const char *json, struct PlSpace **out);

// # Safety
// `s` is NULL or a live handle.
void pl_space_free(struct PlSpace *s);

// Dimension, or 0 for NULL.
//
// # Safety
// `s` is NULL or a live handle.
size_t pl_space_dim(const struct PlSpace *s);

// `||x||` for `x` of length `len == dim`.
//
// # Safety
// `x` points to `len` doubles; `out` is a valid pointer.
enum PlStatus pl_space_norm(const struct PlSpace *s, const double *x, size_t len, double *out);

// Span of `count` vectors stored back to back (`count * dim` doubles).
//
// # Safety
// `s` is a live handle, `vectors` points to `count * dim` doubles, `out` is
// a valid pointer.
enum PlStatus pl_subspace_new(const struct PlSpace *s,
                              const double *vectors,
                              size_t count,
                              struct PlSubspace **out);

// # Safety
// `x` is NULL or a live handle.
void pl_subspace_free(struct PlSubspace *x);

// Dimension, or 0 for NULL.
//
// # Safety
// `x` is NULL or a live handle.
size_t pl_subspace_dim(const struct PlSubspace *x);

// Minimal projection of the whole space onto `y`; writes `λ(Y, X)` to
// `lambda` and the projection to `out` (either may be NULL).
//
// # Safety
// `y` is a live handle; `lambda` and `out` are NULL or valid pointers.
enum PlStatus pl_minimal_projection(const struct PlSubspace *y,
                                    double tau,
                                    double *lambda,
                                    struct PlProjection **out);

// # Safety
// `p` is NULL or a live handle.
void pl_projection_free(struct PlProjection *p);

// Operator norm on the projection's domain.
//
// # Safety
// `p` is a live handle, `out` a valid pointer.
enum PlStatus pl_projection_norm(const struct PlProjection *p, double *out);

// Copies the `dim x dim` ambient matrix, row-major, into `buf` of length
// `len >= dim * dim`.
//
// # Safety
// `p` is a live handle, `buf` points to `len` writable doubles.
enum PlStatus pl_projection_matrix(const struct PlProjection *p, double *buf, size_t len);

// Runs an experiment config (JSON text). File references resolve against
// `base_dir` (NULL for the working directory). A report is produced even
// when the experiment itself fails; check `pl_report_ok`.
//
// # Safety
// `config` is a NUL-terminated string, `base_dir` NULL or one, `out` a valid
// pointer.
enum PlStatus pl_run_config(const char *config, const char *base_dir, struct PlReport **out);

// # Safety
// `r` is NULL or a live handle.
void pl_report_free(struct PlReport *r);

// 1 when every certification passed, 0 otherwise (or for NULL).
//
// # Safety
// `r` is NULL or a live handle.
int32_t pl_report_ok(const struct PlReport *r);

// The report as JSON; release with `pl_string_free`. NULL for NULL.
//
// # Safety
// `r` is NULL or a live handle.
char *pl_report_json(const struct PlReport *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROJLAB_H */
