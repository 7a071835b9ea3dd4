#ifndef WEYL_FFI_H
#define WEYL_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WsStatus {
  WS_STATUS_OK = 0,
  WS_STATUS_NULL_POINTER = 1,
  WS_STATUS_INVALID_ARGUMENT = 2,
  WS_STATUS_INVALID_FIELD = 3,
  WS_STATUS_RESOURCE_LIMIT = 4,
  WS_STATUS_CHECKSUM_MISMATCH = 5,
  WS_STATUS_MALFORMED_CACHE = 6,
  WS_STATUS_IO = 7,
  /**
   * A Rust panic was caught at the boundary.
   */
  WS_STATUS_INTERNAL = 8,
} WsStatus;

/**
 * Opaque table of `|T_{d,p}(a)|` over all `a` in `F_p^d`.
 */
typedef struct WsTable WsTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *ws_last_error_message(void);

/**
 * Builds the table for `(d, p)`, refusing more than `cap` entries.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum WsStatus ws_table_build(uint32_t d, uint64_t p, uint64_t cap, struct WsTable **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for writes.
 */
enum WsStatus ws_table_load(const char *path_, struct WsTable **out);

/**
 * # Safety
 * `table` must come from this library; `path` must be NUL-terminated.
 */
enum WsStatus ws_table_save(const struct WsTable *table, const char *path_);

/**
 * Number of entries, `p^d`; 0 for a null handle.
 *
 * # Safety
 * `table` must be null or come from this library.
 */
size_t ws_table_len(const struct WsTable *table);

/**
 * `|T(a)|` at a row-major index (`a_1` slowest).
 *
 * # Safety
 * `table` must come from this library and `out` be valid for writes.
 */
enum WsStatus ws_table_magnitude(const struct WsTable *table, size_t index, double *out);

/**
 * `sum |T(a)|^{2 nu}` over all `a`, optionally skipping `a = 0`.
 *
 * # Safety
 * `table` must come from this library and `out` be valid for writes.
 */
enum WsStatus ws_table_moment(const struct WsTable *table,
                              uint32_t nu,
                              bool include_zero,
                              double *out);

/**
 * # Safety
 * `table` must be null or come from this library, and not be used again.
 */
void ws_table_free(struct WsTable *table);

/**
 * `T_{d,p}(a) = sum_{n<p} e_p(a_1 n + ... + a_d n^d)` with `d = len`.
 *
 * # Safety
 * `coeffs` must hold `len` values; the out pointers must be valid for writes.
 */
enum WsStatus ws_complete_sum(uint64_t p,
                              const uint64_t *coeffs,
                              size_t len,
                              double *out_re,
                              double *out_im);

/**
 * `S_d(x; N)` with `d = len`, coordinates given as doubles (reduced mod 1).
 *
 * # Safety
 * `x` must hold `len` values; the out pointers must be valid for writes.
 */
enum WsStatus ws_weyl_sum(const double *x, size_t len, uint64_t n, double *out_re, double *out_im);

/**
 * `S_d(a/q; N)` evaluated exactly mod `q` before the exponential.
 *
 * # Safety
 * `nums` must hold `len` values; the out pointers must be valid for writes.
 */
enum WsStatus ws_weyl_sum_rational(const int64_t *nums,
                                   size_t len,
                                   uint64_t q,
                                   uint64_t n,
                                   double *out_re,
                                   double *out_im);

/**
 * Exact extreme and star discrepancy (unnormalised, in points) of values in `[0, 1)`.
 *
 * # Safety
 * `points` must hold `len` values; the out pointers must be valid for writes.
 */
enum WsStatus ws_discrepancy(const double *points, size_t len, double *out_d, double *out_star);

/**
 * `beta_d` as an exact fraction.
 *
 * # Safety
 * The out pointers must be valid for writes.
 */
enum WsStatus ws_beta(uint32_t d, uint64_t *out_num, uint64_t *out_den);

/**
 * `kappa_d` as an exact fraction.
 *
 * # Safety
 * The out pointers must be valid for writes.
 */
enum WsStatus ws_kappa(uint32_t d, uint64_t *out_num, uint64_t *out_den);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WEYL_FFI_H */
