#ifndef NCDK_H
#define NCDK_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Elementary process driving the system.
 */
typedef enum NcdkProcess {
  NCDK_PROCESS_DYSON = 0,
  NCDK_PROCESS_BESQ = 1,
  NCDK_PROCESS_CIRCLE = 2,
} NcdkProcess;

/**
 * Result codes; 0 is success.
 */
typedef enum NcdkStatus {
  NCDK_STATUS_OK = 0,
  NCDK_STATUS_INVALID_ARGUMENT = 1,
  NCDK_STATUS_DOMAIN = 2,
  NCDK_STATUS_CONFIG = 3,
  NCDK_STATUS_NUMERICAL = 4,
  NCDK_STATUS_UNSUPPORTED = 5,
  NCDK_STATUS_IO = 6,
  NCDK_STATUS_NULL_POINTER = 7,
  NCDK_STATUS_PANIC = 8,
} NcdkStatus;

/**
 * Opaque kernel handle.
 */
typedef struct NcdkKernel NcdkKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Build a kernel for `process` started from `points[0..len]`; repeated
 * points are multiplicities. `nu` is read for BESQ, `r` for the circle.
 *
 * # Safety
 * `points` must be valid for `len` reads and `out` for one write.
 */
enum NcdkStatus ncdk_kernel_new(enum NcdkProcess process,
                                double nu,
                                double r,
                                const double *points,
                                size_t len,
                                struct NcdkKernel **out);

/**
 * Release a kernel; null is ignored.
 *
 * # Safety
 * `k` must come from [`ncdk_kernel_new`] and not be used afterwards.
 */
void ncdk_kernel_free(struct NcdkKernel *k);

/**
 * Number of particles, 0 for a null handle.
 *
 * # Safety
 * `k` must be null or a live handle.
 */
size_t ncdk_kernel_particles(const struct NcdkKernel *k);

/**
 * `𝕂(s, x; t, y)`.
 *
 * # Safety
 * `k` must be a live handle and `out` valid for one write.
 */
enum NcdkStatus ncdk_kernel_eval(const struct NcdkKernel *k,
                                 double s,
                                 double x,
                                 double t,
                                 double y,
                                 double *out);

/**
 * One-point density `ρ_1(t, x)`.
 *
 * # Safety
 * `k` must be a live handle and `out` valid for one write.
 */
enum NcdkStatus ncdk_kernel_density(const struct NcdkKernel *k, double t, double x, double *out);

/**
 * Correlation function at the space-time points `(ts[i], xs[i])`, `i < m`.
 *
 * # Safety
 * `ts`, `xs` must be valid for `m` reads and `out` for one write.
 */
enum NcdkStatus ncdk_kernel_corr(const struct NcdkKernel *k,
                                 const double *ts,
                                 const double *xs,
                                 size_t m,
                                 double *out);

/**
 * Circle equilibrium kernel at time lag `dt` and displacement `dx`.
 */
double ncdk_eq_circle_kernel(double r, size_t n, double dt, double dx);

/**
 * Extended sine kernel of density `rho`.
 */
double ncdk_extended_sine(double rho, double dt, double dx);

/**
 * Copy the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length, 0 if none.
 *
 * # Safety
 * `buf` must be null or valid for `len` writes.
 */
size_t ncdk_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ncdk_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NCDK_H */
