/* C interface of the strata layered-composite toolkit. */

#ifndef STRATA_H
#define STRATA_H

/* Generated by cbindgen from strata-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes of every fallible entry point.
typedef enum StrataStatus {
  STRATA_STATUS_OK = 0,
  STRATA_STATUS_INVALID_ARGUMENT = 1,
  STRATA_STATUS_NOT_IN_ADMISSIBLE_SET = 2,
  STRATA_STATUS_NOT_A_ROTATION = 3,
  STRATA_STATUS_CONFIG_ERROR = 4,
  STRATA_STATUS_NON_CONVERGENCE = 5,
  STRATA_STATUS_IO_ERROR = 6,
  STRATA_STATUS_PANICKED = 7,
} StrataStatus;

// Opaque energy-density handle.
typedef struct StrataDensity StrataDensity;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version string (static, never freed).
const char *strata_version(void);

// Copies the last error message into `buf` (truncated to `len - 1` bytes,
// NUL-terminated) and returns the full message length.
//
// # Safety
// `buf` must point to `len` writable bytes, or be null (query mode).
size_t strata_last_error(char *buf, size_t len);

// Frobenius distance of a row-major matrix to SO(n).
//
// # Safety
// `entries` must point to `n * n` doubles; `out` to one writable double.
enum StrataStatus strata_dist_so(size_t n, const double *entries, double *out);

// Nearest rotation in Frobenius norm; `degenerate_out` reports a
// non-unique minimizer.
//
// # Safety
// `entries` must point to `n * n` doubles, `rotation_out` to `n * n`
// writable doubles, `degenerate_out` to one writable bool.
enum StrataStatus strata_procrustes(size_t n,
                                    const double *entries,
                                    double *rotation_out,
                                    bool *degenerate_out);

// The soft-phase compensating map `F_lambda` of an admissible matrix.
//
// # Safety
// `entries` must point to `n * n` doubles, `out` to `n * n` writable ones.
enum StrataStatus strata_f_lambda(size_t n, const double *entries, double lambda, double *out);

// All minors in the library order (length 5 at n = 2, 19 at n = 3).
//
// # Safety
// `entries` must point to `n * n` doubles; `out` to `out_len` writable ones.
enum StrataStatus strata_minors(size_t n, const double *entries, double *out, size_t out_len);

// Midsection of the closest stiff layer above `t`; NaN on invalid layering.
double strata_midsection(double t, double lambda, double eps);

// Phase of the coordinate `xn`: 1 soft, 0 stiff, -1 invalid layering.
int32_t strata_phase(double xn, double lambda, double eps);

// Saint Venant-Kirchhoff energy of a row-major matrix.
//
// # Safety
// `entries` must point to `n * n` doubles; `out` to one writable double.
enum StrataStatus strata_svk(size_t n, const double *entries, double lam, double mu, double *out);

// `W(F) = |F|^2` handle; free with [`strata_density_free`]. Null on error.
struct StrataDensity *strata_density_frobenius(size_t n);

// Saint Venant-Kirchhoff handle; free with [`strata_density_free`].
struct StrataDensity *strata_density_svk(size_t n, double lam, double mu);

// Releases a density handle (null is a no-op).
//
// # Safety
// `density` must be a pointer returned by a `strata_density_*` constructor,
// not yet freed.
void strata_density_free(struct StrataDensity *density);

// Closed-form homogenized value `lambda W(F_lambda)` of a convex density.
//
// # Safety
// `density` must be a live handle; `f_entries` n*n doubles; `out` writable.
enum StrataStatus strata_w_hom_convex(const struct StrataDensity *density,
                                      const double *f_entries,
                                      double lambda,
                                      double *out);

// Cell-problem value of the homogenized density by seeded multistart
// minimization over zero-boundary perturbations of the soft cell.
//
// # Safety
// `density` must be a live handle; `f_entries` n*n doubles; the three
// output pointers writable.
enum StrataStatus strata_cell_minimize(const struct StrataDensity *density,
                                       const double *f_entries,
                                       double lambda,
                                       size_t m,
                                       size_t m_n,
                                       size_t gauss,
                                       size_t restarts,
                                       uint64_t seed,
                                       double *value_out,
                                       double *norm_out,
                                       bool *converged_out);

// Runs a batch experiment from a config file and writes its CSV, exactly
// like the `strata` command-line tool. `kind` is one of `scaling`,
// `weakconv`, `pipeline`, `cellsweep`; `seed >= 0` overrides the config.
//
// # Safety
// `kind`, `config_path`, `out_path` must be NUL-terminated strings.
enum StrataStatus strata_run_experiment(const char *kind,
                                        const char *config_path,
                                        const char *out_path,
                                        int64_t seed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STRATA_H */
