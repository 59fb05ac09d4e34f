#ifndef PLATECAP_H
#define PLATECAP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  PLATECAP_STATUS_OK = 0,
  PLATECAP_STATUS_NULL_POINTER = 1,
  PLATECAP_STATUS_INVALID_ARGUMENT = 2,
  PLATECAP_STATUS_INVALID_MATERIAL = 3,
  PLATECAP_STATUS_SOLVER_FAILURE = 4,
  PLATECAP_STATUS_NOT_CONVERGED = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  PLATECAP_STATUS_INTERNAL = 6,
} PlatecapStatus;

/**
 * Normalised fundamental solutions of the limit plate operators.
 */
typedef struct PlatecapFundamentals PlatecapFundamentals;

/**
 * Stiffness matrix of a material, 6×6 in Mandel notation.
 */
typedef struct PlatecapMaterial PlatecapMaterial;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *platecap_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *platecap_version(void);

/**
 * Isotropic material with Lamé constants `lambda >= 0`, `mu > 0`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one pointer.
 */
PlatecapStatus platecap_material_isotropic(double lambda, double mu, PlatecapMaterial **out);

/**
 * General material from the 21 upper-triangle entries of the Mandel
 * stiffness, row by row.
 *
 * # Safety
 * `upper` must point to 21 readable doubles and `out` to writable storage
 * for one pointer.
 */
PlatecapStatus platecap_material_general(const double *upper, PlatecapMaterial **out);

/**
 * # Safety
 * `material` must come from a `platecap_material_*` constructor and not be
 * used afterwards. Null is accepted.
 */
void platecap_material_free(PlatecapMaterial *material);

/**
 * Writes the 3×3 reduced (plane-stress) stiffness, row-major, to `out`.
 *
 * # Safety
 * `material` must be a live handle and `out` must point to 9 writable doubles.
 */
PlatecapStatus platecap_material_reduced(const PlatecapMaterial *material, double *out);

/**
 * Hardy ratio of the piecewise-linear function with values `values` at
 * the increasing `nodes`. `variant` is one of `classical`, `log-outer`,
 * `log-inner`, `shifted`; `shift` is used only by the last one.
 *
 * # Safety
 * `variant` must be a NUL-terminated string, `nodes` and `values` must hold
 * `n` doubles and `out` must point to one writable double.
 */
PlatecapStatus platecap_hardy_ratio(const char *variant,
                                    double shift,
                                    const double *nodes,
                                    const double *values,
                                    size_t n,
                                    double *out);

/**
 * Builds and normalises the fundamental solutions for `material`.
 *
 * # Safety
 * `material` must be a live handle and `out` must point to writable storage
 * for one pointer.
 */
PlatecapStatus platecap_fundamentals_new(const PlatecapMaterial *material,
                                         PlatecapFundamentals **out);

/**
 * # Safety
 * `f` must come from [`platecap_fundamentals_new`] and not be used
 * afterwards. Null is accepted.
 */
void platecap_fundamentals_free(PlatecapFundamentals *f);

/**
 * Evaluates the membrane matrix `Φ′` (row-major into `phi_prime[4]`) and
 * the bending solution `Φ₃` at `(y1, y2) ≠ 0`.
 *
 * # Safety
 * `f` must be a live handle, `phi_prime` must point to 4 writable doubles
 * and `phi3` to one.
 */
PlatecapStatus platecap_fundamentals_eval(const PlatecapFundamentals *f,
                                          double y1,
                                          double y2,
                                          double *phi_prime,
                                          double *phi3);

/**
 * Solves the clamped Kirchhoff plate on `(0, a) × (0, b)` with an
 * `nx × ny` grid. `load` and `solution` hold `(g₁, g₂, g₃)` and
 * `(w₁, w₂, w₃)` per node, node `i + (nx+1)·j` at `(i·a/nx, j·b/ny)`.
 * If `with_point` is nonzero, `w₃` is also pinned at the interior grid
 * node nearest to `(p1, p2)`. `energy` may be null.
 *
 * # Safety
 * `material` must be a live handle; `load` and `solution` must hold
 * `3·(nx+1)·(ny+1)` doubles; `energy` is null or points to one double.
 */
PlatecapStatus platecap_kirchhoff_solve(const PlatecapMaterial *material,
                                        double a,
                                        double b,
                                        size_t nx,
                                        size_t ny,
                                        int32_t with_point,
                                        double p1,
                                        double p2,
                                        const double *load,
                                        double *solution,
                                        double *energy);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PLATECAP_H */
