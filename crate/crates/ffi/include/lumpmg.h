#ifndef LUMPMG_H
#define LUMPMG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define LUMPMG_BC_ALL_DIRICHLET 0

#define LUMPMG_BC_MIXED_CORNER 1

/**
 * One assembled `(level, tau)` system with its multigrid level stack.
 */
typedef struct LumpmgProblem LumpmgProblem;

typedef struct LumpmgSolver LumpmgSolver;

typedef int32_t LumpmgStatus;

typedef struct LumpmgSolveInfo {
  size_t iterations;
  /**
   * 1 if the relative residual dropped below the tolerance.
   */
  int32_t converged;
  double conv_factor;
  double relative_residual;
  double wall_ms;
} LumpmgSolveInfo;

#define LUMPMG_OK 0

#define LUMPMG_ERR_NULL 1

#define LUMPMG_ERR_INVALID_ARGUMENT 2

#define LUMPMG_ERR_CONFIG 3

#define LUMPMG_ERR_DIMENSION 4

#define LUMPMG_ERR_NUMERICAL 5

#define LUMPMG_ERR_PANIC 6

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds the L-shape problem of Example `example` (1 or 2) with boundary
 * conditions `bc`, finest level `level` (h = 2^-level) and step `tau`.
 * DOFs are numbered hierarchically; use `lumpmg_problem_from_json` with
 * `"ordering"` to choose the Gauss-Seidel sweep order.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
LumpmgStatus lumpmg_problem_new(int32_t example,
                                int32_t bc,
                                uint32_t level,
                                double tau,
                                struct LumpmgProblem **out);

/**
 * Builds a problem from the JSON `problem` object of an experiment config
 * (single level and tau).
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
LumpmgStatus lumpmg_problem_from_json(const char *json, struct LumpmgProblem **out);

/**
 * # Safety
 * `p` must be null or a handle from `lumpmg_problem_new`.
 */
void lumpmg_problem_free(struct LumpmgProblem *p);

/**
 * Unknowns per field; the block system has twice as many.
 *
 * # Safety
 * `p` must be a valid problem handle.
 */
LumpmgStatus lumpmg_problem_dofs(const struct LumpmgProblem *p, size_t *out);

/**
 * Writes the problem's right-hand side `[0; M u_old]` (length `2n`).
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
LumpmgStatus lumpmg_problem_rhs(const struct LumpmgProblem *p, double *out, size_t len);

/**
 * `y = A x` for the block system, vectors stored as `[v; u]`.
 *
 * # Safety
 * `x` and `y` must point to `len` doubles each.
 */
LumpmgStatus lumpmg_problem_apply(const struct LumpmgProblem *p,
                                  const double *x,
                                  double *y,
                                  size_t len);

/**
 * Sets up a solver from the JSON `method` object of an experiment config,
 * e.g. `{"solver": "gmres", "precond": "B", "inner": "mg"}`.
 *
 * # Safety
 * `p` must be a valid problem handle, `json` a NUL-terminated string and
 * `out` a valid pointer. The solver does not borrow `p`.
 */
LumpmgStatus lumpmg_solver_new(const struct LumpmgProblem *p,
                               const char *method_json,
                               struct LumpmgSolver **out);

/**
 * # Safety
 * `s` must be null or a handle from `lumpmg_solver_new`.
 */
void lumpmg_solver_free(struct LumpmgSolver *s);

/**
 * Solves `A x = rhs` to relative residual `tol` from a random initial
 * guess drawn from `seed`. Non-convergence is reported in `info`, not as
 * an error.
 *
 * # Safety
 * `rhs` and `x` must point to `len` doubles; `info` may be null.
 */
LumpmgStatus lumpmg_solver_solve(struct LumpmgSolver *s,
                                 const double *rhs,
                                 double *x,
                                 size_t len,
                                 double tol,
                                 size_t maxit,
                                 uint64_t seed,
                                 struct LumpmgSolveInfo *info);

/**
 * Message of the last failed call on this thread, or null. Valid until
 * the next failing call on the same thread.
 */
const char *lumpmg_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lumpmg_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LUMPMG_H */
