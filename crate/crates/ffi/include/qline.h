#ifndef QLINE_H
#define QLINE_H

#include <stddef.h>
#include <stdint.h>

typedef enum qline_status {
  QLINE_STATUS_OK = 0,
  QLINE_STATUS_NULL_POINTER = 1,
  QLINE_STATUS_INVALID_ARGUMENT = 2,
  QLINE_STATUS_UNKNOWN_PROBLEM = 3,
  QLINE_STATUS_DIMENSION_MISMATCH = 4,
  QLINE_STATUS_NUMERIC_FAILURE = 5,
  QLINE_STATUS_PANIC = 6,
} qline_status;

/**
 * Outcome of a solve, mirrored from the library.
 */
typedef enum qline_solve_status {
  QLINE_SOLVE_STATUS_CONVERGED = 0,
  QLINE_SOLVE_STATUS_MAX_ITERATIONS = 1,
  QLINE_SOLVE_STATUS_TIME_CAP = 2,
  QLINE_SOLVE_STATUS_LINE_SEARCH_FAILURE = 3,
  QLINE_SOLVE_STATUS_NUMERIC_FAILURE = 4,
} qline_solve_status;

/**
 * Opaque problem handle.
 */
typedef struct qline_problem qline_problem;

/**
 * Opaque solve result handle.
 */
typedef struct qline_result qline_result;

typedef struct qline_options {
  double grad_tolerance;
  size_t max_iterations;
  double time_cap_seconds;
  /**
   * Initial dilation, used by the q-solver only.
   */
  double q0;
  /**
   * Schedule exponent, used by the q-solver only.
   */
  uint32_t gamma;
} qline_options;

/**
 * Objective callback: `n` coordinates at `x`.
 */
typedef double (*qline_objective_fn)(const double *x, size_t n, void *user_data);

/**
 * Gradient callback: write `n` partial derivatives to `out`.
 */
typedef void (*qline_gradient_fn)(const double *x, size_t n, double *out, void *user_data);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer stays
 * valid until the next call into this library from the same thread.
 */
const char *qline_last_error(void);

/**
 * Library defaults: tolerance 1e-5, 10000 iterations, 100 s, q0 0.9, gamma 1.
 */
struct qline_options qline_options_default(void);

/**
 * Look up a built-in problem such as `"branin"` or `"fc"`. `c` is read only
 * when `has_c` is non-zero and is required for the fc family.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum qline_status qline_problem_builtin(const char *name,
                                        double c,
                                        int32_t has_c,
                                        struct qline_problem **out);

/**
 * Wrap caller-provided callbacks as a problem of dimension `n`.
 *
 * # Safety
 * Both callbacks must be safe to call with `n`-element buffers for as long
 * as the handle lives, from whichever thread runs the solver. `user_data` is
 * passed through untouched.
 */
enum qline_status qline_problem_from_callbacks(size_t n,
                                               qline_objective_fn objective,
                                               qline_gradient_fn gradient,
                                               void *user_data,
                                               struct qline_problem **out);

/**
 * # Safety
 * `problem` must come from a `qline_problem_*` constructor or be NULL.
 */
void qline_problem_free(struct qline_problem *problem);

/**
 * Dimension of the problem, 0 for NULL.
 *
 * # Safety
 * `problem` must be a live handle or NULL.
 */
size_t qline_problem_dimension(const struct qline_problem *problem);

/**
 * Minimize with the q-Newton line search. `options` may be NULL for defaults.
 * A solver that stops without converging still returns `QLINE_STATUS_OK`;
 * inspect the result's status.
 *
 * # Safety
 * `x0` must point to `n` doubles; `problem` and `out` must be valid.
 */
enum qline_status qline_solve_qls(const struct qline_problem *problem,
                                  const double *x0,
                                  size_t n,
                                  const struct qline_options *options,
                                  struct qline_result **out);

/**
 * Minimize with BFGS. Same contract as [`qline_solve_qls`].
 *
 * # Safety
 * See [`qline_solve_qls`].
 */
enum qline_status qline_solve_bfgs(const struct qline_problem *problem,
                                   const double *x0,
                                   size_t n,
                                   const struct qline_options *options,
                                   struct qline_result **out);

/**
 * # Safety
 * `result` must come from a solve call or be NULL.
 */
void qline_result_free(struct qline_result *result);

/**
 * # Safety
 * `result` must be a live handle.
 */
enum qline_solve_status qline_result_status(const struct qline_result *result);

/**
 * # Safety
 * `result` must be a live handle.
 */
size_t qline_result_iterations(const struct qline_result *result);

/**
 * # Safety
 * `result` must be a live handle.
 */
double qline_result_objective(const struct qline_result *result);

/**
 * # Safety
 * `result` must be a live handle.
 */
double qline_result_grad_norm(const struct qline_result *result);

/**
 * Copy the final point into `out`, which holds `len` doubles.
 *
 * # Safety
 * `result` must be a live handle and `out` must point to `len` doubles.
 */
enum qline_status qline_result_x(const struct qline_result *result, double *out, size_t len);

/**
 * Positive definite modification of the symmetric `n x n` row-major matrix
 * `a`: every block eigenvalue of its LDL^T factorization is lifted to at
 * least `delta`. The modified matrix is written to `out` (row-major).
 *
 * # Safety
 * `a` and `out` must each point to `n * n` doubles; they may not overlap.
 */
enum qline_status qline_psd_modify(const double *a, size_t n, double delta, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QLINE_H */
