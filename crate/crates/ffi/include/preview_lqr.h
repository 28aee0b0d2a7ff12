#ifndef PREVIEW_LQR_H
#define PREVIEW_LQR_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PlqrStatus {
  PLQR_STATUS_OK = 0,
  PLQR_STATUS_NULL_POINTER = 1,
  PLQR_STATUS_DIMENSION = 2,
  PLQR_STATUS_INVALID_ARGUMENT = 3,
  PLQR_STATUS_PRECONDITION = 4,
  PLQR_STATUS_NUMERICAL = 5,
  PLQR_STATUS_OVERFLOW = 6,
  PLQR_STATUS_NON_CONVERGENCE = 7,
  PLQR_STATUS_DEGENERATE = 8,
  PLQR_STATUS_OTHER = 9,
  PLQR_STATUS_PANIC = 10,
} PlqrStatus;

/**
 * Cost matrices `Q_0..Q_{T−1}` and `R_0..R_{T−2}`.
 */
typedef struct PlqrSchedule PlqrSchedule;

/**
 * Linear system `x_{t+1} = A x_t + B u_t + w_t` with initial state.
 */
typedef struct PlqrSystem PlqrSystem;

/**
 * Closed-loop states, controls and total cost.
 */
typedef struct PlqrTrajectory PlqrTrajectory;

/**
 * Regret-bound constants and the bound value for one instance.
 */
typedef struct PlqrBoundReport {
  double rho;
  double q;
  double c_f;
  double c_k;
  double c;
  double eta;
  double alpha;
  double beta;
  double gamma;
  double alpha1;
  double alpha2;
  double bound;
  double regret;
  double margin;
  bool sufficient_condition;
} PlqrBoundReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`) and returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t plqr_last_error_message(char *buf, size_t len);

/**
 * Creates a system from row-major `a` (n×n), `b` (n×m) and `x0` (n).
 *
 * # Safety
 * Pointers must be valid for the stated lengths; `out` must be writable.
 */
enum PlqrStatus plqr_system_new(size_t n,
                                size_t m,
                                const double *a,
                                const double *b,
                                const double *x0,
                                struct PlqrSystem **out);

/**
 * Linearized inverted pendulum with initial state `x0` (4 entries).
 *
 * # Safety
 * `x0` must hold 4 doubles; `out` must be writable.
 */
enum PlqrStatus plqr_system_pendulum(const double *x0, struct PlqrSystem **out);

/**
 * # Safety
 * `sys` must be null or a handle from this library, not yet freed.
 */
void plqr_system_free(struct PlqrSystem *sys);

/**
 * State and input dimensions.
 *
 * # Safety
 * `sys` must be a live handle; `n` and `m` must be writable.
 */
enum PlqrStatus plqr_system_dims(const struct PlqrSystem *sys, size_t *n, size_t *m);

/**
 * Schedule from `horizon` row-major n×n state costs stored back to back in
 * `q` and `horizon − 1` m×m input costs in `r`.
 *
 * # Safety
 * `q` must hold `horizon·n·n` doubles and `r` `(horizon−1)·m·m`.
 */
enum PlqrStatus plqr_schedule_new(size_t n,
                                  size_t m,
                                  size_t horizon,
                                  const double *q,
                                  const double *r,
                                  struct PlqrSchedule **out);

/**
 * Random schedule `Q_t = Q_min + U_t (Q_max − Q_min)` with scalar-identity
 * bounds, drawn from `seed`.
 *
 * # Safety
 * `out` must be writable.
 */
enum PlqrStatus plqr_schedule_random(size_t n,
                                     size_t m,
                                     size_t horizon,
                                     double q_min,
                                     double q_max,
                                     double r_min,
                                     double r_max,
                                     uint64_t seed,
                                     struct PlqrSchedule **out);

/**
 * # Safety
 * `sched` must be null or a live handle.
 */
void plqr_schedule_free(struct PlqrSchedule *sched);

/**
 * # Safety
 * `sched` must be a live handle.
 */
size_t plqr_schedule_horizon(const struct PlqrSchedule *sched);

/**
 * Stabilizing solution of the discrete algebraic Riccati equation, written
 * row-major into `p_out` (n×n).
 *
 * # Safety
 * Inputs must hold n×n, n×m, n×n and m×m doubles; `p_out` n×n.
 */
enum PlqrStatus plqr_solve_dare(size_t n,
                                size_t m,
                                const double *a,
                                const double *b,
                                const double *q,
                                const double *r,
                                double *p_out);

/**
 * Single-input pole placement: writes `K` (1×n) with `eig(A + BK)` equal to
 * the `n` real `poles`.
 *
 * # Safety
 * `poles` must hold n doubles and `k_out` n doubles.
 */
enum PlqrStatus plqr_place_poles(const struct PlqrSystem *sys, const double *poles, double *k_out);

/**
 * Optimal policy with full knowledge of costs and disturbances. `w` holds
 * `T − 1` disturbance vectors back to back, or is null for none.
 *
 * # Safety
 * Handles must be live; `w` null or `(T−1)·n` doubles; `out` writable.
 */
enum PlqrStatus plqr_run_clairvoyant(const struct PlqrSystem *sys,
                                     const struct PlqrSchedule *sched,
                                     const double *w,
                                     struct PlqrTrajectory **out);

/**
 * Prediction-tracking policy with `preview` steps of cost preview and
 * tracking gain `k` (m×n).
 *
 * # Safety
 * Handles must be live; `k` m×n doubles; `w` null or `(T−1)·n` doubles.
 */
enum PlqrStatus plqr_run_prediction_tracking(const struct PlqrSystem *sys,
                                             const struct PlqrSchedule *sched,
                                             size_t preview,
                                             const double *k,
                                             const double *w,
                                             struct PlqrTrajectory **out);

/**
 * Receding-horizon baseline with window `preview + 1` and terminal matrix
 * `p_max` (n×n), typically from [`plqr_solve_dare`] at the upper cost bounds.
 *
 * # Safety
 * Handles must be live; `p_max` n×n doubles; `w` null or `(T−1)·n` doubles.
 */
enum PlqrStatus plqr_run_mpc(const struct PlqrSystem *sys,
                             const struct PlqrSchedule *sched,
                             size_t preview,
                             const double *p_max,
                             const double *w,
                             struct PlqrTrajectory **out);

/**
 * # Safety
 * `traj` must be null or a live handle.
 */
void plqr_trajectory_free(struct PlqrTrajectory *traj);

/**
 * Number of states `T` in the trajectory (0 for a null handle).
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
size_t plqr_trajectory_len(const struct PlqrTrajectory *traj);

/**
 * Total cost (NaN for a null handle).
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
double plqr_trajectory_cost(const struct PlqrTrajectory *traj);

/**
 * Copies the `T` states (T·n doubles) into `buf`.
 *
 * # Safety
 * `buf` must be valid for `len` doubles.
 */
enum PlqrStatus plqr_trajectory_states(const struct PlqrTrajectory *traj, double *buf, size_t len);

/**
 * Copies the `T − 1` controls ((T−1)·m doubles) into `buf`.
 *
 * # Safety
 * `buf` must be valid for `len` doubles.
 */
enum PlqrStatus plqr_trajectory_controls(const struct PlqrTrajectory *traj,
                                         double *buf,
                                         size_t len);

/**
 * Dynamic regret of `traj` against the clairvoyant optimum on the same
 * disturbances `w` (null for none).
 *
 * # Safety
 * Handles must be live; `out` writable.
 */
enum PlqrStatus plqr_regret(const struct PlqrSystem *sys,
                            const struct PlqrSchedule *sched,
                            const struct PlqrTrajectory *traj,
                            const double *w,
                            double *out);

/**
 * Regret bound for the disturbance-free prediction-tracking policy, with the
 * cost extrema taken from the schedule itself and the sufficient condition
 * checked against the scalar-identity bounds.
 *
 * # Safety
 * Handles must be live; `k` m×n doubles; `out` writable.
 */
enum PlqrStatus plqr_bound_check(const struct PlqrSystem *sys,
                                 const struct PlqrSchedule *sched,
                                 size_t preview,
                                 const double *k,
                                 double q_min,
                                 double q_max,
                                 double r_min,
                                 double r_max,
                                 struct PlqrBoundReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PREVIEW_LQR_H */
