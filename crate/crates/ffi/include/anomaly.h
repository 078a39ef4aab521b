#ifndef ANOMALY_H
#define ANOMALY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define ANOMALY_MATRIX_LEN 18

#define ANOMALY_COVECTOR_LEN 6

#define ANOMALY_CURVATURE_LEN 162

typedef enum AnomalyStatus {
  ANOMALY_STATUS_OK = 0,
  ANOMALY_STATUS_NULL_POINTER = 1,
  ANOMALY_STATUS_INVALID_INPUT = 2,
  ANOMALY_STATUS_DOMAIN = 3,
  ANOMALY_STATUS_DEGENERATE = 4,
  ANOMALY_STATUS_POSITIVITY_LOSS = 5,
  ANOMALY_STATUS_IO = 6,
  ANOMALY_STATUS_NOT_RUN = 7,
  ANOMALY_STATUS_PANIC = 8,
} AnomalyStatus;

typedef enum AnomalyHalt {
  ANOMALY_HALT_COMPLETED = 0,
  ANOMALY_HALT_STEP_LIMIT = 1,
  ANOMALY_HALT_PARABOLICITY_LOSS = 2,
  ANOMALY_HALT_POSITIVITY_LOSS = 3,
  ANOMALY_HALT_CFL_VIOLATION = 4,
  ANOMALY_HALT_NON_FINITE = 5,
} AnomalyHalt;

/**
 * Opaque flow handle: a problem plus the result of its latest run.
 */
typedef struct AnomalyFlow AnomalyFlow;

/**
 * Step-size control; `fixed_dt <= 0` selects the adaptive bound and `max_steps == 0`
 * means no step limit.
 */
typedef struct AnomalyTimeControl {
  double cfl;
  double fixed_dt;
  uint64_t max_steps;
  double margin_min;
} AnomalyTimeControl;

typedef struct AnomalyFuYauMonitor {
  uint64_t step;
  double t;
  double dt;
  double conservation_gap;
  double parabolicity_margin;
  double rhs_norm;
  double mean_exp_u;
  double l2_norm;
} AnomalyFuYauMonitor;

typedef struct AnomalyTorusMonitor {
  uint64_t step;
  double t;
  double dt;
  double balanced_residual;
  double min_eig_omega;
  double rhs_norm;
  double stationarity;
} AnomalyTorusMonitor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty after a success. The pointer stays
 * valid until the next call into this library on the same thread.
 */
const char *anomaly_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *anomaly_version(void);

/**
 * `Ψ = ‖Ω‖_ω ω²`.
 */
enum AnomalyStatus anomaly_psi_from_omega(const double *omega, double abs_omega, double *out_psi);

/**
 * Inverse of [`anomaly_psi_from_omega`]; `out_norm` receives `‖Ω‖_ω` and may be null.
 */
enum AnomalyStatus anomaly_omega_from_psi(const double *psi,
                                          double abs_omega,
                                          double *out_omega,
                                          double *out_norm);

enum AnomalyStatus anomaly_hodge_star22(const double *psi, const double *metric, double *out);

enum AnomalyStatus anomaly_tilde_star(const double *dpsi,
                                      const double *omega,
                                      double abs_omega,
                                      double *out);

/**
 * Restricted symbol at one covector. `out_eigenvalues` receives 4 complex values
 * (8 doubles) and may be null.
 */
enum AnomalyStatus anomaly_restricted_symbol(const double *xi,
                                             const double *omega,
                                             double abs_omega,
                                             const double *curvature,
                                             double alpha,
                                             double *out_eigenvalues,
                                             double *out_min_real_part,
                                             bool *out_elliptic);

/**
 * Worst case of the restricted symbol over `n_dirs` seeded unit covectors.
 */
enum AnomalyStatus anomaly_ellipticity_check(const double *omega,
                                             double abs_omega,
                                             const double *curvature,
                                             double alpha,
                                             size_t n_dirs,
                                             uint64_t seed,
                                             double *out_min_real_part,
                                             bool *out_elliptic);

enum AnomalyStatus anomaly_proposition_norm(const double *xi,
                                            const double *omega,
                                            double abs_omega,
                                            const double *curvature,
                                            double alpha,
                                            double *out_norm);

/**
 * Fu–Yau problem on a `c = 2` grid with `points⁴` samples; `f`, `mu` and the optional
 * initial datum `u0` hold one double per grid point in row-major order.
 */
enum AnomalyStatus anomaly_fuyau_new(size_t points,
                                     double period,
                                     double alpha,
                                     const double *f,
                                     const double *mu,
                                     const double *u0,
                                     size_t len,
                                     struct AnomalyFlow **out);

/**
 * Torus problem; `psi0` and `phi0` hold 18 doubles per grid point. A null `phi0`
 * selects the Φ₀ for which `psi0` is stationary (requires `alpha > 0`).
 */
enum AnomalyStatus anomaly_torus_new(size_t complex_dims,
                                     size_t points,
                                     double period,
                                     double alpha,
                                     double abs_omega,
                                     const double *psi0,
                                     const double *phi0,
                                     size_t len,
                                     struct AnomalyFlow **out);

/**
 * Integrates from the initial datum to `t_end`, replacing any previous run.
 */
enum AnomalyStatus anomaly_flow_run(struct AnomalyFlow *h,
                                    double t_end,
                                    const struct AnomalyTimeControl *ctrl,
                                    enum AnomalyHalt *out_halt);

/**
 * Number of doubles in the current state: one per point (Fu–Yau) or 18 (torus).
 */
enum AnomalyStatus anomaly_flow_state_len(const struct AnomalyFlow *h, size_t *out_len);

/**
 * Copies the final state of the latest run, plus its time, into caller buffers.
 */
enum AnomalyStatus anomaly_flow_state(const struct AnomalyFlow *h,
                                      double *out,
                                      size_t len,
                                      double *out_t);

enum AnomalyStatus anomaly_flow_monitor_count(const struct AnomalyFlow *h, size_t *out_count);

enum AnomalyStatus anomaly_flow_fuyau_monitor(const struct AnomalyFlow *h,
                                              size_t idx,
                                              struct AnomalyFuYauMonitor *out);

enum AnomalyStatus anomaly_flow_torus_monitor(const struct AnomalyFlow *h,
                                              size_t idx,
                                              struct AnomalyTorusMonitor *out);

/**
 * Releases a handle; null is ignored.
 */
void anomaly_flow_free(struct AnomalyFlow *h);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ANOMALY_H */
