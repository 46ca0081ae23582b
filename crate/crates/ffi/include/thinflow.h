#ifndef THINFLOW_H
#define THINFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TfFieldKind {
  /**
   * `H_ε`, unit circulation around the obstacle.
   */
  TF_FIELD_KIND_HARMONIC = 0,
  /**
   * `u₀^ε`.
   */
  TF_FIELD_KIND_INITIAL = 1,
  /**
   * `K_ε[ω₀]`.
   */
  TF_FIELD_KIND_INDUCED = 2,
  /**
   * `W₀^ε` with cutoff parameter λ.
   */
  TF_FIELD_KIND_SHIFTED = 3,
  /**
   * `u₀` around the bare curve; `epsilon` is ignored.
   */
  TF_FIELD_KIND_LIMIT = 4,
} TfFieldKind;

typedef enum TfStatus {
  TF_STATUS_OK = 0,
  TF_STATUS_NULL_POINTER = 1,
  TF_STATUS_INVALID_ARGUMENT = 2,
  TF_STATUS_MAP_ERROR = 3,
  TF_STATUS_FIELD_ERROR = 4,
  TF_STATUS_SOLVER_ERROR = 5,
  TF_STATUS_PANIC = 6,
} TfStatus;

typedef struct TfFamily TfFamily;

typedef struct TfField TfField;

typedef struct TfFlow TfFlow;

typedef struct TfSolver TfSolver;

/**
 * One disk-supported vorticity bump.
 */
typedef struct TfBump {
  double center_x;
  double center_y;
  double radius;
  double amplitude;
} TfBump;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error of this thread into `buf` (NUL-terminated, truncated to `len`).
 *
 * Returns the full message length without the terminator, 0 when there is no error.
 */
size_t tf_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tf_version(void);

/**
 * Segment obstacle `Ω_ε` with `T_ε = T/(1+ε)`.
 */
enum TfStatus tf_family_new(double epsilon, struct TfFamily **out);

void tf_family_free(struct TfFamily *family);

/**
 * `T_ε(x)` for a point outside the obstacle.
 */
enum TfStatus tf_family_map(const struct TfFamily *family,
                            double x,
                            double y,
                            double *re,
                            double *im);

/**
 * 1 when `(x, y)` lies in `Π_ε`, 0 otherwise.
 */
enum TfStatus tf_family_is_exterior(const struct TfFamily *family,
                                    double x,
                                    double y,
                                    int32_t *out);

/**
 * Flow data: circulation `gamma`, viscosity `nu`, and `n` bumps validated against `Ω_{epsilon_max}`.
 */
enum TfStatus tf_flow_new(double gamma,
                          double nu,
                          const struct TfBump *bumps,
                          size_t n,
                          double epsilon_max,
                          struct TfFlow **out);

void tf_flow_free(struct TfFlow *flow);

/**
 * `α = γ + ∫ω₀`.
 */
enum TfStatus tf_flow_alpha(const struct TfFlow *flow, double *out);

/**
 * Builds a velocity field of the given kind; `lambda` is used by `Shifted` only.
 */
enum TfStatus tf_field_new(const struct TfFlow *flow,
                           enum TfFieldKind kind,
                           double epsilon,
                           double lambda,
                           struct TfField **out);

void tf_field_free(struct TfField *field);

/**
 * Velocity at `n` points; `u1[i], u2[i]` receive the components at `(x[i], y[i])`.
 */
enum TfStatus tf_field_velocity(const struct TfField *field,
                                const double *x,
                                const double *y,
                                size_t n,
                                double *u1,
                                double *u2);

/**
 * Counterclockwise circulation over the circle of centre `(cx, cy)` and `radius`.
 */
enum TfStatus tf_field_circulation(const struct TfField *field,
                                   double cx,
                                   double cy,
                                   double radius,
                                   size_t n,
                                   double *out);

/**
 * Solver on an `n_sigma × n_theta` log-polar grid, initialized from `u₀^ε` of `flow`.
 */
enum TfStatus tf_solver_new(const struct TfFlow *flow,
                            double epsilon,
                            size_t n_sigma,
                            size_t n_theta,
                            double r_max,
                            double dt,
                            struct TfSolver **out);

void tf_solver_free(struct TfSolver *solver);

/**
 * Advances `steps` time steps; on error the state is left at the last completed step.
 */
enum TfStatus tf_solver_step(struct TfSolver *solver, uint64_t steps);

enum TfStatus tf_solver_time(const struct TfSolver *solver, double *out);

/**
 * `β` and the conservation defect `β + ∫ω - α`.
 */
enum TfStatus tf_solver_circulation(const struct TfSolver *solver, double *beta, double *defect);

/**
 * Velocity of the current state at one physical point.
 */
enum TfStatus tf_solver_velocity(const struct TfSolver *solver,
                                 double x,
                                 double y,
                                 double *u1,
                                 double *u2);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* THINFLOW_H */
