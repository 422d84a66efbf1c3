/* C interface for the chlab simulation and asymptotics library. */

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Mobility variant selector for [`chlab_config_set_mobility`].
 */
typedef enum ChlabMobility {
  CHLAB_MOBILITY_PLAIN = 0,
  CHLAB_MOBILITY_TRUNCATED = 1,
  CHLAB_MOBILITY_ABSOLUTE = 2,
} ChlabMobility;

/**
 * Call outcome. Nonzero values follow the stages of the pipeline (and the
 * CLI exit codes): invalid input, simulation failure, asymptotic
 * construction failure, cross-validation failure.
 */
typedef enum ChlabStatus {
  CHLAB_STATUS_OK = 0,
  CHLAB_STATUS_INVALID_ARGUMENT = 1,
  CHLAB_STATUS_SOLVER = 2,
  CHLAB_STATUS_ASYMPTOTICS = 3,
  CHLAB_STATUS_VALIDATION = 4,
  /**
   * A required pointer argument was null.
   */
  CHLAB_STATUS_NULL_POINTER = 5,
  /**
   * The callee panicked; the handle state is unspecified but not leaked.
   */
  CHLAB_STATUS_INTERNAL = 6,
} ChlabStatus;

/**
 * Opaque matched-asymptotic composite (owns its annular and inner parts).
 */
typedef struct ChlabComposite ChlabComposite;

/**
 * Opaque run configuration.
 */
typedef struct ChlabConfig ChlabConfig;

/**
 * Opaque finished simulation.
 */
typedef struct ChlabRun ChlabRun;

/**
 * One diagnostics row of a finished run.
 */
typedef struct ChlabDiagRow {
  double t;
  double mass;
  double energy;
  double dissipation;
  double v0;
  double rbar;
  double vmin;
  double d2v;
} ChlabDiagRow;

/**
 * Matching constants of a composite handle.
 */
typedef struct ChlabMatchingConstants {
  double r_star;
  double mu0;
  double b2;
  double kappa;
  double c2;
  double a1;
  double flux_j;
  double scale_c;
  double scale_d;
  double alpha;
  double beta;
  double gamma;
} ChlabMatchingConstants;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Description of the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *chlab_last_error_message(void);

/**
 * New configuration with the library defaults. Never null.
 */
struct ChlabConfig *chlab_config_new(void);

/**
 * Parse a configuration from a TOML document.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum ChlabStatus chlab_config_from_toml(const char *text, struct ChlabConfig **out);

/**
 * Set the mobility degeneracy exponent `n >= 0`.
 *
 * # Safety
 * `cfg` must be a live pointer from a `chlab_config_*` constructor.
 */
enum ChlabStatus chlab_config_set_n(struct ChlabConfig *cfg, double value);

/**
 * Set the interface-width parameter `eps > 0`.
 *
 * # Safety
 * `cfg` must be a live pointer from a `chlab_config_*` constructor.
 */
enum ChlabStatus chlab_config_set_epsilon(struct ChlabConfig *cfg, double value);

/**
 * Set the number of finite-volume cells (>= 16).
 *
 * # Safety
 * `cfg` must be a live pointer from a `chlab_config_*` constructor.
 */
enum ChlabStatus chlab_config_set_cells(struct ChlabConfig *cfg, size_t value);

/**
 * Set the integration horizon `t_end > 0`.
 *
 * # Safety
 * `cfg` must be a live pointer from a `chlab_config_*` constructor.
 */
enum ChlabStatus chlab_config_set_t_end(struct ChlabConfig *cfg, double value);

/**
 * Select the mobility variant.
 *
 * # Safety
 * `cfg` must be a live pointer from a `chlab_config_*` constructor.
 */
enum ChlabStatus chlab_config_set_mobility(struct ChlabConfig *cfg, enum ChlabMobility mobility);

/**
 * Release a configuration (null is a no-op).
 *
 * # Safety
 * `cfg` must be null or an owned pointer not freed before.
 */
void chlab_config_free(struct ChlabConfig *cfg);

/**
 * Run a simulation to its horizon (or touchdown halt).
 *
 * # Safety
 * `cfg` must be a live config pointer; `out` must be valid.
 */
enum ChlabStatus chlab_simulate(const struct ChlabConfig *cfg, struct ChlabRun **out);

/**
 * Final time reached by the run (NaN for a null handle).
 *
 * # Safety
 * `run` must be null or a live run pointer.
 */
double chlab_run_t_final(const struct ChlabRun *run);

/**
 * Number of radial nodes of the run's profiles (0 for a null handle).
 *
 * # Safety
 * `run` must be null or a live run pointer.
 */
size_t chlab_run_num_nodes(const struct ChlabRun *run);

/**
 * Copy the final profile into caller buffers of exactly `len` elements
 * (`len` must equal `chlab_run_num_nodes`). `v = 1 - u` is the distance
 * to the degenerate value.
 *
 * # Safety
 * `run` must be live; `r_out` and `v_out` must hold `len` doubles.
 */
enum ChlabStatus chlab_run_final_profile(const struct ChlabRun *run,
                                         double *r_out,
                                         double *v_out,
                                         size_t len);

/**
 * Number of diagnostics rows recorded by the run.
 *
 * # Safety
 * `run` must be null or a live run pointer.
 */
size_t chlab_run_num_diagnostics(const struct ChlabRun *run);

/**
 * Copy diagnostics row `index` (time, invariants, extrema).
 *
 * # Safety
 * `run` must be live; `out` must point to a `ChlabDiagRow`.
 */
enum ChlabStatus chlab_run_diagnostics_row(const struct ChlabRun *run,
                                           size_t index,
                                           struct ChlabDiagRow *out);

/**
 * Whether the run halted on a touchdown event; if so, report it.
 *
 * # Safety
 * `run` must be live; the out-pointers must be valid.
 */
enum ChlabStatus chlab_run_touchdown(const struct ChlabRun *run,
                                     bool *has_event,
                                     double *time,
                                     double *radius);

/**
 * Write the deterministic artifact set into a directory.
 *
 * # Safety
 * `run` must be live; `dir` must be a NUL-terminated path.
 */
enum ChlabStatus chlab_run_write_artifacts(const struct ChlabRun *run, const char *dir);

/**
 * Release a run (null is a no-op).
 *
 * # Safety
 * `run` must be null or an owned pointer not freed before.
 */
void chlab_run_free(struct ChlabRun *run);

/**
 * Exact decay exponents for mobility exponent `n > 2`.
 *
 * # Safety
 * The out-pointers must be valid.
 */
enum ChlabStatus chlab_exponents(double n, double *alpha, double *beta, double *gamma);

/**
 * Curvatures of the self-similar touchdown profile: at the minimizer and
 * in the far field.
 *
 * # Safety
 * The out-pointers must be valid.
 */
enum ChlabStatus chlab_touchdown_curvatures(double n, double *kappa, double *kappa_far);

/**
 * Build the matched-asymptotic composite for `(n, eps, m0)`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ChlabStatus chlab_composite_new(double n,
                                     double epsilon,
                                     double m0,
                                     struct ChlabComposite **out);

/**
 * Copy out the matching constants and exponents.
 *
 * # Safety
 * `handle` must be live; `out` must point to a `ChlabMatchingConstants`.
 */
enum ChlabStatus chlab_composite_constants(const struct ChlabComposite *handle,
                                           struct ChlabMatchingConstants *out);

/**
 * Evaluate the composite `v(r, t)` for `t > 0`, `0 <= r <= 1`.
 *
 * # Safety
 * `handle` must be live; `out` must be valid.
 */
enum ChlabStatus chlab_composite_eval(const struct ChlabComposite *handle,
                                      double t,
                                      double r,
                                      double *out);

/**
 * Release a composite (null is a no-op).
 *
 * # Safety
 * `handle` must be null or an owned pointer not freed before.
 */
void chlab_composite_free(struct ChlabComposite *handle);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
