#ifndef PPS_SSE_H
#define PPS_SSE_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum PpsStatus {
  PPS_STATUS_OK = 0,
  PPS_STATUS_NULL_POINTER = 1,
  PPS_STATUS_INVALID_ARGUMENT = 2,
  PPS_STATUS_NUMERICAL = 3,
  PPS_STATUS_BUFFER_TOO_SMALL = 4,
  PPS_STATUS_PANIC = 5,
} PpsStatus;

typedef enum PpsRgVerdict {
  PPS_RG_VERDICT_RELEVANT_G2 = 0,
  PPS_RG_VERDICT_IRRELEVANT_G2 = 1,
  PPS_RG_VERDICT_DECOUPLED = 2,
  PPS_RG_VERDICT_UNDETERMINED = 3,
} PpsRgVerdict;

typedef enum PpsObservable {
  PPS_OBSERVABLE_HALF_CUT = 0,
  PPS_OBSERVABLE_TEE = 1,
  PPS_OBSERVABLE_FULL_SYSTEM = 2,
} PpsObservable;

/**
 * Opaque trajectory configuration.
 */
typedef struct PpsConfig PpsConfig;

/**
 * Opaque ensemble result.
 */
typedef struct PpsEnsemble PpsEnsemble;

/**
 * Opaque Gaussian state.
 */
typedef struct PpsState PpsState;

typedef struct PpsCollapseResult {
  double alpha_crit;
  double nu;
  double nu_err_lo;
  double nu_err_hi;
  double epsilon_min;
} PpsCollapseResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated).
 * `len` receives the required size including the terminator.
 *
 * # Safety
 * `buf` must point to `cap` writable bytes or be null with `cap == 0`.
 */
enum PpsStatus pps_last_error(char *buf, size_t cap, size_t *len);

/**
 * Crate version as a static NUL-terminated string.
 */
const char *pps_version(void);

/**
 * Fermionic vacuum of `l` sites.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PpsStatus pps_state_vacuum(size_t l, struct PpsState **out);

/**
 * # Safety
 * `state` must come from this library and not be used afterwards.
 */
void pps_state_free(struct PpsState *state);

/**
 * # Safety
 * Pointers must be valid.
 */
enum PpsStatus pps_state_len(const struct PpsState *state, size_t *out);

/**
 * Von Neumann entropy (bits) of the sites `sites[0..n]`.
 *
 * # Safety
 * `sites` must point to `n` entries; other pointers must be valid.
 */
enum PpsStatus pps_state_entropy(const struct PpsState *state,
                                 const size_t *sites,
                                 size_t n,
                                 double *out);

/**
 * Topological entanglement entropy (bits) on the four quarters.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PpsStatus pps_state_tee(const struct PpsState *state, double *out);

/**
 * Default trajectory configuration.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PpsStatus pps_config_default(struct PpsConfig **out);

/**
 * Configuration from TOML text with the trajectory fields at top level.
 *
 * # Safety
 * `toml_text` must be a NUL-terminated string; `out` must be valid.
 */
enum PpsStatus pps_config_from_toml(const char *toml_text, struct PpsConfig **out);

/**
 * # Safety
 * `cfg` must come from this library and not be used afterwards.
 */
void pps_config_free(struct PpsConfig *cfg);

/**
 * Sets size, trajectory count and seed.
 *
 * # Safety
 * `cfg` must be valid.
 */
enum PpsStatus pps_config_set_run(struct PpsConfig *cfg, size_t l, size_t n_traj, uint64_t seed);

/**
 * Sets the physical rates and drifts.
 *
 * # Safety
 * `cfg` must be valid.
 */
enum PpsStatus pps_config_set_rates(struct PpsConfig *cfg,
                                    double j2,
                                    double gamma,
                                    double alpha,
                                    double b_gamma,
                                    double b_alpha);

/**
 * Sets dt, burn-in (negative = automatic), sampling horizon and interval.
 *
 * # Safety
 * `cfg` must be valid.
 */
enum PpsStatus pps_config_set_times(struct PpsConfig *cfg,
                                    double dt,
                                    double t_burn,
                                    double t_sample,
                                    double sample_interval);

/**
 * # Safety
 * `cfg` must be valid.
 */
enum PpsStatus pps_config_set_tee(struct PpsConfig *cfg, bool enabled);

/**
 * Runs the ensemble described by `cfg`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PpsStatus pps_run_ensemble(const struct PpsConfig *cfg, struct PpsEnsemble **out);

/**
 * # Safety
 * `ens` must come from this library and not be used afterwards.
 */
void pps_ensemble_free(struct PpsEnsemble *ens);

/**
 * Steady-state mean and standard error of one observable; `which` takes
 * a `PpsObservable` value.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PpsStatus pps_ensemble_steady(const struct PpsEnsemble *ens,
                                   uint32_t which,
                                   double *mean,
                                   double *stderr);

/**
 * Cutoff r_c realizing PPS strength b at the reference expectation value.
 *
 * # Safety
 * `out` must be valid.
 */
enum PpsStatus pps_solve_rc_from_b(double b,
                                   double dt,
                                   double gamma,
                                   double expectation,
                                   double *out);

/**
 * Two-sample Kolmogorov-Smirnov statistic and p-value.
 *
 * # Safety
 * `a` and `b` must point to `na` and `nb` values.
 */
enum PpsStatus pps_ks2(const double *a,
                       size_t na,
                       const double *b,
                       size_t nb,
                       double *statistic,
                       double *p_value);

/**
 * RG verdict at (J^2/B, gamma/B, Delta) with default controls.
 *
 * # Safety
 * `out` must be valid.
 */
enum PpsStatus pps_rg_flow_point(double j2, double gamma, double delta, enum PpsRgVerdict *out);

/**
 * Data-collapse fit of `n` records (sizes, couplings, S_TEE, stderr) over
 * the given windows with default grid controls.
 *
 * # Safety
 * Array pointers must point to `n` values; `out` must be valid.
 */
enum PpsStatus pps_fit_collapse(const size_t *sizes,
                                const double *alpha,
                                const double *s_tee,
                                const double *stderr,
                                size_t n,
                                double alpha_lo,
                                double alpha_hi,
                                double nu_lo,
                                double nu_hi,
                                struct PpsCollapseResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PPS_SSE_H */
