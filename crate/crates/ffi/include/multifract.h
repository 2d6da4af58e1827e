#ifndef MULTIFRACT_H
#define MULTIFRACT_H

/* generated by cbindgen; do not edit by hand */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum MfStatus {
  MF_STATUS_OK = 0,
  MF_STATUS_NULL_ARGUMENT = 1,
  MF_STATUS_INVALID_CONFIG = 2,
  MF_STATUS_CONVERGENCE = 3,
  MF_STATUS_DIVERGENCE = 4,
  MF_STATUS_RUNTIME = 5,
} MfStatus;

/**
 * Opaque interval map.
 */
typedef struct MfMap MfMap;

/**
 * Opaque potential.
 */
typedef struct MfPotential MfPotential;

/**
 * Opaque inducing scheme.
 */
typedef struct MfScheme MfScheme;

/**
 * Opaque truncated extension.
 */
typedef struct MfTower MfTower;

/**
 * Opaque sampled temperature curve.
 */
typedef struct MfTqCurve MfTqCurve;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent error on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *mf_last_error_message(void);

/**
 * Build a map from its JSON descriptor, e.g.
 * `{"family":"quadratic","lambda":3.9}`. Returns null on error.
 */
struct MfMap *mf_map_new_json(const char *json);

/**
 * # Safety
 * `map` must come from `mf_map_new_json` and not already be freed.
 */
void mf_map_free(struct MfMap *map);

/**
 * `f(x)` through the C boundary.
 */
enum MfStatus mf_map_eval(const struct MfMap *map, double x, double *out);

/**
 * Topological entropy estimate from lap-count growth.
 */
enum MfStatus mf_map_entropy(const struct MfMap *map, uintptr_t n_max, double *out);

/**
 * Build a potential from its JSON descriptor, e.g.
 * `{"kind":"bernoulli","p":0.3}`. Returns null on error.
 */
struct MfPotential *mf_potential_new_json(const char *json);

/**
 * # Safety
 * `p` must come from `mf_potential_new_json` and not already be freed.
 */
void mf_potential_free(struct MfPotential *p);

/**
 * Truncated extension of the map.
 */
struct MfTower *mf_tower_build(const struct MfMap *map, uintptr_t level_cap, double min_width);

/**
 * # Safety
 * `tower` must come from `mf_tower_build` and not already be freed.
 */
void mf_tower_free(struct MfTower *tower);

uintptr_t mf_tower_domain_count(const struct MfTower *tower);

/**
 * First-return scheme over a cylinder base. `scheme_type` is `'A'` or
 * `'B'`; the base cylinder is named by partition depth and index, with
 * depth 0 meaning the whole interval (type A only). Returns null on error.
 */
struct MfScheme *mf_scheme_build(const struct MfMap *map,
                                 const struct MfTower *tower,
                                 char scheme_type,
                                 uintptr_t base_depth,
                                 uintptr_t base_index,
                                 double delta,
                                 uintptr_t tau_cap);

/**
 * # Safety
 * `scheme` must come from `mf_scheme_build` and not already be freed.
 */
void mf_scheme_free(struct MfScheme *scheme);

uintptr_t mf_scheme_branch_count(const struct MfScheme *scheme);

double mf_scheme_coverage(const struct MfScheme *scheme);

/**
 * Temperature curve `T(q)` over a uniform grid, solved on the scheme's
 * word sums. Returns null on error.
 */
struct MfTqCurve *mf_tq_curve_compute(const struct MfMap *map,
                                      const struct MfScheme *scheme,
                                      const struct MfPotential *potential,
                                      double q_min,
                                      double q_max,
                                      uintptr_t steps,
                                      uintptr_t word_depth,
                                      uintptr_t branch_cap);

/**
 * # Safety
 * `curve` must come from `mf_tq_curve_compute` and not already be freed.
 */
void mf_tq_curve_free(struct MfTqCurve *curve);

uintptr_t mf_tq_curve_len(const struct MfTqCurve *curve);

/**
 * Read one sample; `t_out`/`alpha_out` become NaN where the solve failed
 * or no derivative neighbour exists.
 */
enum MfStatus mf_tq_curve_get(const struct MfTqCurve *curve,
                              uintptr_t index,
                              double *q_out,
                              double *t_out,
                              double *alpha_out,
                              bool *converged_out);

/**
 * Run the oracle acceptance suite; returns `Ok` when every criterion
 * passes, `Runtime` otherwise.
 */
enum MfStatus mf_verify_oracles(uint64_t seed);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* MULTIFRACT_H */
