#ifndef VOI_H
#define VOI_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VoiStatus {
  VOI_STATUS_OK = 0,
  VOI_STATUS_NULL_POINTER = 1,
  VOI_STATUS_INVALID_UTF8 = 2,
  VOI_STATUS_INVALID_MODEL = 3,
  VOI_STATUS_INVALID_ARGUMENT = 4,
  VOI_STATUS_UNSUPPORTED = 5,
  VOI_STATUS_NUMERICAL = 6,
  VOI_STATUS_TOO_LARGE = 7,
  VOI_STATUS_IO = 8,
  /**
   * The threshold does not exist at this state.
   */
  VOI_STATUS_NOT_FOUND = 9,
  VOI_STATUS_PANIC = 10,
} VoiStatus;

typedef struct VoiModel VoiModel;

typedef struct VoiPathTable VoiPathTable;

typedef struct VoiRestrictedTable VoiRestrictedTable;

typedef struct VoiSchedule VoiSchedule;

/**
 * Monte Carlo summary: means with 95% half-widths.
 */
typedef struct VoiLossSummary {
  double psi_mean;
  double psi_ci95;
  double rate_mean;
  double rate_ci95;
  double regulation_mean;
  double regulation_ci95;
  /**
   * NaN when the model fixes `theta` only.
   */
  double phi_mean;
  double phi_ci95;
} VoiLossSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *voi_last_error_message(void);

/**
 * Parses and validates a model from JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum VoiStatus voi_model_from_json(const char *json, struct VoiModel **out);

/**
 * # Safety
 * `model` must be a live handle; `horizon` and `state_dim` must be writable.
 */
enum VoiStatus voi_model_dims(const struct VoiModel *model, size_t *horizon, size_t *state_dim);

/**
 * # Safety
 * `model` must be null or a handle from `voi_model_from_json`, freed once.
 */
void voi_model_free(struct VoiModel *model);

/**
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum VoiStatus voi_lqr_solve(const struct VoiModel *model, struct VoiSchedule **out);

/**
 * Copies the gain `L_k` in row-major order into `buf`, which must hold
 * `len >= inputs * states` values.
 *
 * # Safety
 * `schedule` must be a live handle and `buf` valid for `len` writes.
 */
enum VoiStatus voi_schedule_gain(const struct VoiSchedule *schedule,
                                 size_t k,
                                 double *buf,
                                 size_t len);

/**
 * # Safety
 * `schedule` must be null or a handle from `voi_lqr_solve`, freed once.
 */
void voi_schedule_free(struct VoiSchedule *schedule);

/**
 * Solves the age-only value table.
 *
 * # Safety
 * `model` and `schedule` must be live handles for the same model; `out`
 * must be writable.
 */
enum VoiStatus voi_restricted_solve(const struct VoiModel *model,
                                    const struct VoiSchedule *schedule,
                                    struct VoiRestrictedTable **out);

/**
 * `VoI_k(zeta, eta)`; pass `eta = -1` for an infinite controller age.
 *
 * # Safety
 * `table` must be a live handle and `out` writable.
 */
enum VoiStatus voi_restricted_voi(const struct VoiRestrictedTable *table,
                                  size_t k,
                                  size_t zeta,
                                  int64_t eta,
                                  double *out);

/**
 * # Safety
 * `table` must be null or a handle from `voi_restricted_solve`, freed once.
 */
void voi_restricted_free(struct VoiRestrictedTable *table);

/**
 * Solves the mismatch value table of a scalar model. Zero or negative
 * settings select the defaults.
 *
 * # Safety
 * `model` and `schedule` must be live handles for the same model; `out`
 * must be writable.
 */
enum VoiStatus voi_path_solve(const struct VoiModel *model,
                              const struct VoiSchedule *schedule,
                              double e_max,
                              size_t points_per_side,
                              size_t quadrature_order,
                              struct VoiPathTable **out);

/**
 * `VoI_k(zeta, e)`. `clamped` (may be null) reports `|e|` beyond the grid.
 *
 * # Safety
 * `table` must be a live handle and `out` writable.
 */
enum VoiStatus voi_path_voi(const struct VoiPathTable *table,
                            size_t k,
                            size_t zeta,
                            double e,
                            double *out,
                            bool *clamped);

/**
 * Smallest `|e|` at which the policy transmits at `(k, zeta)`; returns
 * `NotFound` when it never transmits on the grid.
 *
 * # Safety
 * `table` must be a live handle and `out` writable.
 */
enum VoiStatus voi_path_threshold(const struct VoiPathTable *table,
                                  size_t k,
                                  size_t zeta,
                                  double *out);

/**
 * # Safety
 * `table` must be null or a handle from `voi_path_solve`, freed once.
 */
void voi_path_free(struct VoiPathTable *table);

/**
 * Monte Carlo evaluation of a policy named as on the command line
 * (`path-voi`, `restricted-voi`, `periodic:N`, ...). VoI policies take their
 * table from `path` or `restricted`; the other may be null.
 *
 * # Safety
 * Non-null handles must be live and solved for `model`; `policy` must be a
 * NUL-terminated string and `out` writable.
 */
enum VoiStatus voi_evaluate(const struct VoiModel *model,
                            const struct VoiSchedule *schedule,
                            const char *policy,
                            const struct VoiPathTable *path,
                            const struct VoiRestrictedTable *restricted,
                            size_t n_runs,
                            uint64_t seed,
                            struct VoiLossSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VOI_H */
