/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef FEDPROG_H
#define FEDPROG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum FedprogStatus {
  FEDPROG_STATUS_OK = 0,
  FEDPROG_STATUS_NULL_POINTER = 1,
  FEDPROG_STATUS_INVALID_UTF8 = 2,
  FEDPROG_STATUS_SHAPE = 3,
  FEDPROG_STATUS_CONTRACT = 4,
  FEDPROG_STATUS_NUMERIC = 5,
  FEDPROG_STATUS_DOMAIN = 6,
  FEDPROG_STATUS_GENERATION = 7,
  FEDPROG_STATUS_PARSE = 8,
  FEDPROG_STATUS_CONFIG = 9,
  FEDPROG_STATUS_IO = 10,
  FEDPROG_STATUS_NOT_FOUND = 11,
  FEDPROG_STATUS_PANIC = 12,
} FedprogStatus;

/**
 * Finished experiment (opaque).
 */
typedef struct FedprogExperiment FedprogExperiment;

/**
 * Decoded model update (opaque).
 */
typedef struct FedprogUpdate FedprogUpdate;

/**
 * Cost parameters of the replacement policies.
 */
typedef struct FedprogEconomics {
  /**
   * Cost of a preventive replacement.
   */
  double c_r;
  /**
   * Cost of a corrective replacement.
   */
  double c_f;
  /**
   * Periods between a replacement request and the crew's arrival.
   */
  uint32_t t_c;
  /**
   * Periods a replacement takes.
   */
  uint32_t t_m;
} FedprogEconomics;

/**
 * Byte buffer owned by the library; release with [`fedprog_buffer_free`].
 */
typedef struct FedprogBuffer {
  uint8_t *data;
  size_t len;
} FedprogBuffer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if it succeeded.
 * The pointer stays valid until the next call on the same thread.
 */
const char *fedprog_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fedprog_version(void);

/**
 * Default cost parameters.
 */
struct FedprogEconomics fedprog_economics_default(void);

/**
 * Long-run cost rate of one battery. A negative `t_star` means the policy
 * never triggered. `out_preventive` receives whether the replacement was
 * preventive.
 *
 * # Safety
 * `econ`, `out_cost` and `out_preventive` must be valid pointers.
 */
enum FedprogStatus fedprog_cost_rate(int64_t t_star,
                                     uint32_t t_f,
                                     const struct FedprogEconomics *econ,
                                     double *out_cost,
                                     bool *out_preventive);

/**
 * Unused life of a preventive replacement; a contract error otherwise.
 *
 * # Safety
 * `econ` and `out` must be valid pointers.
 */
enum FedprogStatus fedprog_unused_life(uint32_t t_star,
                                       uint32_t t_f,
                                       const struct FedprogEconomics *econ,
                                       int64_t *out);

/**
 * Unavailable periods of one battery. A negative `t_star` means no trigger.
 *
 * # Safety
 * `econ` and `out` must be valid pointers.
 */
enum FedprogStatus fedprog_unavailable_days(int64_t t_star,
                                            uint32_t t_f,
                                            const struct FedprogEconomics *econ,
                                            uint32_t *out);

/**
 * Fleet-wide periodic trigger age minimizing the summed cost rate.
 *
 * # Safety
 * The arrays must hold at least the given number of elements; `econ` and
 * `out` must be valid pointers.
 */
enum FedprogStatus fedprog_optimal_periodic_trigger(const uint32_t *failure_times,
                                                    size_t n_failure_times,
                                                    const uint32_t *candidates,
                                                    size_t n_candidates,
                                                    const struct FedprogEconomics *econ,
                                                    uint32_t *out);

/**
 * Decodes a wire-format model update.
 *
 * # Safety
 * `bytes` must hold `len` bytes; `out` must be a valid pointer.
 */
enum FedprogStatus fedprog_update_decode(const uint8_t *bytes,
                                         size_t len,
                                         struct FedprogUpdate **out);

/**
 * Encodes an update back to its wire format.
 *
 * # Safety
 * `update` must be a live handle; `out` must be a valid pointer.
 */
enum FedprogStatus fedprog_update_encode(const struct FedprogUpdate *update,
                                         struct FedprogBuffer *out);

/**
 * Client id of an update; valid while the handle lives.
 *
 * # Safety
 * `update` must be a live handle or null.
 */
const char *fedprog_update_client_id(const struct FedprogUpdate *update);

/**
 * Number of rows the client trained on; 0 for a null handle.
 *
 * # Safety
 * `update` must be a live handle or null.
 */
uint64_t fedprog_update_sample_count(const struct FedprogUpdate *update);

/**
 * Number of weight snapshots in an update; 0 for a null handle.
 *
 * # Safety
 * `update` must be a live handle or null.
 */
size_t fedprog_update_snapshot_count(const struct FedprogUpdate *update);

/**
 * Borrows the flat values of snapshot `index`; valid while the handle lives.
 *
 * # Safety
 * `update` must be a live handle; `out_values` and `out_len` must be valid.
 */
enum FedprogStatus fedprog_update_values(const struct FedprogUpdate *update,
                                         size_t index,
                                         const double **out_values,
                                         size_t *out_len);

/**
 * Unweighted average of `n` updates, summed in client-id order. The result
 * carries the first update's id and the total sample count.
 *
 * # Safety
 * `updates` must hold `n` live handles; `out` must be a valid pointer.
 */
enum FedprogStatus fedprog_fed_avg(const struct FedprogUpdate *const *updates,
                                   size_t n,
                                   struct FedprogUpdate **out);

/**
 * Releases an update handle. Null is ignored.
 *
 * # Safety
 * `update` must come from this library and not be used afterwards.
 */
void fedprog_update_free(struct FedprogUpdate *update);

/**
 * Releases a buffer's storage and resets it. Null or empty buffers are ignored.
 *
 * # Safety
 * `buffer` must come from this library.
 */
void fedprog_buffer_free(struct FedprogBuffer *buffer);

/**
 * Loads a TOML config file and runs every configured variant.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string; `out` must be valid.
 */
enum FedprogStatus fedprog_experiment_run(const char *config_path, struct FedprogExperiment **out);

/**
 * Mean test cost rate of the periodic baseline.
 *
 * # Safety
 * `experiment` must be a live handle; `out` must be valid.
 */
enum FedprogStatus fedprog_experiment_periodic_cost_rate(const struct FedprogExperiment *experiment,
                                                         double *out);

/**
 * Mean test cost rate of a variant at its selected threshold.
 *
 * # Safety
 * `experiment` must be a live handle, `variant` a NUL-terminated string,
 * and `out` valid.
 */
enum FedprogStatus fedprog_experiment_cost_rate(const struct FedprogExperiment *experiment,
                                                const char *variant,
                                                double *out);

/**
 * Writes reports, models, message logs and the comparison table to `dir`.
 *
 * # Safety
 * `experiment` must be a live handle and `dir` a NUL-terminated string.
 */
enum FedprogStatus fedprog_experiment_write(const struct FedprogExperiment *experiment,
                                            const char *dir);

/**
 * Releases an experiment handle. Null is ignored.
 *
 * # Safety
 * `experiment` must come from this library and not be used afterwards.
 */
void fedprog_experiment_free(struct FedprogExperiment *experiment);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FEDPROG_H */
