#ifndef IMS_FFI_H
#define IMS_FFI_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ImsStatus {
  IMS_STATUS_OK = 0,
  IMS_STATUS_NULL_POINTER = 1,
  IMS_STATUS_INVALID_ARGUMENT = 2,
  IMS_STATUS_INVALID_GRAPH = 3,
  IMS_STATUS_MODEL_MISMATCH = 4,
  IMS_STATUS_TOO_LARGE = 5,
  IMS_STATUS_DEGENERATE = 6,
  IMS_STATUS_IO = 7,
  IMS_STATUS_FORMAT = 8,
  IMS_STATUS_PANIC = 9,
} ImsStatus;

typedef enum ImsModel {
  IMS_MODEL_IC = 0,
  IMS_MODEL_LT = 1,
} ImsModel;

/**
 * Per-pair estimate flag, as returned by [`ims_report_flag`].
 */
typedef enum ImsFlag {
  IMS_FLAG_OK = 0,
  IMS_FLAG_CLAMPED_LOW = 1,
  IMS_FLAG_CLAMPED_HIGH = 2,
  IMS_FLAG_UNDEFINED_DENOMINATOR = 3,
  /**
   * Diagonal entries are never estimated.
   */
  IMS_FLAG_NOT_ESTIMATED = 4,
} ImsFlag;

typedef enum ImsPipeline {
  IMS_PIPELINE_IC_A1 = 0,
  IMS_PIPELINE_IC_A2 = 1,
  IMS_PIPELINE_IC_A2_EPS = 2,
  IMS_PIPELINE_LT = 3,
} ImsPipeline;

typedef struct ImsDataset ImsDataset;

typedef struct ImsGraph ImsGraph;

typedef struct ImsReport ImsReport;

typedef struct ImsSeedDistribution ImsSeedDistribution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *ims_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ims_version(void);

/**
 * Builds a graph from `m` edges `(src[i], dst[i], param[i])`.
 *
 * # Safety
 * Each array must hold `m` readable elements; `out_graph` must be writable.
 */
enum ImsStatus ims_graph_new(size_t n,
                             enum ImsModel model,
                             const size_t *src,
                             const size_t *dst,
                             const double *param,
                             size_t m,
                             struct ImsGraph **out_graph);

/**
 * Parses a graph from its JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out_graph` must be writable.
 */
enum ImsStatus ims_graph_from_json(const char *json, struct ImsGraph **out_graph);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out_graph` must be writable.
 */
enum ImsStatus ims_graph_load(const char *path, struct ImsGraph **out_graph);

/**
 * Number of nodes, or 0 for a null handle.
 *
 * # Safety
 * `graph` must be null or a live handle.
 */
size_t ims_graph_node_count(const struct ImsGraph *graph);

/**
 * # Safety
 * `graph` must be null or a handle not yet freed.
 */
void ims_graph_free(struct ImsGraph *graph);

/**
 * # Safety
 * `q` must hold `n` readable doubles; `out_dist` must be writable.
 */
enum ImsStatus ims_seed_distribution_new(const double *q,
                                         size_t n,
                                         struct ImsSeedDistribution **out_dist);

/**
 * # Safety
 * `dist` must be null or a handle not yet freed.
 */
void ims_seed_distribution_free(struct ImsSeedDistribution *dist);

/**
 * Generates `t` cascades; identical arguments give identical datasets.
 *
 * # Safety
 * Handles must be live; `out_dataset` must be writable.
 */
enum ImsStatus ims_dataset_generate(const struct ImsGraph *graph,
                                    const struct ImsSeedDistribution *dist,
                                    size_t t,
                                    uint64_t rng_seed,
                                    struct ImsDataset **out_dataset);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out_dataset` must be writable.
 */
enum ImsStatus ims_dataset_load(const char *path, struct ImsDataset **out_dataset);

/**
 * # Safety
 * `dataset` must be live; `path` must be a NUL-terminated string.
 */
enum ImsStatus ims_dataset_save(const struct ImsDataset *dataset, const char *path);

/**
 * Number of cascades, or 0 for a null handle.
 *
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t ims_dataset_len(const struct ImsDataset *dataset);

/**
 * # Safety
 * `dataset` must be null or a handle not yet freed.
 */
void ims_dataset_free(struct ImsDataset *dataset);

/**
 * Estimates every edge parameter with the estimator of the dataset's model.
 *
 * # Safety
 * `dataset` must be live; `out_report` must be writable.
 */
enum ImsStatus ims_estimate(const struct ImsDataset *dataset, struct ImsReport **out_report);

/**
 * # Safety
 * `report` must be live; `out_value` must be writable.
 */
enum ImsStatus ims_report_param(const struct ImsReport *report,
                                size_t u,
                                size_t v,
                                double *out_value);

/**
 * # Safety
 * `report` must be live; `out_flag` must be writable.
 */
enum ImsStatus ims_report_flag(const struct ImsReport *report,
                               size_t u,
                               size_t v,
                               enum ImsFlag *out_flag);

/**
 * # Safety
 * `report` must be null or a handle not yet freed.
 */
void ims_report_free(struct ImsReport *report);

/**
 * Exact one-step activation probability of `v`.
 *
 * # Safety
 * Handles must be live; `out_value` must be writable.
 */
enum ImsStatus ims_exact_ap(const struct ImsGraph *graph,
                            const struct ImsSeedDistribution *dist,
                            size_t v,
                            double *out_value);

/**
 * Exact expected spread of a seed set (small graphs only).
 *
 * # Safety
 * `graph` must be live; `seeds` must hold `len` readable elements.
 */
enum ImsStatus ims_exact_sigma(const struct ImsGraph *graph,
                               const size_t *seeds,
                               size_t len,
                               double *out_value);

/**
 * Greedy seed selection. `out_seeds` must have room for `k` entries; the
 * number written is stored in `out_len`.
 *
 * # Safety
 * `graph` must be live; `out_seeds` must hold `k` writable elements.
 */
enum ImsStatus ims_greedy(const struct ImsGraph *graph,
                          size_t k,
                          size_t num_sims,
                          uint64_t rng_seed,
                          size_t *out_seeds,
                          size_t *out_len);

/**
 * Runs a sample-based pipeline with greedy selection. `t_prime = 0` uses half
 * the dataset for partitioning; `max_in_degree = 0` means `n - 1`.
 * `out_seeds` must have room for `capacity` entries.
 *
 * # Safety
 * `dataset` must be live; `out_seeds` must hold `capacity` writable elements.
 */
enum ImsStatus ims_run_pipeline(const struct ImsDataset *dataset,
                                enum ImsPipeline pipeline,
                                size_t k,
                                double epsilon,
                                double delta,
                                size_t t_prime,
                                size_t max_in_degree,
                                size_t num_sims,
                                uint64_t rng_seed,
                                size_t *out_seeds,
                                size_t capacity,
                                size_t *out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IMS_FFI_H */
