#ifndef RBL_H
#define RBL_H

/* Generated by cbindgen from the rbl-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum RblStatus {
  RBL_STATUS_OK = 0,
  RBL_STATUS_NULL_POINTER = 1,
  RBL_STATUS_INVALID_ARGUMENT = 2,
  RBL_STATUS_DIMENSION_MISMATCH = 3,
  RBL_STATUS_TOO_FEW_OBSERVATIONS = 4,
  RBL_STATUS_DEGENERATE = 5,
  RBL_STATUS_CONFIG = 6,
  RBL_STATUS_IO = 7,
  RBL_STATUS_PANIC = 8,
} RblStatus;

/**
 * Stage-2 weighting of [`rbl_localize_two_stage`].
 */
typedef enum RblWeighting {
  RBL_WEIGHTING_INVERSE_VARIANCE = 0,
  RBL_WEIGHTING_UNIFORM = 1,
} RblWeighting;

/**
 * Opaque anchor set.
 */
typedef struct RblAnchors RblAnchors;

/**
 * Opaque body layout.
 */
typedef struct RblConformation RblConformation;

/**
 * Opaque pose estimate.
 */
typedef struct RblPose RblPose;

/**
 * Opaque experiment result table.
 */
typedef struct RblResultTable RblResultTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, empty when none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *rbl_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rbl_version(void);

/**
 * Body layout from `num_nodes` points of dimension `dim` (2 or 3).
 *
 * # Safety
 * `coords` points to `dim * num_nodes` doubles; `out` is writable.
 */
enum RblStatus rbl_conformation_new(size_t dim,
                                    const double *coords,
                                    size_t num_nodes,
                                    struct RblConformation **out);

/**
 * # Safety
 * `conf` is null or came from [`rbl_conformation_new`] and is not used afterwards.
 */
void rbl_conformation_free(struct RblConformation *conf);

/**
 * Anchor set from `num_anchors` points of dimension `dim`.
 *
 * # Safety
 * `positions` points to `dim * num_anchors` doubles; `out` is writable.
 */
enum RblStatus rbl_anchors_new(size_t dim,
                               const double *positions,
                               size_t num_anchors,
                               struct RblAnchors **out);

/**
 * # Safety
 * `anchors` is null or came from [`rbl_anchors_new`] and is not used afterwards.
 */
void rbl_anchors_free(struct RblAnchors *anchors);

/**
 * Two-stage pose estimate from an M x K range matrix (column-major, one
 * column per node, NaN where missing).
 *
 * # Safety
 * Handles are live; `ranges` points to `M * K` doubles; `out` is writable.
 */
enum RblStatus rbl_localize_two_stage(const struct RblAnchors *anchors,
                                      const struct RblConformation *conf,
                                      const double *ranges,
                                      double noise_sigma,
                                      enum RblWeighting weighting,
                                      struct RblPose **out);

/**
 * Dimension of a pose, 0 for a null handle.
 *
 * # Safety
 * `pose` is null or live.
 */
size_t rbl_pose_dim(const struct RblPose *pose);

/**
 * Copy the D x D rotation (column-major) into `out`, which holds `len` doubles.
 *
 * # Safety
 * `pose` is live; `out` points to `len` writable doubles.
 */
enum RblStatus rbl_pose_rotation(const struct RblPose *pose, double *out, size_t len);

/**
 * Copy the translation (D doubles) into `out`.
 *
 * # Safety
 * `pose` is live; `out` points to `len` writable doubles.
 */
enum RblStatus rbl_pose_translation(const struct RblPose *pose, double *out, size_t len);

/**
 * # Safety
 * `pose` is null or came from this library and is not used afterwards.
 */
void rbl_pose_free(struct RblPose *pose);

/**
 * Frame potential of `count` unit vectors of dimension `dim`.
 *
 * # Safety
 * `directions` points to `dim * count` doubles; `out` is writable.
 */
enum RblStatus rbl_frame_potential(size_t dim, const double *directions, size_t count, double *out);

/**
 * Anchor positions around `center` minimizing the frame potential. Writes
 * `dim * num_anchors` doubles to `positions` and the achieved potential to
 * `potential`.
 *
 * # Safety
 * `center` points to `dim` doubles, `positions` to `dim * num_anchors`
 * writable doubles; `potential` is writable.
 */
enum RblStatus rbl_optimize_placement(size_t dim,
                                      size_t num_anchors,
                                      const double *center,
                                      double radius,
                                      uint64_t seed,
                                      double *positions,
                                      double *potential);

/**
 * Complete an n x n distance matrix (NaN where unknown) whose points live in
 * `dim` dimensions; the first `split` points form one block. The completed
 * distances are written to `out` (n * n doubles).
 *
 * # Safety
 * `distances` points to `n * n` doubles and `out` to `n * n` writable doubles.
 */
enum RblStatus rbl_complete_edm(const double *distances,
                                size_t n,
                                size_t dim,
                                size_t split,
                                double *out);

/**
 * Run an experiment described by a JSON config string. Relative file paths
 * in the config resolve against the working directory.
 *
 * # Safety
 * `config_json` is a NUL-terminated string; `out` is writable.
 */
enum RblStatus rbl_run_experiment(const char *config_json, struct RblResultTable **out);

/**
 * Number of rows, 0 for a null handle.
 *
 * # Safety
 * `table` is null or live.
 */
size_t rbl_result_table_rows(const struct RblResultTable *table);

/**
 * The table as CSV text; release with [`rbl_string_free`].
 *
 * # Safety
 * `table` is live; `out` is writable.
 */
enum RblStatus rbl_result_table_csv(const struct RblResultTable *table, char **out);

/**
 * # Safety
 * `table` is null or came from [`rbl_run_experiment`] and is not used afterwards.
 */
void rbl_result_table_free(struct RblResultTable *table);

/**
 * # Safety
 * `s` is null or a string returned by this library, not yet freed.
 */
void rbl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RBL_H */
