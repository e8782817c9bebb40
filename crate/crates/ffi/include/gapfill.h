#ifndef GAPFILL_H
#define GAPFILL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum GfStatus {
  GF_STATUS_OK = 0,
  GF_STATUS_NULL_ARGUMENT = 1,
  GF_STATUS_INVALID_INPUT = 2,
  GF_STATUS_IO = 3,
  GF_STATUS_LOAD = 4,
  GF_STATUS_INCOMPATIBLE = 5,
  GF_STATUS_INTERNAL = 6,
  GF_STATUS_PANIC = 7,
} GfStatus;

/**
 * Board frame handling for [`gf_place`].
 */
typedef enum GfFrame {
  GF_FRAME_CONSTRAINED = 0,
  GF_FRAME_UNBOUNDED = 1,
} GfFrame;

typedef struct GfBoard GfBoard;

typedef struct GfBundle GfBundle;

typedef struct GfModel GfModel;

typedef struct GfSolution GfSolution;

typedef struct GfTensor GfTensor;

/**
 * Quality of a solved board.
 */
typedef struct GfMetrics {
  double neighbor;
  double direct;
  bool perfect;
} GfMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread; empty after a
 * success. Valid until the next gapfill call on the same thread.
 */
const char *gf_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gf_version(void);

enum GfStatus gf_bundle_load(const char *dir, struct GfBundle **out);

void gf_bundle_free(struct GfBundle *b);

/**
 * Piece count, or 0 for a null bundle.
 */
size_t gf_bundle_len(const struct GfBundle *b);

enum GfStatus gf_bundle_grid(const struct GfBundle *b, size_t *rows, size_t *cols);

enum GfStatus gf_solution_load(const char *path, struct GfSolution **out);

void gf_solution_free(struct GfSolution *s);

enum GfStatus gf_model_load(const char *path, struct GfModel **out);

void gf_model_free(struct GfModel *m);

enum GfStatus gf_score_baseline(const struct GfBundle *b, struct GfTensor **out);

enum GfStatus gf_score_oracle(const struct GfSolution *s, struct GfTensor **out);

/**
 * Fails with `Incompatible`/`InvalidInput` when the model is not a
 * classifier or was trained for another erosion width.
 */
enum GfStatus gf_score_neural(const struct GfModel *m,
                              const struct GfBundle *b,
                              struct GfTensor **out);

enum GfStatus gf_tensor_load(const char *path, struct GfTensor **out);

enum GfStatus gf_tensor_save(const struct GfTensor *t, const char *path);

void gf_tensor_free(struct GfTensor *t);

/**
 * Number of pieces the tensor covers, or 0 for null.
 */
size_t gf_tensor_len(const struct GfTensor *t);

/**
 * Dissimilarity of `y` as the neighbor of `x` in direction `dir`
 * (0 right, 1 down, 2 left, 3 up).
 */
enum GfStatus gf_tensor_get(const struct GfTensor *t,
                            size_t x,
                            size_t y,
                            uint32_t dir,
                            double *value);

/**
 * Greedy placement; `frame` is a [`GfFrame`] value. `tiebreak_seed` is
 * used only when `seeded_ties` is true.
 */
enum GfStatus gf_place(const struct GfTensor *t,
                       uint32_t frame,
                       size_t rows,
                       size_t cols,
                       bool seeded_ties,
                       uint64_t tiebreak_seed,
                       struct GfBoard **out);

enum GfStatus gf_board_load(const char *path, struct GfBoard **out);

enum GfStatus gf_board_save(const struct GfBoard *b, const char *path);

void gf_board_free(struct GfBoard *b);

enum GfStatus gf_board_size(const struct GfBoard *b, size_t *rows, size_t *cols);

/**
 * Piece id at a slot, `-1` when empty.
 */
enum GfStatus gf_board_get(const struct GfBoard *b, size_t row, size_t col, int64_t *piece);

enum GfStatus gf_metrics(const struct GfBoard *b,
                         const struct GfSolution *s,
                         struct GfMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAPFILL_H */
