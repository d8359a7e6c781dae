#ifndef ADSEL_H
#define ADSEL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AdselAblation {
  ADSEL_ABLATION_FULL = 0,
  ADSEL_ABLATION_NO_DUAL_SE = 1,
  ADSEL_ABLATION_NO_GFRL = 2,
  ADSEL_ABLATION_NO_GMR = 3,
} AdselAblation;

/**
 * Result code of every fallible call.
 */
typedef enum AdselStatus {
  ADSEL_STATUS_OK = 0,
  ADSEL_STATUS_NULL_POINTER = 1,
  ADSEL_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Inconsistent dataset (shapes, mask, non-finite values).
   */
  ADSEL_STATUS_INVALID_DATA = 3,
  /**
   * The solver failed numerically.
   */
  ADSEL_STATUS_SOLVER_FAILED = 4,
  /**
   * A metric or test could not be computed on the given inputs.
   */
  ADSEL_STATUS_METRIC_FAILED = 5,
  /**
   * The output buffer is shorter than the required length.
   */
  ADSEL_STATUS_BUFFER_TOO_SMALL = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  ADSEL_STATUS_PANIC = 7,
} AdselStatus;

/**
 * Opaque dataset handle.
 */
typedef struct AdselDataset AdselDataset;

/**
 * Opaque fitted model handle.
 */
typedef struct AdselModel AdselModel;

/**
 * Solver settings. Start from [`adsel_hyperparams_default`].
 */
typedef struct AdselHyperparams {
  /**
   * Label reconstruction weight.
   */
  double lambda;
  /**
   * Row sparsity of `U`.
   */
  double alpha;
  /**
   * Manifold weight.
   */
  double beta;
  /**
   * Redundancy weight.
   */
  double mu;
  /**
   * Row sparsity of `W`.
   */
  double delta;
  /**
   * Neighbours in the sample graph.
   */
  size_t q;
  /**
   * Heat-kernel width; zero or negative selects the automatic width.
   */
  double sigma;
  size_t max_iter;
  double tol;
  uint64_t seed;
  enum AdselAblation ablation;
  /**
   * Shrink factor steps that would raise the objective.
   */
  bool safeguard;
} AdselHyperparams;

/**
 * The four evaluation metrics.
 */
typedef struct AdselMetrics {
  double hamming_loss;
  double ranking_loss;
  double coverage;
  double average_precision;
  /**
   * Samples with all or no relevant labels, left out of the ranking metrics.
   */
  size_t skipped_samples;
} AdselMetrics;

typedef struct AdselFriedman {
  double chi_square;
  /**
   * Iman-Davenport statistic.
   */
  double f_f;
  /**
   * True when `f_f` exceeds the supplied critical value.
   */
  bool reject;
} AdselFriedman;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *adsel_last_error(void);

/**
 * Library defaults: all weights 1, `q = 5`, automatic width, 200
 * iterations, tolerance 1e-6, seed 0, full model, safeguard on.
 */
struct AdselHyperparams adsel_hyperparams_default(void);

/**
 * Builds a validated dataset from copies of the buffers.
 *
 * `features` is `n_samples x n_features`, `labels` and `mask` are
 * `n_samples x n_labels`. `mask` may be null (every label observed);
 * otherwise 1 marks an observed label and 0 a missing one, whose label
 * entry must be 0. With `zscore` set, features are standardised.
 *
 * # Safety
 * Non-null pointers must reference buffers of the stated sizes; `out` must
 * be writable.
 */
enum AdselStatus adsel_dataset_new(const double *features,
                                   size_t n_samples,
                                   size_t n_features,
                                   const double *labels,
                                   size_t n_labels,
                                   const double *mask,
                                   bool zscore,
                                   struct AdselDataset **out);

/**
 * # Safety
 * `ds` must be null or a handle from [`adsel_dataset_new`] not yet freed.
 */
void adsel_dataset_free(struct AdselDataset *ds);

/**
 * Fits the model and ranks features by the row norms of `W`.
 *
 * # Safety
 * `ds` must be a live dataset handle, `hp` readable and `out` writable.
 */
enum AdselStatus adsel_fit(const struct AdselDataset *ds,
                           const struct AdselHyperparams *hp,
                           struct AdselModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`adsel_fit`] not yet freed.
 */
void adsel_model_free(struct AdselModel *model);

/**
 * Number of features (length of the ranking and score arrays); 0 for null.
 *
 * # Safety
 * `model` must be null or a live model handle.
 */
size_t adsel_model_n_features(const struct AdselModel *model);

/**
 * Number of labels (columns of `W`); 0 for null.
 *
 * # Safety
 * `model` must be null or a live model handle.
 */
size_t adsel_model_n_labels(const struct AdselModel *model);

/**
 * Iterations run, which is also the length of the objective trace.
 *
 * # Safety
 * `model` must be null or a live model handle.
 */
size_t adsel_model_iterations(const struct AdselModel *model);

/**
 * Objective at the starting point, before any update.
 *
 * # Safety
 * `model` must be null or a live model handle.
 */
double adsel_model_initial_objective(const struct AdselModel *model);

/**
 * Feature indices, most important first.
 *
 * # Safety
 * `model` must be a live model handle; `out` must hold `len` elements.
 */
enum AdselStatus adsel_model_ranking(const struct AdselModel *model, size_t *out, size_t len);

/**
 * Importance score of each feature, indexed by feature.
 *
 * # Safety
 * `model` must be a live model handle; `out` must hold `len` elements.
 */
enum AdselStatus adsel_model_scores(const struct AdselModel *model, double *out, size_t len);

/**
 * Objective after each iteration.
 *
 * # Safety
 * `model` must be a live model handle; `out` must hold `len` elements.
 */
enum AdselStatus adsel_model_trace(const struct AdselModel *model, double *out, size_t len);

/**
 * The projection `W`, `n_features x n_labels` row-major.
 *
 * # Safety
 * `model` must be a live model handle; `out` must hold `len` elements.
 */
enum AdselStatus adsel_model_weights(const struct AdselModel *model, double *out, size_t len);

/**
 * Scores predictions against ground truth. All three matrices are
 * `n_samples x n_labels`; `binary` holds 0/1 predictions and `confidence`
 * the per-label scores used for ranking.
 *
 * # Safety
 * Pointers must reference buffers of the stated sizes; `out` writable.
 */
enum AdselStatus adsel_evaluate(const double *binary,
                                const double *confidence,
                                const double *truth,
                                size_t n_samples,
                                size_t n_labels,
                                struct AdselMetrics *out);

/**
 * Friedman test with the Iman-Davenport correction on a `methods x
 * settings` score table. `mean_ranks` may be null; otherwise it receives
 * one mean rank per method (1 = best).
 *
 * # Safety
 * `table` must hold `methods * settings` doubles, a non-null `mean_ranks`
 * `methods` doubles, and `out` must be writable.
 */
enum AdselStatus adsel_friedman(const double *table,
                                size_t methods,
                                size_t settings,
                                bool higher_is_better,
                                double critical_value,
                                struct AdselFriedman *out,
                                double *mean_ranks);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADSEL_H */
