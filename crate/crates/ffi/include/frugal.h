#ifndef FRUGAL_H
#define FRUGAL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FrugalStatus {
  FRUGAL_STATUS_OK = 0,
  FRUGAL_STATUS_NULL_POINTER = 1,
  // Bad argument or hyperparameter.
  FRUGAL_STATUS_CONFIG = 2,
  // Unreadable or invalid data.
  FRUGAL_STATUS_DATA = 3,
  FRUGAL_STATUS_NUMERIC = 4,
  // The call does not fit the session state (e.g. it has finished).
  FRUGAL_STATUS_STATE = 5,
  // An output buffer is too small; the needed length was written.
  FRUGAL_STATUS_BUFFER_TOO_SMALL = 6,
  FRUGAL_STATUS_PANIC = 7,
} FrugalStatus;

typedef enum FrugalStrategy {
  FRUGAL_STRATEGY_PROPOSED = 0,
  FRUGAL_STRATEGY_MAXMIN = 1,
  FRUGAL_STRATEGY_UNCERTAINTY = 2,
  FRUGAL_STRATEGY_RANDOM = 3,
} FrugalStrategy;

// A feature pool with optional ground-truth labels.
typedef struct FrugalDataset FrugalDataset;

typedef struct FrugalSession FrugalSession;

// The tunable subset of the hyperparameters. Fields not listed keep their
// library defaults.
typedef struct FrugalHyperparams {
  double alpha;
  double beta;
  double gamma;
  size_t clusters;
  size_t display_size;
  size_t budget;
  double eps_fp;
  size_t max_fp_iter;
  uint64_t seed;
} FrugalHyperparams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next call into this library from the same thread.
const char *frugal_last_error(void);

struct FrugalHyperparams frugal_hyperparams_default(void);

// `t * b / n_train` as a percentage.
//
// # Safety
// `out` must be null or point to writable memory for one `double`.
enum FrugalStatus frugal_sampling_rate(size_t t, size_t b, size_t n_train, double *out);

// Synthetic two-class pool with the library's default shape parameters.
//
// # Safety
// `out` must be null or point to writable memory for one handle.
enum FrugalStatus frugal_dataset_synthetic(size_t n,
                                           size_t d,
                                           double positive_rate,
                                           uint64_t seed,
                                           struct FrugalDataset **out);

// Loads a dataset directory written by the `generate` or `extract` commands.
//
// # Safety
// `path` must be null or a NUL-terminated string; `out` must be null or
// writable.
enum FrugalStatus frugal_dataset_load(const char *path, struct FrugalDataset **out);

// Builds a pool from `n * d` row-major features. `labels` may be null; if
// given it holds `n` codes (1, -1, or 0 for unknown).
//
// # Safety
// `features` must hold `n * d` floats and `labels`, when not null, `n`
// bytes.
enum FrugalStatus frugal_dataset_from_features(const float *features,
                                               size_t n,
                                               size_t d,
                                               const int8_t *labels,
                                               struct FrugalDataset **out);

// # Safety
// `ds` must be null or a live dataset handle.
enum FrugalStatus frugal_dataset_shape(const struct FrugalDataset *ds, size_t *n, size_t *d);

// Copies the `n` label codes into `out` (0 where unknown, or everywhere if
// the dataset has no labels).
//
// # Safety
// `out` must hold `len` bytes.
enum FrugalStatus frugal_dataset_labels(const struct FrugalDataset *ds, int8_t *out, size_t len);

// # Safety
// `ds` must be null or a handle from this library not yet freed.
void frugal_dataset_free(struct FrugalDataset *ds);

// Starts a session over `ds`. With `simulated` set, the dataset's labels
// answer every display and must be complete. The session keeps its own
// reference to the pool, so `ds` may be freed afterwards.
//
// # Safety
// All pointers must be null or valid.
enum FrugalStatus frugal_session_new(const struct FrugalDataset *ds,
                                     const struct FrugalHyperparams *hp,
                                     enum FrugalStrategy strategy,
                                     bool simulated,
                                     struct FrugalSession **out);

// Writes the indices of the display awaiting labels. `len` receives the
// display size; if `cap` is smaller, nothing else is written and
// `FRUGAL_STATUS_BUFFER_TOO_SMALL` is returned.
//
// # Safety
// `out` must hold `cap` entries.
enum FrugalStatus frugal_session_pending(const struct FrugalSession *s,
                                         size_t *out,
                                         size_t cap,
                                         size_t *len);

// Labels the pending display: `labels[j]` (1 or -1) answers `indices[j]`.
// On error the session is unchanged.
//
// # Safety
// `indices` and `labels` must hold `len` entries each.
enum FrugalStatus frugal_session_submit(struct FrugalSession *s,
                                        const size_t *indices,
                                        const int8_t *labels,
                                        size_t len);

// Answers the pending display from the simulated oracle.
//
// # Safety
// `s` must be null or a live session handle.
enum FrugalStatus frugal_session_step(struct FrugalSession *s);

// Number of displays labeled so far.
//
// # Safety
// Pointers must be null or valid.
enum FrugalStatus frugal_session_iteration(const struct FrugalSession *s, size_t *out);

// # Safety
// Pointers must be null or valid.
enum FrugalStatus frugal_session_finished(const struct FrugalSession *s, bool *out);

// Current classifier scores for the whole pool, or
// `FRUGAL_STATUS_STATE` before the first display is labeled.
//
// # Safety
// `out` must hold `len` doubles.
enum FrugalStatus frugal_session_scores(const struct FrugalSession *s, double *out, size_t len);

// # Safety
// `s` must be null or a handle from this library not yet freed.
void frugal_session_free(struct FrugalSession *s);

// Minimizes the display objective for `n` samples in `k` clusters.
// `assignment` holds each sample's cluster, `dist` the row-major `n * k`
// squared distances, `fhat` the classifier probabilities. `mu` receives
// the `n` memberships; `tau` and `converged` may be null.
//
// # Safety
// Buffers must match the sizes above.
enum FrugalStatus frugal_solve_membership(size_t n,
                                          size_t k,
                                          const size_t *assignment,
                                          const double *dist,
                                          const double *fhat,
                                          const struct FrugalHyperparams *hp,
                                          uint64_t seed,
                                          double *mu,
                                          size_t *tau,
                                          bool *converged);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRUGAL_H */
