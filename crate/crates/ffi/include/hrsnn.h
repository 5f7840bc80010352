#ifndef HRSNN_H
#define HRSNN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HrsnnStatus {
  HRSNN_STATUS_OK = 0,
  HRSNN_STATUS_NULL_POINTER = 1,
  HRSNN_STATUS_INVALID_ARGUMENT = 2,
  HRSNN_STATUS_NUMERIC = 3,
  HRSNN_STATUS_CONFIG = 4,
  HRSNN_STATUS_IO = 5,
  HRSNN_STATUS_OBJECTIVE = 6,
  HRSNN_STATUS_BUFFER_TOO_SMALL = 7,
  HRSNN_STATUS_PANIC = 8,
} HrsnnStatus;

/**
 * Heterogeneity variant: neurons (N) and STDP (S), homogeneous (Ho) or
 * heterogeneous (He).
 */
typedef enum HrsnnVariant {
  HRSNN_VARIANT_HO_N_HO_S = 0,
  HRSNN_VARIANT_HE_N_HO_S = 1,
  HRSNN_VARIANT_HO_N_HE_S = 2,
  HRSNN_VARIANT_HE_N_HE_S = 3,
} HrsnnVariant;

/**
 * Opaque experiment configuration.
 */
typedef struct HrsnnConfig HrsnnConfig;

/**
 * Opaque reservoir network.
 */
typedef struct HrsnnNetwork HrsnnNetwork;

typedef struct HrsnnActivation {
  double avg_activation;
  size_t active_neuron_count;
  uint64_t ac_ops;
  uint64_t total_spikes;
} HrsnnActivation;

typedef struct HrsnnMetrics {
  double accuracy;
  double train_accuracy;
  double mean_activation;
  size_t active_neurons;
  uint64_t ac_ops;
  size_t effective_rank;
} HrsnnMetrics;

/**
 * Scores one candidate, given as a JSON object of parameter values. Writes
 * the score (higher is better) to `score` and returns 0, or returns nonzero
 * to mark the evaluation as failed.
 */
typedef int32_t (*HrsnnObjective)(void *user_data, const char *candidate_json, double *score);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *hrsnn_last_error(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void hrsnn_string_free(char *s);

/**
 * Default configuration.
 */
struct HrsnnConfig *hrsnn_config_new(void);

/**
 * Parses `section.key = value` text into a new validated configuration.
 *
 * # Safety
 * `text_ptr` must be a NUL-terminated string; `out_cfg` must be writable.
 */
enum HrsnnStatus hrsnn_config_parse(const char *text_ptr, struct HrsnnConfig **out_cfg);

/**
 * Sets one key. The configuration is left unchanged on failure.
 *
 * # Safety
 * `cfg` must be a live handle; `key` and `value` NUL-terminated strings.
 */
enum HrsnnStatus hrsnn_config_set(struct HrsnnConfig *cfg, const char *key, const char *value);

/**
 * Serialized configuration; release with [`hrsnn_string_free`].
 *
 * # Safety
 * `cfg` must be a live handle; `out_text` must be writable.
 */
enum HrsnnStatus hrsnn_config_to_text(const struct HrsnnConfig *cfg, char **out_text);

/**
 * # Safety
 * `cfg` must come from this library and not have been freed.
 */
void hrsnn_config_free(struct HrsnnConfig *cfg);

/**
 * Builds the reservoir described by `cfg` for `n_inputs` input channels.
 *
 * # Safety
 * `cfg` must be a live handle; `out_net` must be writable.
 */
enum HrsnnStatus hrsnn_network_build(const struct HrsnnConfig *cfg,
                                     enum HrsnnVariant variant,
                                     uint64_t seed,
                                     size_t n_inputs,
                                     struct HrsnnNetwork **out_net);

/**
 * Number of readout values a trial produces, or 0 for a null handle.
 *
 * # Safety
 * `net` must be null or a live handle.
 */
size_t hrsnn_network_n_readout(const struct HrsnnNetwork *net);

/**
 * Presents one stimulus of `len` input spikes (`neurons[k]` fires at
 * `times[k]` ms) lasting `duration` ms. Writes `n_readout` state values to
 * `state` and, when `report` is non-null, the activation counts. With
 * `plasticity` set the weights are updated by STDP.
 *
 * # Safety
 * `net` must be a live handle; `neurons` and `times` must hold `len`
 * elements; `state` must hold `state_len` elements.
 */
enum HrsnnStatus hrsnn_network_run_trial(struct HrsnnNetwork *net,
                                         const uint32_t *neurons,
                                         const double *times,
                                         size_t len,
                                         double duration,
                                         double dt,
                                         bool plasticity,
                                         double *state,
                                         size_t state_len,
                                         struct HrsnnActivation *report);

/**
 * # Safety
 * `net` must come from this library and not have been freed.
 */
void hrsnn_network_free(struct HrsnnNetwork *net);

/**
 * Full pipeline (data, STDP, states, readout) for one seed.
 *
 * # Safety
 * `cfg` must be a live handle; `metrics` must be writable.
 */
enum HrsnnStatus hrsnn_run_pipeline(const struct HrsnnConfig *cfg,
                                    enum HrsnnVariant variant,
                                    uint64_t seed,
                                    double train_fraction,
                                    struct HrsnnMetrics *metrics);

/**
 * Effective rank of a row-major `rows x cols` matrix: the number of singular
 * values needed to reach `threshold` of their total.
 *
 * # Safety
 * `data` must hold `rows * cols` elements; `rank` must be writable.
 */
enum HrsnnStatus hrsnn_effective_rank(const double *data,
                                      size_t rows,
                                      size_t cols,
                                      double threshold,
                                      size_t *rank);

/**
 * Exact W2 between two weighted samples on the line. Null weights mean
 * uniform.
 *
 * # Safety
 * `x`/`y` must hold `nx`/`ny` values and the weight arrays, when non-null,
 * as many; `dist` must be writable.
 */
enum HrsnnStatus hrsnn_w2_1d(const double *x,
                             const double *wx,
                             size_t nx,
                             const double *y,
                             const double *wy,
                             size_t ny,
                             double *dist);

/**
 * Sliced W2 between uniform point clouds (row-major, `dim` columns) with
 * `n_projections` seeded directions.
 *
 * # Safety
 * `x`/`y` must hold `nx * dim`/`ny * dim` values; `dist` must be writable.
 */
enum HrsnnStatus hrsnn_sliced_w2(const double *x,
                                 size_t nx,
                                 const double *y,
                                 size_t ny,
                                 size_t dim,
                                 size_t n_projections,
                                 uint64_t seed,
                                 double *dist);

/**
 * Entropic OT with squared Euclidean cost. Writes the transport cost of the
 * regularized plan.
 *
 * # Safety
 * `x`/`y` must hold `nx * dim`/`ny * dim` values, weight arrays (if
 * non-null) `nx`/`ny`; `cost` must be writable.
 */
enum HrsnnStatus hrsnn_sinkhorn(const double *x,
                                const double *wx,
                                size_t nx,
                                const double *y,
                                const double *wy,
                                size_t ny,
                                size_t dim,
                                double reg,
                                size_t max_iters,
                                double tol,
                                double *cost);

/**
 * Matérn covariance at distance `d`.
 *
 * # Safety
 * `value` must be writable.
 */
enum HrsnnStatus hrsnn_matern(double d,
                              double variance,
                              double length_scale,
                              double smoothness,
                              double *value);

/**
 * Expected improvement over `f_best` of a Gaussian with mean `mu` and
 * standard deviation `sigma` (maximization).
 */
double hrsnn_expected_improvement(double mu, double sigma, double f_best);

/**
 * Bayesian optimization of a caller-supplied objective over the reservoir
 * search space, using the `bo.*` settings of `cfg`. Calls to `objective` are
 * serialized. Writes the best score and, when `best_json` is non-null, the
 * best candidate (release with [`hrsnn_string_free`]).
 *
 * # Safety
 * `cfg` must be a live handle; `objective` must be safe to call with
 * `user_data` from any thread; output pointers may be null.
 */
enum HrsnnStatus hrsnn_optimize(const struct HrsnnConfig *cfg,
                                HrsnnObjective objective,
                                void *user_data,
                                double *best_score,
                                char **best_json);

/**
 * Bayesian optimization of the reservoir pipeline itself (held-out
 * accuracy on data generated from `run.seed`).
 *
 * # Safety
 * `cfg` must be a live handle; output pointers may be null.
 */
enum HrsnnStatus hrsnn_optimize_pipeline(const struct HrsnnConfig *cfg,
                                         double *best_score,
                                         char **best_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HRSNN_H */
