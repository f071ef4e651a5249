/* C interface for the seqeval harness. Generated by cbindgen; do not edit. */

#pragma once

/* Generated with cbindgen:0.29.4 */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible call.
typedef enum SeqevalStatus {
  SEQEVAL_STATUS_OK = 0,
  SEQEVAL_STATUS_NULL_POINTER = 1,
  SEQEVAL_STATUS_UTF8 = 2,
  SEQEVAL_STATUS_INVALID_INPUT = 3,
  SEQEVAL_STATUS_FORMAT = 4,
  SEQEVAL_STATUS_PROTOCOL = 5,
  SEQEVAL_STATUS_CONFIG = 6,
  SEQEVAL_STATUS_DEGENERATE_REFERENCE = 7,
  SEQEVAL_STATUS_IO = 8,
  // A requested value is undefined for this input (for example Perf@50%
  // of a curve with no point at or below the threshold).
  SEQEVAL_STATUS_UNDEFINED = 9,
  SEQEVAL_STATUS_PANIC = 10,
} SeqevalStatus;

// Opaque handle to a finished run: the learning curve plus its report.
typedef struct SeqevalCurve SeqevalCurve;

// Opaque dataset handle.
typedef struct SeqevalDataset SeqevalDataset;

// Opaque environment handle.
typedef struct SeqevalMdp SeqevalMdp;

// Run parameters. Counts of 0 pick the same defaults as the command-line
// front end: `t0 = min(500, dataset size)` and an evaluation grid of one
// percent of the dataset.
typedef struct SeqevalRunOptions {
  uint64_t t0;
  uint64_t gamma_increment;
  uint64_t k_steps;
  uint64_t eval_every;
  uint64_t eval_episodes;
  uint64_t online_steps;
  uint64_t seed;
  double learning_rate;
  double discount;
  double cql_alpha;
  double bc_weight;
  uint64_t target_sync_every;
  uint64_t batch_size;
  double explore_epsilon;
  double q_init;
  // 0 scores by simulator rollouts, 1 by fitted Q evaluation.
  int32_t use_fqe_metric;
  uint64_t fqe_iterations;
} SeqevalRunOptions;

// One evaluation point of a curve.
typedef struct SeqevalEvalPoint {
  uint64_t data_count;
  uint64_t grad_steps;
  double raw_score;
  double norm_score;
  // 0 while offline data is being revealed, 1 during online fine-tuning.
  int32_t online;
} SeqevalEvalPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Bytes of the last error message on this thread, excluding the
// terminator.
uintptr_t seqeval_last_error_length(void);

// Copies the last error message (NUL-terminated, truncated to `cap`)
// into `buf`; returns the number of bytes copied excluding the
// terminator.
//
// # Safety
// `buf` must point to at least `cap` writable bytes.
uintptr_t seqeval_last_error_message(char *buf, uintptr_t cap);

// Library version as a static NUL-terminated string.
const char *seqeval_version(void);

// Loads an environment from its structured text file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be a valid pointer.
enum SeqevalStatus seqeval_mdp_load(const char *path, struct SeqevalMdp **out);

// Writes an environment to its structured text file.
//
// # Safety
// `mdp` must be a live handle; `path` must be NUL-terminated.
enum SeqevalStatus seqeval_mdp_save(const struct SeqevalMdp *mdp, const char *path);

// Builds the deterministic chain environment.
//
// # Safety
// `name` must be NUL-terminated; `out` must be a valid pointer.
enum SeqevalStatus seqeval_mdp_chain(const char *name,
                                     uint64_t n_states,
                                     double step_reward,
                                     double goal_reward,
                                     uint64_t horizon,
                                     struct SeqevalMdp **out);

// Builds a gridworld. `walls_xy` holds `walls_len` (x, y) pairs
// flattened; pass null with `walls_len = 0` for an open grid. Negative
// `start_x`/`start_y` select a uniform start over free cells.
//
// # Safety
// `name` must be NUL-terminated; `walls_xy` must hold `2 * walls_len`
// readable values when non-null; `out` must be a valid pointer.
enum SeqevalStatus seqeval_mdp_gridworld(const char *name,
                                         uint64_t width,
                                         uint64_t height,
                                         const uint64_t *walls_xy,
                                         uintptr_t walls_len,
                                         double slip,
                                         double step_reward,
                                         double goal_reward,
                                         int64_t start_x,
                                         int64_t start_y,
                                         uint64_t goal_x,
                                         uint64_t goal_y,
                                         uint64_t horizon,
                                         struct SeqevalMdp **out);

// Frees an environment handle; null is ignored.
//
// # Safety
// `mdp` must have come from this library and not be freed twice.
void seqeval_mdp_free(struct SeqevalMdp *mdp);

// Builds the six standard dataset tiers for `mdp` and writes them (plus
// the environment file and policy checkpoints) into `out_dir`, as the
// `make-datasets` command does. Zero counts pick the built-in defaults.
//
// # Safety
// `mdp` must be a live handle; `out_dir` must be NUL-terminated.
enum SeqevalStatus seqeval_make_datasets(const struct SeqevalMdp *mdp,
                                         const char *out_dir,
                                         uint64_t transitions_per_tier,
                                         uint64_t train_steps,
                                         uint64_t seed);

// Loads a dataset file.
//
// # Safety
// `path` must be NUL-terminated; `out` must be a valid pointer.
enum SeqevalStatus seqeval_dataset_load(const char *path, struct SeqevalDataset **out);

// Writes a dataset file.
//
// # Safety
// `dataset` must be a live handle; `path` must be NUL-terminated.
enum SeqevalStatus seqeval_dataset_save(const struct SeqevalDataset *dataset, const char *path);

// Number of transitions, or 0 for a null handle.
//
// # Safety
// `dataset` must be a live handle or null.
uintptr_t seqeval_dataset_len(const struct SeqevalDataset *dataset);

// Frees a dataset handle; null is ignored.
//
// # Safety
// `dataset` must have come from this library and not be freed twice.
void seqeval_dataset_free(struct SeqevalDataset *dataset);

// Fills `out` with the default run options.
//
// # Safety
// `out` must be a valid pointer.
enum SeqevalStatus seqeval_run_options_default(struct SeqevalRunOptions *out);

// Runs the sequential protocol and returns a curve handle.
//
// # Safety
// `mdp` and `dataset` must be live handles; `algorithm` must be
// NUL-terminated; `options` and `out` must be valid pointers.
enum SeqevalStatus seqeval_run(const struct SeqevalMdp *mdp,
                               const struct SeqevalDataset *dataset,
                               const char *algorithm,
                               const struct SeqevalRunOptions *options,
                               struct SeqevalCurve **out);

// Runs the mini-batch baseline for `total_grad_steps` gradient steps.
//
// # Safety
// Same contract as [`seqeval_run`].
enum SeqevalStatus seqeval_run_minibatch(const struct SeqevalMdp *mdp,
                                         const struct SeqevalDataset *dataset,
                                         const char *algorithm,
                                         const struct SeqevalRunOptions *options,
                                         uint64_t total_grad_steps,
                                         struct SeqevalCurve **out);

// Number of evaluation points, or 0 for a null handle.
//
// # Safety
// `curve` must be a live handle or null.
uintptr_t seqeval_curve_len(const struct SeqevalCurve *curve);

// Copies evaluation point `index` into `out`.
//
// # Safety
// `curve` must be a live handle; `out` must be a valid pointer.
enum SeqevalStatus seqeval_curve_point(const struct SeqevalCurve *curve,
                                       uintptr_t index,
                                       struct SeqevalEvalPoint *out);

// Total gradient steps performed by the run, or 0 for a null handle.
//
// # Safety
// `curve` must be a live handle or null.
uint64_t seqeval_curve_total_grad_steps(const struct SeqevalCurve *curve);

// Buffer indices never trained on over the run (0 in any draining
// configuration), or 0 for a null handle.
//
// # Safety
// `curve` must be a live handle or null.
uint64_t seqeval_curve_uncovered(const struct SeqevalCurve *curve);

// Normalized score at the last offline point with data count at or below
// `fraction` of the dataset; `SEQEVAL_STATUS_UNDEFINED` when no point
// qualifies.
//
// # Safety
// `curve` must be a live handle; `out` must be a valid pointer.
enum SeqevalStatus seqeval_curve_perf_at(const struct SeqevalCurve *curve,
                                         double fraction,
                                         double *out);

// Final online score minus final offline score;
// `SEQEVAL_STATUS_UNDEFINED` without an online phase.
//
// # Safety
// `curve` must be a live handle; `out` must be a valid pointer.
enum SeqevalStatus seqeval_curve_finetune_uplift(const struct SeqevalCurve *curve, double *out);

// Frees a curve handle; null is ignored.
//
// # Safety
// `curve` must have come from this library and not be freed twice.
void seqeval_curve_free(struct SeqevalCurve *curve);

// Interquartile mean of `len` scores.
//
// # Safety
// `scores` must hold `len` readable values; `out` must be valid.
enum SeqevalStatus seqeval_iqm(const double *scores, uintptr_t len, double *out);

// Mean shortfall of `len` scores below `threshold`.
//
// # Safety
// `scores` must hold `len` readable values; `out` must be valid.
enum SeqevalStatus seqeval_optimality_gap(const double *scores,
                                          uintptr_t len,
                                          double threshold,
                                          double *out);

// Tier name strings accepted by dataset files, for binding authors.
//
// # Safety
// `index` selects a tier; returns null when out of range.
const char *seqeval_tier_name(uintptr_t index);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
