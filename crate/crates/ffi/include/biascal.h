#ifndef BIASCAL_H
#define BIASCAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every function.
 */
typedef enum {
  BIASCAL_STATUS_OK = 0,
  BIASCAL_STATUS_NULL_POINTER = 1,
  BIASCAL_STATUS_INVALID_UTF8 = 2,
  BIASCAL_STATUS_INVALID_ARGUMENT = 3,
  BIASCAL_STATUS_BACKEND = 4,
  BIASCAL_STATUS_CALIBRATION = 5,
  BIASCAL_STATUS_CONFIG = 6,
  BIASCAL_STATUS_IO = 7,
  BIASCAL_STATUS_BUFFER_TOO_SMALL = 8,
  BIASCAL_STATUS_PANIC = 9,
} BiascalStatus;

/**
 * A scoring backend (mock or remote, optionally cached).
 */
typedef struct BiascalBackend BiascalBackend;

/**
 * Label names in label order.
 */
typedef struct BiascalLabelSet BiascalLabelSet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *biascal_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *biascal_version(void);

/**
 * Create a label set from `n` NUL-terminated names.
 *
 * # Safety
 * `names` must point to `n` valid C strings; `out` must be writable.
 */
BiascalStatus biascal_label_set_new(const char *const *names, size_t n, BiascalLabelSet **out);

/**
 * # Safety
 * `set` must come from `biascal_label_set_new` (or be null) and not be
 * used afterwards.
 */
void biascal_label_set_free(BiascalLabelSet *set);

/**
 * Number of labels, or 0 for a null handle.
 *
 * # Safety
 * `set` must be a live handle or null.
 */
size_t biascal_label_set_len(const BiascalLabelSet *set);

/**
 * Mock backend from a JSON association table
 * `{"model": "...", "base": [..], "assoc": {"word": [..]}}`.
 *
 * # Safety
 * `json` must be a valid C string; `out` must be writable.
 */
BiascalStatus biascal_backend_mock_from_json(const char *json, BiascalBackend **out);

/**
 * Backend for an OpenAI-compatible completions server. `api_key` and
 * `cache_dir` may be null; `timeout_secs` and `parallelism` of 0 select
 * the defaults.
 *
 * # Safety
 * String arguments must be valid C strings or null where allowed; `out`
 * must be writable.
 */
BiascalStatus biascal_backend_remote_new(const char *endpoint,
                                         const char *model,
                                         const char *api_key,
                                         uint64_t timeout_secs,
                                         size_t parallelism,
                                         const char *cache_dir,
                                         BiascalBackend **out);

/**
 * # Safety
 * `backend` must come from a `biascal_backend_*` constructor (or be null)
 * and not be used afterwards.
 */
void biascal_backend_free(BiascalBackend *backend);

/**
 * Normalized label probabilities for `prompt`, written to `out_probs`
 * (capacity `out_len`, which must be at least the label count).
 *
 * # Safety
 * Handles must be live; `prompt` a valid C string; `out_probs` writable
 * for `out_len` doubles.
 */
BiascalStatus biascal_score(const BiascalBackend *backend,
                            const char *prompt,
                            const BiascalLabelSet *labels,
                            double *out_probs,
                            size_t out_len);

/**
 * Index of the largest probability (ties: lowest index).
 *
 * # Safety
 * `probs` must hold `n` doubles; `out` must be writable.
 */
BiascalStatus biascal_predict_uncalibrated(const double *probs, size_t n, size_t *out);

/**
 * Index maximizing `probs[y] / prior[y]`, with the prior floored at a
 * tiny positive value.
 *
 * # Safety
 * `probs` and `prior` must each hold `n` doubles; `out` must be writable.
 */
BiascalStatus biascal_calibrated_predict(const double *probs,
                                         const double *prior,
                                         size_t n,
                                         size_t *out);

/**
 * Half the L1 distance between two label distributions.
 *
 * # Safety
 * `p_eng` and `p_id` must each hold `n` doubles; `out` must be writable.
 */
BiascalStatus biascal_bias_from_priors(const double *p_eng,
                                       const double *p_id,
                                       size_t n,
                                       double *out);

/**
 * Macro-averaged F1 over `n_classes` classes.
 *
 * # Safety
 * `preds` and `golds` must each hold `n` values; `out` must be writable.
 */
BiascalStatus biascal_macro_f1(const size_t *preds,
                               const size_t *golds,
                               size_t n,
                               size_t n_classes,
                               double *out);

/**
 * Pearson correlation of two equal-length series.
 *
 * # Safety
 * `a` and `b` must each hold `n` doubles; `out` must be writable.
 */
BiascalStatus biascal_pearson(const double *a, const double *b, size_t n, double *out);

/**
 * Run an evaluation from a TOML run file and write its reports.
 * `out_dir` may be null to use the file's setting. The number of failed
 * cells is stored in `out_failed_cells`; the call still returns `Ok` when
 * only some cells failed.
 *
 * # Safety
 * `config_path` must be a valid C string, `out_dir` a valid C string or
 * null, and `out_failed_cells` writable or null.
 */
BiascalStatus biascal_eval_run(const char *config_path,
                               const char *out_dir,
                               size_t *out_failed_cells);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BIASCAL_H */
