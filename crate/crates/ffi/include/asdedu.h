#ifndef ASDEDU_H
#define ASDEDU_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Label written for records that could not be predicted.
 */
#define ASD_NO_LABEL UINT32_MAX

typedef enum AsdStatus {
  ASD_STATUS_OK = 0,
  ASD_STATUS_NULL_POINTER = 1,
  ASD_STATUS_INVALID_UTF8 = 2,
  ASD_STATUS_IO = 3,
  ASD_STATUS_PARSE = 4,
  ASD_STATUS_DATA = 5,
  ASD_STATUS_INVALID_ARGUMENT = 6,
  ASD_STATUS_BUFFER_TOO_SMALL = 7,
  ASD_STATUS_PARTIAL_FAILURE = 8,
  ASD_STATUS_PANIC = 9,
} AsdStatus;

/**
 * A trained model loaded from its JSON file.
 */
typedef struct AsdModel AsdModel;

/**
 * A first-match labeling rule set.
 */
typedef struct AsdRuleSet AsdRuleSet;

/**
 * Aggregate scores over the observed classes.
 */
typedef struct AsdMetrics {
  double accuracy;
  double precision;
  double recall;
  double f1;
} AsdMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *asd_version(void);

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * is valid until the next library call on the same thread.
 */
const char *asd_last_error(void);

/**
 * Display name of a method label code (0..=6), or NULL.
 */
const char *asd_method_name(uint32_t code);

/**
 * Loads a model file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AsdStatus asd_model_load(const char *path, struct AsdModel **out);

/**
 * Parses a model from its JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AsdStatus asd_model_from_json(const char *json, struct AsdModel **out);

/**
 * Releases a model. NULL is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void asd_model_free(struct AsdModel *model);

/**
 * Number of encoded features the model expects.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum AsdStatus asd_model_n_features(const struct AsdModel *model, size_t *out);

/**
 * Model type identifier (`naive_bayes`, `decision_tree`, `random_forest`
 * or `knn`) as a static string, or NULL for a NULL handle.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
const char *asd_model_kind(const struct AsdModel *model);

/**
 * Predicts one encoded, unscaled feature row of length `len`.
 *
 * # Safety
 * `row` must point to `len` doubles; `out_label` must be valid.
 */
enum AsdStatus asd_model_predict_row(const struct AsdModel *model,
                                     const double *row,
                                     size_t len,
                                     uint32_t *out_label);

/**
 * Predicts every record of a screening CSV given as text.
 *
 * Writes one label per data row to `out_labels` and the row count to
 * `out_len`. Rows that fail to parse or encode get [`ASD_NO_LABEL`] and
 * the call returns `PARTIAL_FAILURE`. When `capacity` is too small,
 * nothing is written to `out_labels`, `out_len` holds the needed size
 * and `BUFFER_TOO_SMALL` is returned.
 *
 * # Safety
 * `csv` must be a NUL-terminated string, `out_labels` must have room for
 * `capacity` values and `out_len` must be valid.
 */
enum AsdStatus asd_model_predict_csv(const struct AsdModel *model,
                                     const char *csv,
                                     uint32_t *out_labels,
                                     size_t capacity,
                                     size_t *out_len);

/**
 * The built-in rule set.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum AsdStatus asd_ruleset_builtin(struct AsdRuleSet **out);

/**
 * Parses a rule set from rule-file text.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AsdStatus asd_ruleset_parse(const char *text, struct AsdRuleSet **out);

/**
 * Releases a rule set. NULL is ignored.
 *
 * # Safety
 * `rules` must come from this library and not be used afterwards.
 */
void asd_ruleset_free(struct AsdRuleSet *rules);

/**
 * Labels one answer vector of ten 0/1 values (A1 first).
 *
 * # Safety
 * `answers` must point to 10 bytes; `out_label` must be valid.
 */
enum AsdStatus asd_ruleset_assign(const struct AsdRuleSet *rules,
                                  const uint8_t *answers,
                                  uint32_t *out_label);

/**
 * Accuracy and averaged precision, recall and F1 for `n` label pairs.
 * `weighted` selects support weighting instead of the macro mean.
 *
 * # Safety
 * `y_true` and `y_pred` must point to `n` values; `out` must be valid.
 */
enum AsdStatus asd_metrics(const uint32_t *y_true,
                           const uint32_t *y_pred,
                           size_t n,
                           bool weighted,
                           struct AsdMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ASDEDU_H */
