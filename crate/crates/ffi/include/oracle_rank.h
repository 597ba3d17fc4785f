#ifndef ORACLE_RANK_H
#define ORACLE_RANK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OracleRankMagnitude {
  ORACLE_RANK_MAGNITUDE_NEGLIGIBLE = 0,
  ORACLE_RANK_MAGNITUDE_SMALL = 1,
  ORACLE_RANK_MAGNITUDE_MEDIUM = 2,
  ORACLE_RANK_MAGNITUDE_LARGE = 3,
} OracleRankMagnitude;

typedef enum OracleRankRanking {
  ORACLE_RANK_RANKING_IFOREST = 0,
  ORACLE_RANK_RANKING_RANDOM = 1,
  ORACLE_RANK_RANKING_NONE = 2,
} OracleRankRanking;

typedef enum OracleRankStatus {
  ORACLE_RANK_STATUS_OK = 0,
  ORACLE_RANK_STATUS_NULL_ARG = 1,
  ORACLE_RANK_STATUS_INVALID_ARG = 2,
  ORACLE_RANK_STATUS_IO = 3,
  ORACLE_RANK_STATUS_PARSE = 4,
  ORACLE_RANK_STATUS_DATA = 5,
  ORACLE_RANK_STATUS_PANIC = 6,
} OracleRankStatus;

/**
 * Opaque validated corpus.
 */
typedef struct OracleRankCorpus OracleRankCorpus;

/**
 * Opaque fitted isolation forest.
 */
typedef struct OracleRankForest OracleRankForest;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or "" after a success.
 * Valid until the next library call on this thread.
 */
const char *oracle_rank_last_error(void);

/**
 * Library version, statically allocated.
 */
const char *oracle_rank_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void oracle_rank_string_free(char *s);

/**
 * Reads and joins a records file and an outcomes file (JSON lines).
 *
 * # Safety
 * Paths must be NUL-terminated; `out` must be writable.
 */
enum OracleRankStatus oracle_rank_corpus_ingest(const char *records_path,
                                                const char *outcomes_path,
                                                struct OracleRankCorpus **out);

/**
 * Number of entries, or 0 for null.
 *
 * # Safety
 * `corpus` must be null or a live handle.
 */
size_t oracle_rank_corpus_len(const struct OracleRankCorpus *corpus);

/**
 * Number of distinct bugs, or 0 for null.
 *
 * # Safety
 * `corpus` must be null or a live handle.
 */
size_t oracle_rank_corpus_bug_count(const struct OracleRankCorpus *corpus);

/**
 * # Safety
 * `corpus` must be null or a handle not yet freed.
 */
void oracle_rank_corpus_free(struct OracleRankCorpus *corpus);

/**
 * Runs the full evaluation and returns the report as JSON. `ranking` is an
 * [`OracleRankRanking`] value. Free the string with
 * [`oracle_rank_string_free`].
 *
 * # Safety
 * `ks` and `seeds` must point to `n_ks` and `n_seeds` values; `out_json`
 * must be writable.
 */
enum OracleRankStatus oracle_rank_evaluate(const struct OracleRankCorpus *corpus,
                                           const size_t *ks,
                                           size_t n_ks,
                                           const uint64_t *seeds,
                                           size_t n_seeds,
                                           int32_t ranking,
                                           bool baseline_noexception,
                                           char **out_json);

/**
 * Fits a forest on `n_rows` row-major rows of `n_cols` values.
 * `subsample_size` 0 means min(256, n_rows).
 *
 * # Safety
 * `rows` must hold `n_rows * n_cols` doubles; `out` must be writable.
 */
enum OracleRankStatus oracle_rank_forest_fit(const double *rows,
                                             size_t n_rows,
                                             size_t n_cols,
                                             size_t num_trees,
                                             size_t subsample_size,
                                             uint64_t seed,
                                             struct OracleRankForest **out);

/**
 * Anomaly score of one row, in (0, 1).
 *
 * # Safety
 * `row` must hold `n_cols` doubles; `out` must be writable.
 */
enum OracleRankStatus oracle_rank_forest_score(const struct OracleRankForest *forest,
                                               const double *row,
                                               size_t n_cols,
                                               double *out);

/**
 * # Safety
 * `forest` must be null or a handle not yet freed.
 */
void oracle_rank_forest_free(struct OracleRankForest *forest);

/**
 * TF-IDF cosine similarity of two texts.
 *
 * # Safety
 * Both texts must be NUL-terminated; `out` must be writable.
 */
enum OracleRankStatus oracle_rank_tfidf_cosine(const char *a, const char *b, double *out);

/**
 * Two-sided Wilcoxon signed-rank test on `n` pairs.
 *
 * # Safety
 * `a` and `b` must hold `n` doubles; out-pointers must be writable.
 */
enum OracleRankStatus oracle_rank_wilcoxon(const double *a,
                                           const double *b,
                                           size_t n,
                                           double *statistic,
                                           double *p_value);

/**
 * Cliff's delta of `a` (length `n`) against `b` (length `m`).
 *
 * # Safety
 * `a` and `b` must hold `n` and `m` doubles; out-pointers must be writable.
 */
enum OracleRankStatus oracle_rank_cliffs_delta(const double *a,
                                               size_t n,
                                               const double *b,
                                               size_t m,
                                               double *delta,
                                               enum OracleRankMagnitude *magnitude);

/**
 * Found@K over `n_bugs` bugs given each bug's 1-based first-TP rank, with 0
 * meaning the bug has no TP.
 *
 * # Safety
 * `first_tp_ranks` must hold `n_bugs` values; out-pointers must be writable.
 */
enum OracleRankStatus oracle_rank_found_at_k(const size_t *first_tp_ranks,
                                             size_t n_bugs,
                                             size_t k,
                                             size_t *count,
                                             double *fraction);

/**
 * Simple name of the outermost exception in a stack trace. Free the result
 * with [`oracle_rank_string_free`].
 *
 * # Safety
 * `raw_trace` must be NUL-terminated; `out` must be writable.
 */
enum OracleRankStatus oracle_rank_trace_exception(const char *raw_trace, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ORACLE_RANK_H */
