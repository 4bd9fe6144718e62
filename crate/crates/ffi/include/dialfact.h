#ifndef DIALFACT_H
#define DIALFACT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum DialfactStatus {
  DIALFACT_STATUS_OK = 0,
  DIALFACT_STATUS_NULL_POINTER = 1,
  DIALFACT_STATUS_INVALID_UTF8 = 2,
  DIALFACT_STATUS_INVALID_ARGUMENT = 3,
  DIALFACT_STATUS_IO = 4,
  DIALFACT_STATUS_PARSE = 5,
  DIALFACT_STATUS_SCORER = 6,
  DIALFACT_STATUS_PANIC = 7,
} DialfactStatus;

// Mirrors the label inventory; values are stable.
typedef enum DialfactClass {
  DIALFACT_CLASS_NO_ERROR = 0,
  DIALFACT_CLASS_ENT_E = 1,
  DIALFACT_CLASS_PRED_E = 2,
  DIALFACT_CLASS_CIR_E = 3,
  DIALFACT_CLASS_COREF_E = 4,
  DIALFACT_CLASS_LINK_E = 5,
  DIALFACT_CLASS_OTHERS = 6,
} DialfactClass;

// Opaque corpus handle.
typedef struct DialfactCorpus DialfactCorpus;

// Scores one token sequence. Writes `n_tokens` natural-log probabilities
// (each <= 0) to `out_logprobs` and returns 0, or returns non-zero to
// abort. `context` is the flattened dialogue. Called on the thread that
// invoked [`dialfact_detect_json`], never concurrently.
typedef int (*DialfactScorerFn)(void *user_data,
                                const char *dialogue_id,
                                const char *context,
                                const char *const *tokens,
                                size_t n_tokens,
                                double *out_logprobs);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version; static, do not free.
const char *dialfact_version(void);

// Message of the calling thread's most recent failure, or null. Valid
// until the next failing call on the same thread; do not free.
const char *dialfact_last_error(void);

// # Safety
// `s` must be null or a string returned by this library, freed once.
void dialfact_string_free(char *s);

// # Safety
// `path` must be a valid C string and `out` a valid pointer.
enum DialfactStatus dialfact_corpus_load(const char *path, struct DialfactCorpus **out);

// Parses a corpus from JSON-lines text.
//
// # Safety
// `jsonl` must be a valid C string and `out` a valid pointer.
enum DialfactStatus dialfact_corpus_parse(const char *jsonl, struct DialfactCorpus **out);

// Number of summary sentences; 0 for a null handle.
//
// # Safety
// `corpus` must be null or a live handle.
size_t dialfact_corpus_len(const struct DialfactCorpus *corpus);

// # Safety
// `corpus` must be null or a handle from this library, freed once.
void dialfact_corpus_free(struct DialfactCorpus *corpus);

// Corpus statistics as a JSON object.
//
// # Safety
// `corpus` must be a live handle and `out_json` a valid pointer.
enum DialfactStatus dialfact_corpus_stats_json(const struct DialfactCorpus *corpus,
                                               char **out_json);

// Class implied by a semantic role label and the span filling it.
//
// # Safety
// `span` and `role` must be valid C strings, `out` a valid pointer.
enum DialfactStatus dialfact_map_role_to_class(const char *span,
                                               const char *role,
                                               enum DialfactClass *out);

// Class of an erroneous dependency arc of the given type.
//
// # Safety
// `arc_type` must be a valid C string, `out` a valid pointer.
enum DialfactStatus dialfact_dae_arc_class(const char *arc_type, enum DialfactClass *out);

// Rank of the original among its variants: one plus the number of
// candidate scores strictly greater than `soi_score`.
//
// # Safety
// `candidates` must point to `n` doubles (may be null when `n` is 0).
enum DialfactStatus dialfact_rank_from_scores(double soi_score,
                                              const double *candidates,
                                              size_t n,
                                              size_t *out_rank);

// Cohen's kappa between two integer-coded annotations of `n` items.
//
// # Safety
// `a` and `b` must each point to `n` values.
enum DialfactStatus dialfact_cohens_kappa(const int64_t *a,
                                          const int64_t *b,
                                          size_t n,
                                          double *out);

// Scores JSON-lines predictions against the corpus gold labels and
// returns the evaluation report as JSON.
//
// # Safety
// `corpus` must be a live handle, `predictions_jsonl` a valid C string and
// `out_json` a valid pointer.
enum DialfactStatus dialfact_evaluate_json(const struct DialfactCorpus *corpus,
                                           const char *predictions_jsonl,
                                           bool merge_linke,
                                           char **out_json);

// Runs the ranking detector with a caller-supplied scorer and returns
// JSON-lines predictions (with per-span diagnostics). `provider_id` names
// a built-in annotator (`heuristic`, `fixture:PATH`); null means
// `heuristic`.
//
// # Safety
// `corpus` must be a live handle, `provider_id` null or a valid C string,
// `out_jsonl` a valid pointer; `scorer` must honour [`DialfactScorerFn`].
enum DialfactStatus dialfact_detect_json(const struct DialfactCorpus *corpus,
                                         DialfactScorerFn scorer,
                                         void *user_data,
                                         const char *provider_id,
                                         size_t threshold_t,
                                         bool merge_linke,
                                         char **out_jsonl);

// Like [`dialfact_detect_json`] with a built-in scorer (`mock`,
// `mock:TABLE.json`, `overlap`).
//
// # Safety
// As for [`dialfact_detect_json`]; `scorer_id` must be a valid C string.
enum DialfactStatus dialfact_detect_builtin_json(const struct DialfactCorpus *corpus,
                                                 const char *scorer_id,
                                                 const char *provider_id,
                                                 size_t threshold_t,
                                                 bool merge_linke,
                                                 char **out_jsonl);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIALFACT_H */
