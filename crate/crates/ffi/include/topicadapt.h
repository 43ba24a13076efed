#ifndef TOPICADAPT_H
#define TOPICADAPT_H

#include <stddef.h>
#include <stdint.h>

// Result codes.
typedef enum TaStatus {
  TA_STATUS_OK = 0,
  TA_STATUS_NULL_POINTER = 1,
  TA_STATUS_INVALID_ARGUMENT = 2,
  TA_STATUS_IO = 3,
  TA_STATUS_FORMAT = 4,
  TA_STATUS_CHECKPOINT = 5,
  TA_STATUS_VOCABULARY_MISMATCH = 6,
  TA_STATUS_CONFIG = 7,
  TA_STATUS_NUMERIC = 8,
  TA_STATUS_PANIC = 9,
} TaStatus;

// A trained model loaded from a checkpoint.
typedef struct TaModel TaModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ta_version(void);

// Message for the last failed call on this thread, or "" after a
// successful one. Valid until the next call on this thread.
const char *ta_last_error_message(void);

// Loads a checkpoint. On success `*out` owns a new model.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum TaStatus ta_model_load(const char *path, struct TaModel **out);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must come from `ta_model_load` and not be freed twice.
void ta_model_free(struct TaModel *model);

// Writes topic count, vocabulary size, embedding width and hidden width.
// Any output pointer may be null.
//
// # Safety
// `model` must be a live handle; non-null outputs must be writable.
enum TaStatus ta_model_dims(const struct TaModel *model,
                            size_t *topics,
                            size_t *vocab,
                            size_t *embedding,
                            size_t *hidden);

// Hash of the vocabulary the model was trained on.
//
// # Safety
// `model` must be a live handle and `out` writable.
enum TaStatus ta_model_vocab_hash(const struct TaModel *model, uint64_t *out);

// Topic proportions for one document given as dense word counts over the
// model vocabulary. `theta_out` receives `topics` values.
//
// # Safety
// `counts` must hold `vocab` values and `theta_out` room for `topics`.
enum TaStatus ta_model_infer_theta(const struct TaModel *model,
                                   const double *counts,
                                   size_t vocab,
                                   double *theta_out,
                                   size_t topics);

// `KL(p || q)` for two distributions of length `n`.
//
// # Safety
// `p` and `q` must hold `n` values and `out` be writable.
enum TaStatus ta_kl_divergence(const double *p, const double *q, size_t n, double *out);

// Sharpens a row-major `docs x topics` soft-label matrix into `out`
// (same shape).
//
// # Safety
// `labels` and `out` must each hold `docs * topics` values.
enum TaStatus ta_sharpen_soft_labels(const double *labels, size_t docs, size_t topics, double *out);

// Runs training from a TOML run config, as the `train` command does.
//
// # Safety
// `config_path` must be a NUL-terminated string.
enum TaStatus ta_train(const char *config_path);

// Evaluates the model named by a run config. Writes coherence, diversity
// and quality; any output pointer may be null.
//
// # Safety
// `config_path` must be a NUL-terminated string; non-null outputs writable.
enum TaStatus ta_eval(const char *config_path,
                      double *coherence,
                      double *diversity,
                      double *quality);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TOPICADAPT_H */
