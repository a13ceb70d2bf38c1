#ifndef FUZZKB_H
#define FUZZKB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FuzzkbStatus {
  FUZZKB_STATUS_OK = 0,
  FUZZKB_STATUS_NULL_ARGUMENT = 1,
  FUZZKB_STATUS_INVALID_UTF8 = 2,
  FUZZKB_STATUS_IO = 3,
  FUZZKB_STATUS_PARSE = 4,
  FUZZKB_STATUS_QUERY = 5,
  FUZZKB_STATUS_CHECKPOINT = 6,
  FUZZKB_STATUS_INVALID = 7,
  FUZZKB_STATUS_PANIC = 8,
} FuzzkbStatus;

typedef enum FuzzkbTnorm {
  FUZZKB_TNORM_GODEL = 0,
  FUZZKB_TNORM_PRODUCT = 1,
  FUZZKB_TNORM_LUKASIEWICZ = 2,
} FuzzkbTnorm;

// A trained model together with the vocabulary it was trained on.
typedef struct FuzzkbModel FuzzkbModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Opens a model from a knowledge-base directory (containing
// `vocab.json`) and a checkpoint file.
//
// # Safety
// `kb_dir` and `checkpoint` must be NUL-terminated strings and `out` a
// valid pointer. On success `*out` owns a handle for
// [`fuzzkb_model_free`].
enum FuzzkbStatus fuzzkb_model_open(const char *kb_dir,
                                    const char *checkpoint,
                                    struct FuzzkbModel **out);

// # Safety
// `model` must come from [`fuzzkb_model_open`] and not be used afterwards.
// Null is ignored.
void fuzzkb_model_free(struct FuzzkbModel *model);

// # Safety
// `model` must be a live handle or null (returns 0).
size_t fuzzkb_model_num_entities(const struct FuzzkbModel *model);

// # Safety
// `model` must be a live handle or null (returns 0).
size_t fuzzkb_model_num_concepts(const struct FuzzkbModel *model);

// Answers a query written in the s-expression syntax, producing a JSON
// array of `{level, id, name, score}` objects: the top `k` entities then
// the top `k` concepts.
//
// # Safety
// `model` must be a live handle, `query` a NUL-terminated string and
// `out_json` a valid pointer. The string written to `*out_json` must be
// released with [`fuzzkb_string_free`].
enum FuzzkbStatus fuzzkb_answer_json(const struct FuzzkbModel *model,
                                     const char *query,
                                     uint32_t k,
                                     char **out_json);

// # Safety
// `s` must come from this library and not be used afterwards. Null is
// ignored.
void fuzzkb_string_free(char *s);

// Message for the most recent failure on the calling thread, or null.
// Valid until the next failing call on the same thread.
const char *fuzzkb_last_error(void);

// Applies a t-norm (`disjunction == 0`) or its dual t-conorm to two
// membership degrees in [0, 1].
//
// # Safety
// `out` must be a valid pointer.
enum FuzzkbStatus fuzzkb_tnorm(enum FuzzkbTnorm kind,
                               uint8_t disjunction,
                               double x,
                               double y,
                               double *out);

// Library version as a static NUL-terminated string.
const char *fuzzkb_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FUZZKB_H */
