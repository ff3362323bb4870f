#ifndef EFG_H
#define EFG_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum EfgStatus {
  EFG_STATUS_OK = 0,
  EFG_STATUS_NULL_POINTER = 1,
  EFG_STATUS_INVALID_UTF8 = 2,
  EFG_STATUS_PARSE_ERROR = 3,
  EFG_STATUS_VALIDATION_ERROR = 4,
  EFG_STATUS_INVALID_ARGUMENT = 5,
  EFG_STATUS_ZERO_MASS = 6,
  EFG_STATUS_NOT_A_TREE = 7,
  EFG_STATUS_BUFFER_TOO_SMALL = 8,
  EFG_STATUS_PANIC = 9,
} EfgStatus;

typedef enum EfgKind {
  EFG_KIND_FACTOR_GRAPH = 0,
  EFG_KIND_BAYES_NET = 1,
  EFG_KIND_MARKOV_NET = 2,
} EfgKind;

typedef enum EfgMethod {
  EFG_METHOD_ENUMERATE = 0,
  EFG_METHOD_SUM_PRODUCT = 1,
} EfgMethod;

// A parsed model together with its factor graph form.
typedef struct EfgModel EfgModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null after a
// success. Valid until the next library call on the same thread.
const char *efg_last_error(void);

// Parses fgx, bn or mrf text into a new model handle.
//
// # Safety
// `text` must be a nul-terminated string and `out_model` a writable pointer.
enum EfgStatus efg_model_parse(const char *text, struct EfgModel **out_model);

// Releases a model handle. Null is ignored.
//
// # Safety
// `model` must come from this library and not be used afterwards.
void efg_model_free(struct EfgModel *model);

// Kind of file the model was read as.
//
// # Safety
// Pointers must be valid or null.
enum EfgStatus efg_model_kind(const struct EfgModel *model, enum EfgKind *out_kind);

// Variable, function and edge counts of the factor graph form.
//
// # Safety
// Pointers must be valid or null.
enum EfgStatus efg_model_counts(const struct EfgModel *model,
                                size_t *out_variables,
                                size_t *out_functions,
                                size_t *out_edges);

// Canonical text of the model. Free the result with `efg_string_free`.
//
// # Safety
// Pointers must be valid or null.
enum EfgStatus efg_model_serialize(const struct EfgModel *model, char **out_text);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void efg_string_free(char *s);

// Converts the model to another representation as a new handle.
//
// # Safety
// Pointers must be valid or null.
enum EfgStatus efg_model_convert(const struct EfgModel *model,
                                 enum EfgKind target,
                                 struct EfgModel **out_model);

// Local normalization check at tolerance `tol`.
//
// # Safety
// Pointers must be valid or null.
enum EfgStatus efg_check_normalization(const struct EfgModel *model,
                                       double tol,
                                       bool *out_passed,
                                       double *out_worst_deviation);

// Whether every path between the `x` and `y` sets is blocked given `given`.
//
// # Safety
// Each array must hold `len` nul-terminated strings; arrays may be null
// when their length is zero.
enum EfgStatus efg_separated(const struct EfgModel *model,
                             const char *const *x,
                             size_t x_len,
                             const char *const *y,
                             size_t y_len,
                             const char *const *given,
                             size_t given_len,
                             bool *out_separated);

// Writes `P(variable | evidence)` into `out_values`. When `capacity` is too
// small nothing is written except `out_len`, and `BufferTooSmall` is
// returned.
//
// # Safety
// `evidence_names` and `evidence_states` must each hold `evidence_len`
// entries; `out_values` must hold `capacity` doubles.
enum EfgStatus efg_marginal(const struct EfgModel *model,
                            const char *variable,
                            const char *const *evidence_names,
                            const size_t *evidence_states,
                            size_t evidence_len,
                            enum EfgMethod method,
                            double *out_values,
                            size_t capacity,
                            size_t *out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EFG_H */
