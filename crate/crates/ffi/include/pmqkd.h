#ifndef PMQKD_H
#define PMQKD_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define PMQKD_OK 0

#define PMQKD_E_DOMAIN 2

#define PMQKD_E_UNDEFINED_RATE 3

#define PMQKD_E_NO_DATA 4

#define PMQKD_E_SCHEMA 5

#define PMQKD_E_USAGE 6

#define PMQKD_E_IO 7

#define PMQKD_E_SERIALIZE 8

// A required pointer argument was null.
#define PMQKD_E_NULL 100

// A string argument was not valid UTF-8.
#define PMQKD_E_UTF8 101

// The engine panicked; the handle arguments should be considered lost.
#define PMQKD_E_PANIC 102

// Protocol and channel settings.
typedef struct PmqkdParams PmqkdParams;

// Measured or simulated tally with its run metadata.
typedef struct PmqkdRecord PmqkdRecord;

// Key-rate evaluation with every intermediate bound.
typedef struct PmqkdResult PmqkdResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null. The pointer
// stays valid until the next `pmqkd_*` call on the same thread.
const char *pmqkd_last_error(void);

// Library version as a static NUL-terminated string.
const char *pmqkd_version(void);

// Default settings at a total channel loss (dB) and total intensity.
//
// # Safety
// `out` must be null or valid for writes.
int32_t pmqkd_params_new(double loss_db, double mu, struct PmqkdParams **out);

// Settings from a JSON object with the same fields as the JSON the
// library emits.
//
// # Safety
// `text` must be null or a NUL-terminated string; `out` null or writable.
int32_t pmqkd_params_from_json(const char *text, struct PmqkdParams **out);

// Settings as JSON.
//
// # Safety
// `params` must be null or a live handle; `out` null or writable.
int32_t pmqkd_params_to_json(const struct PmqkdParams *params, char **out);

// Total intensity. The handle is unchanged if the value is rejected.
//
// # Safety
// `params` must be null or a live handle.
int32_t pmqkd_params_set_mu(struct PmqkdParams *params, double value);

// Number of rounds N. The handle is unchanged if the value is rejected.
//
// # Safety
// `params` must be null or a live handle.
int32_t pmqkd_params_set_n_rounds(struct PmqkdParams *params, double value);

// Test-sample fraction. The handle is unchanged if the value is rejected.
//
// # Safety
// `params` must be null or a live handle.
int32_t pmqkd_params_set_p_s(struct PmqkdParams *params, double value);

// Phase slices M. The handle is unchanged if the value is rejected.
//
// # Safety
// `params` must be null or a live handle.
int32_t pmqkd_params_set_m_slices(struct PmqkdParams *params, uint32_t value);

// Error-correction efficiency. The handle is unchanged if the value is rejected.
//
// # Safety
// `params` must be null or a live handle.
int32_t pmqkd_params_set_f_ec(struct PmqkdParams *params, double value);

// # Safety
// `params` must be null or a handle not yet freed.
void pmqkd_params_free(struct PmqkdParams *params);

// Key rate from the channel model.
//
// # Safety
// `params` must be null or a live handle; `out` null or writable.
int32_t pmqkd_keyrate(const struct PmqkdParams *params, struct PmqkdResult **out);

// Maximizes the rate over `mu` and `p_s` with default bounds and search
// settings. Any out-pointer may be null.
//
// # Safety
// `params` must be null or a live handle; out-pointers null or writable.
int32_t pmqkd_optimize(const struct PmqkdParams *params,
                       double *mu_opt,
                       double *p_s_opt,
                       double *rate_opt);

// Secret-key bits per round.
//
// # Safety
// `result` must be null or a live handle; `out` null or writable.
int32_t pmqkd_result_rate(const struct PmqkdResult *result, double *out);

// The full evaluation (inputs, bounds, budget, notes) as JSON.
//
// # Safety
// `result` must be null or a live handle; `out` null or writable.
int32_t pmqkd_result_to_json(const struct PmqkdResult *result, char **out);

// # Safety
// `result` must be null or a handle not yet freed.
void pmqkd_result_free(struct PmqkdResult *result);

// Monte Carlo run of `params.n_rounds` rounds.
//
// # Safety
// `params` must be null or a live handle; `out` null or writable.
int32_t pmqkd_simulate(const struct PmqkdParams *params, uint64_t seed, struct PmqkdRecord **out);

// Parses a tally in the CSV exchange format.
//
// # Safety
// `text` must be null or a NUL-terminated string; `out` null or writable.
int32_t pmqkd_record_from_csv(const char *text, struct PmqkdRecord **out);

// Serializes a tally to the CSV exchange format.
//
// # Safety
// `record` must be null or a live handle; `out` null or writable.
int32_t pmqkd_record_to_csv(const struct PmqkdRecord *record, char **out);

// Key rate from counts, treating rows as the sifted key and using the
// default security budget and conventions of `params`.
//
// # Safety
// Handles must be null or live; `out` null or writable.
int32_t pmqkd_reproduce(const struct PmqkdRecord *record,
                        const struct PmqkdParams *params,
                        struct PmqkdResult **out);

// # Safety
// `record` must be null or a handle not yet freed.
void pmqkd_record_free(struct PmqkdRecord *record);

// Releases a string returned by this library.
//
// # Safety
// `s` must be null or a string from this library not yet freed.
void pmqkd_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PMQKD_H */
