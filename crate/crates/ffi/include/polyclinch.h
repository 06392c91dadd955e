/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef POLYCLINCH_H
#define POLYCLINCH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum pc_status {
  PC_STATUS_OK = 0,
  PC_STATUS_NULL_ARGUMENT = 1,
  PC_STATUS_INVALID_UTF8 = 2,
  PC_STATUS_PARSE = 3,
  PC_STATUS_VALIDATION = 4,
  PC_STATUS_CONFIG = 5,
  PC_STATUS_CONTRACT_VIOLATION = 6,
  PC_STATUS_ENUMERATION_REFUSED = 7,
  PC_STATUS_OUT_OF_RANGE = 8,
  PC_STATUS_INTERNAL = 9,
  PC_STATUS_PANIC = 10,
} pc_status;

// A validated market instance.
typedef struct pc_instance pc_instance;

// Final allocation of one mechanism run.
typedef struct pc_outcome pc_outcome;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *pc_last_error(void);

// Library version as a static string.
const char *pc_version(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void pc_string_free(char *s);

// Parses and validates an instance document.
//
// # Safety
// `json` must be a nul-terminated string; `out` must be writable.
enum pc_status pc_instance_from_json(const char *json, struct pc_instance **out);

// # Safety
// `handle` must come from [`pc_instance_from_json`] or be null.
void pc_instance_free(struct pc_instance *handle);

// Number of real buyers, or 0 for a null handle.
//
// # Safety
// `handle` must be a live instance or null.
uintptr_t pc_instance_buyer_count(const struct pc_instance *handle);

// Number of sellers, or 0 for a null handle.
//
// # Safety
// `handle` must be a live instance or null.
uintptr_t pc_instance_seller_count(const struct pc_instance *handle);

// Runs the clinching auction with the sellers' bids as their values.
//
// # Safety
// `handle` must be a live instance; `out` must be writable.
enum pc_status pc_run_auction(const struct pc_instance *handle, struct pc_outcome **out);

// Runs the single-sample mechanism; every seller needs a sample.
//
// # Safety
// `handle` must be a live instance; `out` must be writable.
enum pc_status pc_run_single_sample(const struct pc_instance *handle, struct pc_outcome **out);

// # Safety
// `handle` must come from a run function or be null.
void pc_outcome_free(struct pc_outcome *handle);

// The whole outcome as a JSON document.
//
// # Safety
// `handle` must be a live outcome; `out` must be writable.
enum pc_status pc_outcome_json(const struct pc_outcome *handle, char **out);

// Goods and payment of real buyer `index`.
//
// # Safety
// `handle` must be a live outcome; `goods` and `payment` must be writable.
enum pc_status pc_outcome_buyer(const struct pc_outcome *handle,
                                uintptr_t index,
                                char **goods,
                                char **payment);

// Liquid welfare of the outcome under true valuations.
//
// # Safety
// `handle` must be a live outcome; `out` must be writable.
enum pc_status pc_outcome_liquid_welfare(const struct pc_outcome *handle, char **out);

// The optimal liquid welfare of the instance.
//
// # Safety
// `handle` must be a live instance; `out` must be writable.
enum pc_status pc_optimal_liquid_welfare(const struct pc_instance *handle, char **out);

// Checks the auction's guarantees on the instance. Writes the JSON report
// and the report's exit code (0 pass, 1 failure, 2 gated check skipped).
//
// # Safety
// `handle` must be a live instance; `report` and `exit_code` must be
// writable.
enum pc_status pc_verify(const struct pc_instance *handle, char **report, int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLYCLINCH_H */
