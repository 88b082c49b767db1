#ifndef REHABOT_H
#define REHABOT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RbStatus {
  RB_STATUS_OK = 0,
  RB_STATUS_NULL_POINTER = 1,
  RB_STATUS_INVALID_UTF8 = 2,
  RB_STATUS_CONFIG_ERROR = 3,
  RB_STATUS_SCRIPT_ERROR = 4,
  RB_STATUS_INVALID_ARGUMENT = 5,
  RB_STATUS_SESSION_ENDED = 6,
  RB_STATUS_LOG_ERROR = 7,
  RB_STATUS_PANIC = 99,
} RbStatus;

typedef enum RbConfigErrorKind {
  RB_CONFIG_ERROR_KIND_NONE = 0,
  RB_CONFIG_ERROR_KIND_SYNTAX = 1,
  RB_CONFIG_ERROR_KIND_UNKNOWN_ACTIVITY = 2,
  RB_CONFIG_ERROR_KIND_CONSTRAINT_VIOLATION = 3,
  RB_CONFIG_ERROR_KIND_MISSING_FIELD = 4,
  RB_CONFIG_ERROR_KIND_INVALID_ENCODING = 5,
} RbConfigErrorKind;

typedef enum RbButton {
  RB_BUTTON_FRONT = 0,
  RB_BUTTON_MIDDLE = 1,
  RB_BUTTON_REAR = 2,
} RbButton;

typedef enum RbSignal {
  RB_SIGNAL_ASSISTANCE_DONE = 0,
  RB_SIGNAL_THERAPIST_ABORT = 1,
  RB_SIGNAL_ENGINEER_RESET = 2,
  RB_SIGNAL_SKIP_TO_FAREWELL = 3,
  RB_SIGNAL_SHUTDOWN = 4,
} RbSignal;

typedef enum RbFault {
  RB_FAULT_FALL_DURING_DANCE = 0,
  RB_FAULT_BATTERY_DRAIN = 1,
  RB_FAULT_UNRECOVERABLE_ERROR = 2,
} RbFault;

typedef enum RbSpeed {
  RB_SPEED_SLOW = 0,
  RB_SPEED_MEDIUM = 1,
  RB_SPEED_FAST = 2,
} RbSpeed;

/**
 * Opaque session handle.
 */
typedef struct RbSession RbSession;

/**
 * Where a config or script was rejected; zeroed on success.
 */
typedef struct RbDiagnostic {
  uint32_t line;
  uint32_t column;
  enum RbConfigErrorKind kind;
} RbDiagnostic;

/**
 * Flat view of the session state.
 */
typedef struct RbState {
  uint64_t now_ms;
  /**
   * Outer phase: 0 Idle, 1 LoadingConfig, 2 Greeting, 3 PositioningRequest,
   * 4 AssistanceRequest, 5 Demonstration, 6 SetActive, 7 SetRest,
   * 8 AwaitContinue, 9 ToyRelayActive, 10 FarewellDance, 11 Paused,
   * 12 Faulted, 13 Aborted, 14 Completed.
   */
  uint32_t phase;
  /**
   * Phase underneath any pause or fault, same codes.
   */
  uint32_t inner_phase;
  uint32_t program_index;
  uint32_t set_index;
  /**
   * Last counted rep of the current set, 0 if none.
   */
  uint32_t rep;
  enum RbSpeed speed;
  bool finished;
  uint64_t ignored_inputs;
  uint64_t engine_errors;
} RbState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Checks config text. On rejection fills `diag` and, when `message` is not
 * NULL, stores a description to be freed with `rb_string_free`.
 *
 * # Safety
 * `config` must be a NUL-terminated string; `diag` and `message` must be
 * NULL or valid for writes.
 */
enum RbStatus rb_config_validate(const char *config, struct RbDiagnostic *diag, char **message);

/**
 * Creates a session from config text and starts it at time zero.
 *
 * # Safety
 * `config` must be a NUL-terminated string; `out` must be valid for writes;
 * `diag` may be NULL.
 */
enum RbStatus rb_session_new(const char *config, struct RbSession **out, struct RbDiagnostic *diag);

/**
 * # Safety
 * `session` must be NULL or a handle from `rb_session_new` not yet freed.
 */
void rb_session_free(struct RbSession *session);

/**
 * Queues a button edge at virtual time `at_ms`.
 *
 * # Safety
 * `session` must be a live handle.
 */
enum RbStatus rb_session_button(struct RbSession *session,
                                uint64_t at_ms,
                                enum RbButton b,
                                bool down);

/**
 * Queues recognised speech text.
 *
 * # Safety
 * `session` must be a live handle; `utterance` a NUL-terminated string.
 */
enum RbStatus rb_session_say(struct RbSession *session, uint64_t at_ms, const char *utterance);

/**
 * # Safety
 * `session` must be a live handle.
 */
enum RbStatus rb_session_signal(struct RbSession *session, uint64_t at_ms, enum RbSignal signal);

/**
 * # Safety
 * `session` must be a live handle.
 */
enum RbStatus rb_session_inject_fault(struct RbSession *session,
                                      uint64_t at_ms,
                                      enum RbFault fault);

/**
 * Queues every input of a scripted-events file.
 *
 * # Safety
 * `session` must be a live handle; `events` a NUL-terminated string;
 * `diag` NULL or valid for writes (only `line` is set).
 */
enum RbStatus rb_session_load_events(struct RbSession *session,
                                     const char *events,
                                     struct RbDiagnostic *diag);

/**
 * Processes everything due up to virtual time `until_ms`.
 *
 * # Safety
 * `session` must be a live handle.
 */
enum RbStatus rb_session_run_until(struct RbSession *session, uint64_t until_ms);

/**
 * Runs until the session ends or waits on input that is not queued.
 *
 * # Safety
 * `session` must be a live handle.
 */
enum RbStatus rb_session_run_to_completion(struct RbSession *session);

/**
 * # Safety
 * `session` must be a live handle; `out` valid for writes.
 */
enum RbStatus rb_session_state(const struct RbSession *session, struct RbState *out);

/**
 * The session log as JSON lines, header first.
 *
 * # Safety
 * `session` must be a live handle; `out` valid for writes.
 */
enum RbStatus rb_session_log_jsonl(const struct RbSession *session, char **out);

/**
 * Summary of an ended session as a JSON document.
 *
 * # Safety
 * `session` must be a live handle; `out` valid for writes.
 */
enum RbStatus rb_session_summary_json(const struct RbSession *session, char **out);

/**
 * Per-rep duration in ms of a catalog exercise at a speed.
 *
 * # Safety
 * `activity` must be a NUL-terminated activity name; `out_ms` valid for writes.
 */
enum RbStatus rb_rep_duration(const char *activity, enum RbSpeed speed, uint64_t *out_ms);

/**
 * Static description of a status code; never freed.
 */
const char *rb_status_message(enum RbStatus status);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void rb_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REHABOT_H */
