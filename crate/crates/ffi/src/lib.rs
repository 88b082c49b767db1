//! C ABI for the session engine.
//!
//! Sessions are opaque `RbSession` handles. Every fallible call returns an
//! [`RbStatus`]; strings handed out must be released with
//! [`rb_string_free`], sessions with [`rb_session_free`].

use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rehabot::catalog::{rep_duration, Catalog};
use rehabot::config::{parse_config_bytes, ConfigError, ConfigErrorKind, SpeedSetting};
use rehabot::interaction::Button;
use rehabot::robot::FaultKind;
use rehabot::runtime::{Engine, Input};
use rehabot::script::{load_into, parse_events};
use rehabot::telemetry::{render_log, summarize};
use rehabot::time::Millis;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ConfigError = 3,
    ScriptError = 4,
    InvalidArgument = 5,
    SessionEnded = 6,
    LogError = 7,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbConfigErrorKind {
    None = 0,
    Syntax = 1,
    UnknownActivity = 2,
    ConstraintViolation = 3,
    MissingField = 4,
    InvalidEncoding = 5,
}

/// Where a config or script was rejected; zeroed on success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RbDiagnostic {
    pub line: u32,
    pub column: u32,
    pub kind: RbConfigErrorKind,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbButton {
    Front = 0,
    Middle = 1,
    Rear = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbSpeed {
    Slow = 0,
    Medium = 1,
    Fast = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbSignal {
    AssistanceDone = 0,
    TherapistAbort = 1,
    EngineerReset = 2,
    SkipToFarewell = 3,
    Shutdown = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbFault {
    FallDuringDance = 0,
    BatteryDrain = 1,
    UnrecoverableError = 2,
}

/// Flat view of the session state.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RbState {
    pub now_ms: u64,
    /// Outer phase: 0 Idle, 1 LoadingConfig, 2 Greeting, 3 PositioningRequest,
    /// 4 AssistanceRequest, 5 Demonstration, 6 SetActive, 7 SetRest,
    /// 8 AwaitContinue, 9 ToyRelayActive, 10 FarewellDance, 11 Paused,
    /// 12 Faulted, 13 Aborted, 14 Completed.
    pub phase: u32,
    /// Phase underneath any pause or fault, same codes.
    pub inner_phase: u32,
    pub program_index: u32,
    pub set_index: u32,
    /// Last counted rep of the current set, 0 if none.
    pub rep: u32,
    pub speed: RbSpeed,
    pub finished: bool,
    pub ignored_inputs: u64,
    pub engine_errors: u64,
}

impl Default for RbSpeed {
    fn default() -> Self {
        RbSpeed::Medium
    }
}

/// Opaque session handle.
pub struct RbSession {
    engine: Engine,
}

fn guard(f: impl FnOnce() -> RbStatus) -> RbStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(RbStatus::Panic)
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, RbStatus> {
    if p.is_null() {
        return Err(RbStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| RbStatus::InvalidUtf8)
}

fn diagnostic(e: &ConfigError) -> RbDiagnostic {
    RbDiagnostic {
        line: e.line as u32,
        column: e.column as u32,
        kind: match e.kind {
            ConfigErrorKind::Syntax(_) => RbConfigErrorKind::Syntax,
            ConfigErrorKind::UnknownActivity(_) => RbConfigErrorKind::UnknownActivity,
            ConfigErrorKind::ConstraintViolation(_) => RbConfigErrorKind::ConstraintViolation,
            ConfigErrorKind::MissingField(_) => RbConfigErrorKind::MissingField,
            ConfigErrorKind::InvalidEncoding => RbConfigErrorKind::InvalidEncoding,
        },
    }
}

const NO_DIAGNOSTIC: RbDiagnostic = RbDiagnostic {
    line: 0,
    column: 0,
    kind: RbConfigErrorKind::None,
};

unsafe fn give_string(s: String, out: *mut *mut c_char) -> RbStatus {
    match CString::new(s) {
        Ok(c) => {
            *out = c.into_raw();
            RbStatus::Ok
        }
        Err(_) => RbStatus::InvalidArgument,
    }
}

unsafe fn set_diag(out: *mut RbDiagnostic, d: RbDiagnostic) {
    if !out.is_null() {
        *out = d;
    }
}

/// Checks config text. On rejection fills `diag` and, when `message` is not
/// NULL, stores a description to be freed with `rb_string_free`.
///
/// # Safety
/// `config` must be a NUL-terminated string; `diag` and `message` must be
/// NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rb_config_validate(
    config: *const c_char,
    diag: *mut RbDiagnostic,
    message: *mut *mut c_char,
) -> RbStatus {
    guard(|| {
        if config.is_null() {
            return RbStatus::NullPointer;
        }
        set_diag(diag, NO_DIAGNOSTIC);
        if !message.is_null() {
            *message = ptr::null_mut();
        }
        match parse_config_bytes(CStr::from_ptr(config).to_bytes()) {
            Ok(_) => RbStatus::Ok,
            Err(e) => {
                set_diag(diag, diagnostic(&e));
                if !message.is_null() {
                    give_string(e.to_string(), message);
                }
                RbStatus::ConfigError
            }
        }
    })
}

/// Creates a session from config text and starts it at time zero.
///
/// # Safety
/// `config` must be a NUL-terminated string; `out` must be valid for writes;
/// `diag` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn rb_session_new(
    config: *const c_char,
    out: *mut *mut RbSession,
    diag: *mut RbDiagnostic,
) -> RbStatus {
    guard(|| {
        if config.is_null() || out.is_null() {
            return RbStatus::NullPointer;
        }
        *out = ptr::null_mut();
        set_diag(diag, NO_DIAGNOSTIC);
        match parse_config_bytes(CStr::from_ptr(config).to_bytes()) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(RbSession {
                    engine: Engine::new(cfg),
                }));
                RbStatus::Ok
            }
            Err(e) => {
                set_diag(diag, diagnostic(&e));
                RbStatus::ConfigError
            }
        }
    })
}

/// # Safety
/// `session` must be NULL or a handle from `rb_session_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rb_session_free(session: *mut RbSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

unsafe fn with_session(session: *mut RbSession, f: impl FnOnce(&mut Engine) -> RbStatus) -> RbStatus {
    guard(|| match session.as_mut() {
        Some(s) => f(&mut s.engine),
        None => RbStatus::NullPointer,
    })
}

fn submit(engine: &mut Engine, at_ms: u64, input: Input) -> RbStatus {
    if engine.is_finished() {
        return RbStatus::SessionEnded;
    }
    engine.submit(Millis(at_ms), input);
    RbStatus::Ok
}

fn button(b: RbButton) -> Button {
    match b {
        RbButton::Front => Button::Front,
        RbButton::Middle => Button::Middle,
        RbButton::Rear => Button::Rear,
    }
}

/// Queues a button edge at virtual time `at_ms`.
///
/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rb_session_button(session: *mut RbSession, at_ms: u64, b: RbButton, down: bool) -> RbStatus {
    with_session(session, |e| {
        let button = button(b);
        let input = if down {
            Input::ButtonDown { button }
        } else {
            Input::ButtonUp { button }
        };
        submit(e, at_ms, input)
    })
}

/// Queues recognised speech text.
///
/// # Safety
/// `session` must be a live handle; `utterance` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rb_session_say(session: *mut RbSession, at_ms: u64, utterance: *const c_char) -> RbStatus {
    with_session(session, |e| match text(utterance) {
        Ok(t) => submit(e, at_ms, Input::SpeechText { text: t.to_string() }),
        Err(s) => s,
    })
}

/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rb_session_signal(session: *mut RbSession, at_ms: u64, signal: RbSignal) -> RbStatus {
    with_session(session, |e| {
        let input = match signal {
            RbSignal::AssistanceDone => Input::AssistanceDone,
            RbSignal::TherapistAbort => Input::TherapistAbort,
            RbSignal::EngineerReset => Input::EngineerReset,
            RbSignal::SkipToFarewell => Input::SkipToFarewell,
            RbSignal::Shutdown => Input::Shutdown,
        };
        submit(e, at_ms, input)
    })
}

/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rb_session_inject_fault(session: *mut RbSession, at_ms: u64, fault: RbFault) -> RbStatus {
    with_session(session, |e| {
        let fault = match fault {
            RbFault::FallDuringDance => FaultKind::FallDuringDance,
            RbFault::BatteryDrain => FaultKind::BatteryDrain,
            RbFault::UnrecoverableError => FaultKind::UnrecoverableError,
        };
        submit(e, at_ms, Input::InjectFault { fault })
    })
}

/// Queues every input of a scripted-events file.
///
/// # Safety
/// `session` must be a live handle; `events` a NUL-terminated string;
/// `diag` NULL or valid for writes (only `line` is set).
#[no_mangle]
pub unsafe extern "C" fn rb_session_load_events(
    session: *mut RbSession,
    events: *const c_char,
    diag: *mut RbDiagnostic,
) -> RbStatus {
    with_session(session, |e| {
        set_diag(diag, NO_DIAGNOSTIC);
        let t = match text(events) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_events(t) {
            Ok(inputs) => {
                load_into(e, &inputs);
                RbStatus::Ok
            }
            Err(err) => {
                set_diag(
                    diag,
                    RbDiagnostic {
                        line: err.line as u32,
                        column: 0,
                        kind: RbConfigErrorKind::None,
                    },
                );
                RbStatus::ScriptError
            }
        }
    })
}

/// Processes everything due up to virtual time `until_ms`.
///
/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rb_session_run_until(session: *mut RbSession, until_ms: u64) -> RbStatus {
    with_session(session, |e| {
        e.run_until(Millis(until_ms));
        RbStatus::Ok
    })
}

/// Runs until the session ends or waits on input that is not queued.
///
/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rb_session_run_to_completion(session: *mut RbSession) -> RbStatus {
    with_session(session, |e| {
        e.run_to_completion();
        RbStatus::Ok
    })
}

/// # Safety
/// `session` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rb_session_state(session: *const RbSession, out: *mut RbState) -> RbStatus {
    guard(|| {
        let (Some(s), false) = (session.as_ref(), out.is_null()) else {
            return RbStatus::NullPointer;
        };
        let e = &s.engine;
        let snap = e.snapshot();
        let stats = e.stats();
        *out = RbState {
            now_ms: e.now().0,
            phase: snap.state.phase.code(),
            inner_phase: snap.state.phase.innermost().code(),
            program_index: snap.state.cursor.program_index as u32,
            set_index: snap.state.cursor.set_index,
            rep: snap.last_rep.unwrap_or(0),
            speed: match snap.state.effective_speed {
                SpeedSetting::Slow => RbSpeed::Slow,
                SpeedSetting::Medium => RbSpeed::Medium,
                SpeedSetting::Fast => RbSpeed::Fast,
            },
            finished: e.is_finished(),
            ignored_inputs: stats.ignored_inputs,
            engine_errors: stats.engine_errors,
        };
        RbStatus::Ok
    })
}

/// The session log as JSON lines, header first.
///
/// # Safety
/// `session` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rb_session_log_jsonl(session: *const RbSession, out: *mut *mut c_char) -> RbStatus {
    guard(|| {
        let (Some(s), false) = (session.as_ref(), out.is_null()) else {
            return RbStatus::NullPointer;
        };
        give_string(render_log(s.engine.events()), out)
    })
}

/// Summary of an ended session as a JSON document.
///
/// # Safety
/// `session` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rb_session_summary_json(session: *const RbSession, out: *mut *mut c_char) -> RbStatus {
    guard(|| {
        let (Some(s), false) = (session.as_ref(), out.is_null()) else {
            return RbStatus::NullPointer;
        };
        match summarize(s.engine.events()) {
            Ok(summary) => give_string(serde_json::to_string(&summary).expect("summary serializes"), out),
            Err(_) => RbStatus::LogError,
        }
    })
}

/// Per-rep duration in ms of a catalog exercise at a speed.
///
/// # Safety
/// `activity` must be a NUL-terminated activity name; `out_ms` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rb_rep_duration(activity: *const c_char, speed: RbSpeed, out_ms: *mut u64) -> RbStatus {
    guard(|| {
        if out_ms.is_null() {
            return RbStatus::NullPointer;
        }
        let name = match text(activity) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let catalog = Catalog::builtin();
        let Ok(spec) = catalog.lookup_name(name) else {
            return RbStatus::InvalidArgument;
        };
        let speed = match speed {
            RbSpeed::Slow => SpeedSetting::Slow,
            RbSpeed::Medium => SpeedSetting::Medium,
            RbSpeed::Fast => SpeedSetting::Fast,
        };
        match rep_duration(spec, speed) {
            Ok(d) => {
                *out_ms = d.0;
                RbStatus::Ok
            }
            Err(_) => RbStatus::InvalidArgument,
        }
    })
}

/// Static description of a status code; never freed.
#[no_mangle]
pub extern "C" fn rb_status_message(status: RbStatus) -> *const c_char {
    let s: &'static CStr = match status {
        RbStatus::Ok => c"ok",
        RbStatus::NullPointer => c"null pointer argument",
        RbStatus::InvalidUtf8 => c"string is not valid UTF-8",
        RbStatus::ConfigError => c"config rejected",
        RbStatus::ScriptError => c"events script rejected",
        RbStatus::InvalidArgument => c"invalid argument",
        RbStatus::SessionEnded => c"session has ended",
        RbStatus::LogError => c"session log is incomplete or malformed",
        RbStatus::Panic => c"internal error",
    };
    s.as_ptr()
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const S11: &CStr = c"format_version = 1\npatient = Alex\ncarer = Jo\n\n[activity]\nid = StaticQuads\nsets = 1\nreps = 2\nspeed = fast\n";

    fn take(s: *mut c_char) -> String {
        let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
        unsafe { rb_string_free(s) };
        out
    }

    #[test]
    fn validate_reports_location() {
        let mut d = NO_DIAGNOSTIC;
        let mut msg = ptr::null_mut();
        let bad = c"format_version = 1\npatient = A\ncarer = B\n[activity]\nid = Flying\n";
        let st = unsafe { rb_config_validate(bad.as_ptr(), &mut d, &mut msg) };
        assert_eq!(st, RbStatus::ConfigError);
        assert_eq!((d.line, d.kind), (5, RbConfigErrorKind::UnknownActivity));
        assert!(take(msg).contains("Flying"));
        assert_eq!(unsafe { rb_config_validate(S11.as_ptr(), &mut d, ptr::null_mut()) }, RbStatus::Ok);
        assert_eq!(d, NO_DIAGNOSTIC);
        assert_eq!(unsafe { rb_config_validate(ptr::null(), &mut d, ptr::null_mut()) }, RbStatus::NullPointer);
    }

    #[test]
    fn drives_a_session() {
        let mut s = ptr::null_mut();
        assert_eq!(unsafe { rb_session_new(S11.as_ptr(), &mut s, ptr::null_mut()) }, RbStatus::Ok);
        unsafe {
            assert_eq!(rb_session_say(s, 78_500, c"go".as_ptr()), RbStatus::Ok);
            rb_session_signal(s, 100_000, RbSignal::AssistanceDone);
            rb_session_signal(s, 110_000, RbSignal::AssistanceDone);
            rb_session_button(s, 150_000, RbButton::Front, true);
            rb_session_button(s, 150_100, RbButton::Front, false);
            rb_session_run_until(s, 152_000);
            let mut st = RbState::default();
            rb_session_state(s, &mut st);
            assert_eq!((st.phase, st.speed, st.rep), (6, RbSpeed::Fast, 0));
            rb_session_run_to_completion(s);
            rb_session_state(s, &mut st);
            assert!(st.finished);
            assert_eq!(st.phase, 14);
            assert_eq!(rb_session_signal(s, 0, RbSignal::AssistanceDone), RbStatus::SessionEnded);
            let mut out = ptr::null_mut();
            assert_eq!(rb_session_summary_json(s, &mut out), RbStatus::Ok);
            assert!(take(out).contains(r#""completed":true"#));
            assert_eq!(rb_session_log_jsonl(s, &mut out), RbStatus::Ok);
            assert!(take(out).starts_with(r#"{"schema":"rehabot.session-log""#));
            rb_session_free(s);
        }
    }

    #[test]
    fn rep_durations() {
        let mut ms = 0;
        unsafe {
            assert_eq!(rb_rep_duration(c"StaticQuads".as_ptr(), RbSpeed::Slow, &mut ms), RbStatus::Ok);
            assert_eq!(ms, 5000);
            assert_eq!(rb_rep_duration(c"HipAbductionLaying".as_ptr(), RbSpeed::Fast, &mut ms), RbStatus::Ok);
            assert_eq!(ms, 7000);
            assert_eq!(rb_rep_duration(c"ToyRelay".as_ptr(), RbSpeed::Fast, &mut ms), RbStatus::InvalidArgument);
            assert_eq!(rb_rep_duration(c"Nope".as_ptr(), RbSpeed::Fast, &mut ms), RbStatus::InvalidArgument);
        }
    }

    #[test]
    fn bad_script_gives_line() {
        let mut s = ptr::null_mut();
        let mut d = NO_DIAGNOSTIC;
        unsafe {
            rb_session_new(S11.as_ptr(), &mut s, ptr::null_mut());
            let st = rb_session_load_events(s, c"{\"schema\":\"rehabot.events\",\"version\":1}\n{\"at\":1}\n".as_ptr(), &mut d);
            assert_eq!((st, d.line), (RbStatus::ScriptError, 2));
            rb_session_free(s);
        }
    }
}
