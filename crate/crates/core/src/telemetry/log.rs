//! Append-only event log with schema checks, and its JSON-lines form.
//!
//! The file starts with a header object naming the schema and version,
//! followed by one event object per line.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::event::{EventKind, SessionEvent};
use crate::catalog::AssistanceKind;
use crate::time::Millis;

pub const LOG_SCHEMA: &str = "rehabot.session-log";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LogError {
    #[error("event {index} at {at} is earlier than the previous event at {last}")]
    NonMonotonicTimestamp { index: usize, at: Millis, last: Millis },
    #[error("event {index}: {reason}")]
    SchemaViolation { index: usize, reason: String },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
}

/// Validating append-only log.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    events: Vec<SessionEvent>,
    open: BTreeMap<AssistanceKind, usize>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn is_ended(&self) -> bool {
        matches!(
            self.events.last(),
            Some(SessionEvent {
                kind: EventKind::SessionEnded { .. },
                ..
            })
        )
    }

    pub fn last_at(&self) -> Option<Millis> {
        self.events.last().map(|e| e.at)
    }

    pub fn append(&mut self, event: SessionEvent) -> Result<(), LogError> {
        let index = self.events.len();
        let violation = |reason: &str| LogError::SchemaViolation {
            index,
            reason: reason.to_string(),
        };
        if let Some(last) = self.events.last() {
            if self.is_ended() {
                return Err(violation("event after SessionEnded"));
            }
            if event.at < last.at {
                return Err(LogError::NonMonotonicTimestamp {
                    index,
                    at: event.at,
                    last: last.at,
                });
            }
            if matches!(event.kind, EventKind::SessionStarted { .. }) {
                return Err(violation("second SessionStarted"));
            }
        } else if !matches!(event.kind, EventKind::SessionStarted { .. }) {
            return Err(violation("first event must be SessionStarted"));
        }
        match &event.kind {
            EventKind::AssistanceRequested { assistance } => {
                *self.open.entry(*assistance).or_default() += 1;
            }
            EventKind::AssistanceCompleted { assistance } => match self.open.get_mut(assistance) {
                Some(n) if *n > 0 => *n -= 1,
                _ => return Err(violation("AssistanceCompleted without a matching request")),
            },
            _ => {}
        }
        self.events.push(event);
        Ok(())
    }

    /// Replays events through the append checks.
    pub fn from_events(events: impl IntoIterator<Item = SessionEvent>) -> Result<Self, LogError> {
        let mut log = Self::new();
        for e in events {
            log.append(e)?;
        }
        Ok(log)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(render_log(&self.events).as_bytes())
    }
}

pub fn render_log(events: &[SessionEvent]) -> String {
    let mut out = serde_json::to_string(&Header {
        schema: LOG_SCHEMA.into(),
        version: LOG_VERSION,
    })
    .expect("header serializes");
    out.push('\n');
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("events serialize"));
        out.push('\n');
    }
    out
}

/// Parses a log file. Record-level problems are reported by line; the
/// events themselves are not checked here (see [`EventLog::from_events`]).
pub fn parse_log(text: &str) -> Result<Vec<SessionEvent>, LogError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or(LogError::Parse {
        line: 1,
        reason: "empty log".into(),
    })?;
    let header: Header = serde_json::from_str(first).map_err(|e| LogError::Parse {
        line: 1,
        reason: format!("bad header: {e}"),
    })?;
    if header.schema != LOG_SCHEMA || header.version != LOG_VERSION {
        return Err(LogError::Parse {
            line: 1,
            reason: format!(
                "unsupported log {} v{} (expected {LOG_SCHEMA} v{LOG_VERSION})",
                header.schema, header.version
            ),
        });
    }
    lines
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| LogError::Parse {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::ActivityId;
    use crate::telemetry::SessionStatus;

    fn ev(at: u64, kind: EventKind) -> SessionEvent {
        SessionEvent { at: Millis(at), kind }
    }

    fn started() -> SessionEvent {
        ev(
            0,
            EventKind::SessionStarted {
                patient: "Alex".into(),
                carer: "Jo".into(),
                program: vec![ActivityId::Bridge],
                seed: 1,
            },
        )
    }

    #[test]
    fn first_event_must_be_session_started() {
        let mut log = EventLog::new();
        let err = log.append(ev(0, EventKind::PausedAt)).unwrap_err();
        assert!(matches!(err, LogError::SchemaViolation { index: 0, .. }));
    }

    #[test]
    fn rep_after_set_start_is_accepted() {
        let mut log = EventLog::new();
        log.append(started()).unwrap();
        log.append(ev(
            5,
            EventKind::SetStarted {
                activity: ActivityId::Bridge,
                set: 1,
                reps: 5,
                speed: crate::config::SpeedSetting::Fast,
            },
        ))
        .unwrap();
        log.append(ev(9, EventKind::RepCounted { set: 1, rep: 3 })).unwrap();
    }

    #[test]
    fn nothing_after_session_ended() {
        let mut log = EventLog::new();
        log.append(started()).unwrap();
        log.append(ev(
            10,
            EventKind::SessionEnded {
                status: SessionStatus::Finished,
            },
        ))
        .unwrap();
        assert!(matches!(
            log.append(ev(11, EventKind::PausedAt)),
            Err(LogError::SchemaViolation { index: 2, .. })
        ));
    }

    #[test]
    fn timestamps_never_go_back() {
        let mut log = EventLog::new();
        log.append(ev(100, started().kind)).unwrap();
        assert!(matches!(
            log.append(ev(99, EventKind::PausedAt)),
            Err(LogError::NonMonotonicTimestamp { index: 1, .. })
        ));
    }

    #[test]
    fn completion_needs_request() {
        let mut log = EventLog::new();
        log.append(started()).unwrap();
        let done = |k| {
            ev(
                3,
                EventKind::AssistanceCompleted {
                    assistance: k,
                },
            )
        };
        assert!(log.append(done(AssistanceKind::KeepingPace)).is_err());
        log.append(ev(
            2,
            EventKind::AssistanceRequested {
                assistance: AssistanceKind::KeepingPace,
            },
        ))
        .unwrap();
        assert!(log.append(done(AssistanceKind::AuxiliaryAid)).is_err());
        log.append(done(AssistanceKind::KeepingPace)).unwrap();
    }

    #[test]
    fn jsonl_round_trip() {
        let events = vec![
            started(),
            ev(
                7,
                EventKind::GestureReceived {
                    gesture: crate::interaction::GestureKind::SingleTap(crate::interaction::Button::Front),
                },
            ),
            ev(
                8,
                EventKind::SpeechOutcome {
                    outcome: crate::interaction::SpeechOutcome::Matched("go".into()),
                },
            ),
            ev(9, EventKind::PausedAt),
            ev(
                10,
                EventKind::SessionEnded {
                    status: SessionStatus::Aborted,
                },
            ),
        ];
        let text = render_log(&events);
        assert!(text.starts_with("{\"schema\":\"rehabot.session-log\",\"version\":1}\n"));
        assert!(text.contains("{\"at\":9,\"kind\":\"PausedAt\"}"));
        assert_eq!(parse_log(&text).unwrap(), events);
    }
}
