//! Session summaries and human-assistance aggregates computed from logs.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::event::{EventKind, SessionEvent, SessionStatus};
use super::log::EventLog;
use crate::catalog::{ActivityId, AssistanceKind};
use crate::robot::FaultKind;
use crate::time::Millis;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed log at event {index}: {reason}")]
pub struct MalformedLog {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub patient: String,
    pub exercises_programmed: Vec<ActivityId>,
    pub exercises_completed: Vec<ActivityId>,
    /// `mm:ss`, seconds truncated.
    pub duration: String,
    pub duration_ms: Millis,
    pub disruptions: Vec<FaultKind>,
    pub completed: bool,
    pub status: SessionStatus,
    pub assistance_requests: usize,
}

pub fn summarize(events: &[SessionEvent]) -> Result<SessionSummary, MalformedLog> {
    EventLog::from_events(events.iter().cloned()).map_err(|e| {
        let (index, reason) = match e {
            super::LogError::NonMonotonicTimestamp { index, .. } => (index, e.to_string()),
            super::LogError::SchemaViolation { index, ref reason } => (index, reason.clone()),
            super::LogError::Parse { line, ref reason } => (line, reason.clone()),
        };
        MalformedLog { index, reason }
    })?;
    let malformed = |index: usize, reason: &str| MalformedLog {
        index,
        reason: reason.to_string(),
    };
    let Some(first) = events.first() else {
        return Err(malformed(0, "empty log"));
    };
    let EventKind::SessionStarted { patient, program, .. } = &first.kind else {
        return Err(malformed(0, "first event must be SessionStarted"));
    };
    if program.is_empty() {
        return Err(malformed(0, "empty program"));
    }
    let last = events.last().expect("non-empty");
    let EventKind::SessionEnded { status } = last.kind else {
        return Err(malformed(events.len(), "log does not end with SessionEnded"));
    };

    let mut completed_ids = Vec::new();
    let mut completed_idx = Vec::new();
    let mut disruptions = Vec::new();
    let mut requests = 0;
    for (i, e) in events.iter().enumerate() {
        match &e.kind {
            EventKind::ActivityCompleted { index, activity } => {
                if program.get(*index) != Some(activity) {
                    return Err(malformed(i, "completed activity is not in the program at that index"));
                }
                if completed_idx.last().is_some_and(|&l| *index <= l) {
                    return Err(malformed(i, "activities completed out of program order"));
                }
                completed_idx.push(*index);
                completed_ids.push(*activity);
            }
            EventKind::FaultOccurred { fault } => disruptions.push(*fault),
            EventKind::AssistanceRequested { .. } => requests += 1,
            _ => {}
        }
    }
    let duration_ms = last.at - first.at;
    Ok(SessionSummary {
        patient: patient.clone(),
        exercises_programmed: program.clone(),
        completed: completed_idx.len() == program.len(),
        exercises_completed: completed_ids,
        duration: duration_ms.to_mm_ss(),
        duration_ms,
        disruptions,
        status,
        assistance_requests: requests,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionTotals {
    pub session: usize,
    pub total_ms: u64,
    pub occurrences: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindTotals {
    pub total_ms: u64,
    pub occurrences: usize,
    pub per_session: Vec<SessionTotals>,
}

impl KindTotals {
    pub fn mean_ms(&self) -> Option<u64> {
        (self.occurrences > 0).then(|| self.total_ms / self.occurrences as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unmatched {
    pub session: usize,
    pub event_index: usize,
    pub assistance: AssistanceKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssistanceReport {
    pub kinds: BTreeMap<AssistanceKind, KindTotals>,
    pub unmatched: Vec<Unmatched>,
}

impl AssistanceReport {
    pub fn get(&self, kind: AssistanceKind) -> &KindTotals {
        &self.kinds[&kind]
    }
}

/// Pairs each completion with the oldest open request of the same kind.
pub fn assistance_report(logs: &[Vec<SessionEvent>]) -> AssistanceReport {
    let mut report = AssistanceReport::default();
    for kind in AssistanceKind::ALL {
        report.kinds.insert(kind, KindTotals::default());
    }
    for (session, events) in logs.iter().enumerate() {
        let mut open: BTreeMap<AssistanceKind, VecDeque<(usize, Millis)>> = BTreeMap::new();
        let mut this: BTreeMap<AssistanceKind, SessionTotals> = BTreeMap::new();
        for (i, e) in events.iter().enumerate() {
            match e.kind {
                EventKind::AssistanceRequested { assistance } => {
                    open.entry(assistance).or_default().push_back((i, e.at));
                }
                EventKind::AssistanceCompleted { assistance } => {
                    if let Some((_, requested)) = open.get_mut(&assistance).and_then(VecDeque::pop_front) {
                        let t = this.entry(assistance).or_insert_with(|| SessionTotals {
                            session,
                            ..Default::default()
                        });
                        t.total_ms += e.at.saturating_sub(requested).0;
                        t.occurrences += 1;
                    }
                }
                _ => {}
            }
        }
        for (assistance, q) in open {
            for (event_index, _) in q {
                report.unmatched.push(Unmatched {
                    session,
                    event_index,
                    assistance,
                });
            }
        }
        for (kind, t) in this {
            let k = report.kinds.get_mut(&kind).expect("all kinds present");
            k.total_ms += t.total_ms;
            k.occurrences += t.occurrences;
            k.per_session.push(t);
        }
    }
    report
}

fn secs(ms: u64) -> String {
    format!("{}.{:01}", ms / 1000, (ms % 1000) / 100)
}

pub fn render_summary_table(summaries: &[SessionSummary]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<3} {:<12} {:>8}  {:<10} {:<9} {}",
        "#", "patient", "duration", "status", "complete", "exercises (completed/programmed)"
    );
    for (i, s) in summaries.iter().enumerate() {
        let labels: Vec<&str> = s
            .exercises_programmed
            .iter()
            .filter(|a| a.is_exercise())
            .map(|a| a.label())
            .collect();
        let done = s.exercises_completed.iter().filter(|a| a.is_exercise()).count();
        let _ = writeln!(
            out,
            "{:<3} {:<12} {:>8}  {:<10} {:<9} {}/{}: {}",
            i + 1,
            s.patient,
            s.duration,
            format!("{:?}", s.status),
            if s.completed { "yes" } else { "no" },
            done,
            labels.len(),
            labels.join(" / ")
        );
        for d in &s.disruptions {
            let _ = writeln!(out, "    disruption: {d:?}");
        }
    }
    out
}

pub fn render_assistance_table(report: &AssistanceReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:>11} {:>12} {:>10}",
        "assistance", "occurrences", "total (s)", "mean (s)"
    );
    for (kind, t) in &report.kinds {
        let _ = writeln!(
            out,
            "{:<16} {:>11} {:>12} {:>10}",
            kind.label(),
            t.occurrences,
            secs(t.total_ms),
            t.mean_ms().map_or("-".into(), secs)
        );
    }
    if !report.unmatched.is_empty() {
        let _ = writeln!(out, "unmatched requests: {}", report.unmatched.len());
        for u in &report.unmatched {
            let _ = writeln!(
                out,
                "    session {} event {}: {}",
                u.session + 1,
                u.event_index,
                u.assistance.label()
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(at: u64, kind: EventKind) -> SessionEvent {
        SessionEvent { at: Millis(at), kind }
    }

    fn start(program: Vec<ActivityId>) -> SessionEvent {
        ev(
            0,
            EventKind::SessionStarted {
                patient: "Alex".into(),
                carer: "Jo".into(),
                program,
                seed: 0,
            },
        )
    }

    fn end(at: u64, status: SessionStatus) -> SessionEvent {
        ev(at, EventKind::SessionEnded { status })
    }

    #[test]
    fn session_eleven_shape() {
        let program = vec![
            ActivityId::StaticQuads,
            ActivityId::QuadsOverRoll,
            ActivityId::LegRaises,
        ];
        let mut events = vec![start(program.clone())];
        for (i, a) in program.iter().enumerate() {
            events.push(ev(100 + i as u64, EventKind::ActivityStarted { index: i, activity: *a }));
            events.push(ev(200 + i as u64, EventKind::ActivityCompleted { index: i, activity: *a }));
        }
        events.sort_by_key(|e| e.at);
        events.push(end(1_035_000, SessionStatus::Finished));
        let s = summarize(&events).unwrap();
        assert_eq!(s.duration, "17:15");
        assert!(s.completed);
        assert_eq!(s.exercises_completed, program);
    }

    #[test]
    fn aborted_before_any_completion() {
        let s = summarize(&[start(vec![ActivityId::Bridge]), end(60_000, SessionStatus::Aborted)]).unwrap();
        assert!(!s.completed);
        assert!(s.exercises_completed.is_empty());
        assert_eq!(s.status, SessionStatus::Aborted);
        assert_eq!(s.duration, "01:00");
    }

    #[test]
    fn empty_program_is_malformed() {
        let err = summarize(&[start(vec![]), end(1, SessionStatus::Finished)]).unwrap_err();
        assert_eq!(err.index, 0);
        assert!(summarize(&[]).is_err());
        let err = summarize(&[start(vec![ActivityId::Bridge])]).unwrap_err();
        assert_eq!(err.index, 1);
    }

    #[test]
    fn posture_change_intervals_sum() {
        let mut events = vec![start(vec![ActivityId::HipAbductionOnSide])];
        let mut t = 1000;
        let intervals = [10_000u64, 20_000, 15_000];
        for d in intervals {
            events.push(ev(
                t,
                EventKind::AssistanceRequested {
                    assistance: AssistanceKind::PostureChange,
                },
            ));
            t += d;
            events.push(ev(
                t,
                EventKind::AssistanceCompleted {
                    assistance: AssistanceKind::PostureChange,
                },
            ));
            t += 500;
        }
        let report = assistance_report(&[events]);
        let pc = report.get(AssistanceKind::PostureChange);
        assert_eq!(pc.total_ms, intervals.iter().sum::<u64>());
        assert_eq!(pc.total_ms, 45_000);
        assert_eq!(pc.occurrences, 3);
        assert_eq!(report.get(AssistanceKind::Positioning).occurrences, 0);
        assert!(report.unmatched.is_empty());
    }

    #[test]
    fn open_requests_are_listed() {
        let events = vec![
            start(vec![ActivityId::Bridge]),
            ev(
                5,
                EventKind::AssistanceRequested {
                    assistance: AssistanceKind::Positioning,
                },
            ),
            end(9, SessionStatus::Aborted),
        ];
        let report = assistance_report(&[events]);
        assert_eq!(
            report.unmatched,
            vec![Unmatched {
                session: 0,
                event_index: 1,
                assistance: AssistanceKind::Positioning
            }]
        );
        assert!(render_assistance_table(&report).contains("unmatched requests: 1"));
    }
}
