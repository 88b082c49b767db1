use serde::{Deserialize, Serialize};

use crate::catalog::{ActivityId, AssistanceKind};
use crate::config::SpeedSetting;
use crate::interaction::{Button, GestureKind, SpeechOutcome};
use crate::robot::FaultKind;
use crate::time::Millis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionStatus {
    /// The session ran to its goodbye.
    Finished,
    /// Therapist abort or unrecoverable fault.
    Aborted,
    /// The process stopped before the session ended.
    Interrupted,
}

/// One log record. Serialized as a flat JSON object: `{"at":…,"kind":…,…}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub at: Millis,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventKind {
    SessionStarted {
        patient: String,
        carer: String,
        program: Vec<ActivityId>,
        seed: u64,
    },
    ActivityStarted {
        index: usize,
        activity: ActivityId,
    },
    SetStarted {
        activity: ActivityId,
        set: u32,
        reps: u32,
        speed: SpeedSetting,
    },
    RepCounted {
        set: u32,
        rep: u32,
    },
    SetCompleted {
        set: u32,
    },
    /// A set cut short by abort or skip; `reps_done` were counted.
    SetAbandoned {
        set: u32,
        reps_done: u32,
    },
    ActivityCompleted {
        index: usize,
        activity: ActivityId,
    },
    AssistanceRequested {
        assistance: AssistanceKind,
    },
    AssistanceCompleted {
        assistance: AssistanceKind,
    },
    GestureReceived {
        gesture: GestureKind,
    },
    SpeechOutcome {
        #[serde(flatten)]
        outcome: SpeechOutcome,
    },
    /// A vocabulary match after the listening window had already timed out.
    LateSpeech {
        token: String,
    },
    SpeedChanged {
        from: SpeedSetting,
        to: SpeedSetting,
    },
    PausedAt,
    ResumedAt,
    FaultOccurred {
        fault: FaultKind,
    },
    EngineerIntervention,
    /// Input that has no meaning in the current state; dropped.
    IgnoredInput {
        input: String,
        state: String,
    },
    /// A button held past the stuck-button timeout got a generated release.
    InputSynthesized {
        button: Button,
    },
    SessionEnded {
        status: SessionStatus,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::SessionStarted { .. } => "SessionStarted",
            EventKind::ActivityStarted { .. } => "ActivityStarted",
            EventKind::SetStarted { .. } => "SetStarted",
            EventKind::RepCounted { .. } => "RepCounted",
            EventKind::SetCompleted { .. } => "SetCompleted",
            EventKind::SetAbandoned { .. } => "SetAbandoned",
            EventKind::ActivityCompleted { .. } => "ActivityCompleted",
            EventKind::AssistanceRequested { .. } => "AssistanceRequested",
            EventKind::AssistanceCompleted { .. } => "AssistanceCompleted",
            EventKind::GestureReceived { .. } => "GestureReceived",
            EventKind::SpeechOutcome { .. } => "SpeechOutcome",
            EventKind::LateSpeech { .. } => "LateSpeech",
            EventKind::SpeedChanged { .. } => "SpeedChanged",
            EventKind::PausedAt => "PausedAt",
            EventKind::ResumedAt => "ResumedAt",
            EventKind::FaultOccurred { .. } => "FaultOccurred",
            EventKind::EngineerIntervention => "EngineerIntervention",
            EventKind::IgnoredInput { .. } => "IgnoredInput",
            EventKind::InputSynthesized { .. } => "InputSynthesized",
            EventKind::SessionEnded { .. } => "SessionEnded",
        }
    }
}
