use serde::{Deserialize, Serialize};

use crate::catalog::AssistanceKind;
use crate::cues::CueEffect;
use crate::interaction::{GestureKind, Vocabulary};
use crate::robot::{FaultKind, Motion};
use crate::telemetry::SessionEvent;
use crate::time::Millis;

pub type TimerId = u64;

/// Inputs to the state machine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum EngineEvent {
    Gesture(GestureKind),
    /// A vocabulary match; `late` when it came after the window timed out.
    SpeechHeard {
        token: String,
        late: bool,
    },
    SpeechTimeout,
    TimerFired(TimerId),
    AssistanceDone,
    FaultInjected(FaultKind),
    EngineerReset,
    TherapistAbort,
    /// Abandon the rest of the program and go to the farewell dance.
    SkipToFarewell,
    /// The host is stopping; the session ends as interrupted.
    Shutdown,
}

/// Effects requested by the state machine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "cmd")]
pub enum Command {
    Speak { text: String },
    StartMotion { motion: Motion, duration: Millis },
    StopMotion,
    SetCue { effect: CueEffect },
    RequestAssistance { assistance: AssistanceKind, script: String },
    CountRep { n: u32 },
    StartListening { vocabulary: Vocabulary, window: Millis },
    StopListening,
    StartTimer { id: TimerId, due: Millis },
    CancelTimer { id: TimerId },
    LogEvent { event: SessionEvent },
}

/// A command and the virtual instant it takes effect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timed {
    pub at: Millis,
    #[serde(flatten)]
    pub command: Command,
}
