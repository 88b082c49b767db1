use serde::{Deserialize, Serialize};

use crate::catalog::AssistanceKind;
use crate::config::SpeedSetting;
use crate::robot::FaultKind;

/// What a continue prompt leads to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Continue {
    /// After the greeting, into the first activity.
    StartProgram,
    /// After a demonstration, into the first set.
    StartSet,
    /// After an activity, into the next one.
    NextActivity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GreetingStage {
    Speaking,
    AwaitingGo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FarewellStage {
    Question,
    Dancing,
    Recovering,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    LoadingConfig,
    Greeting(GreetingStage),
    PositioningRequest,
    AssistanceRequest(AssistanceKind),
    Demonstration,
    /// `rep` is the repetition in progress, 1-based.
    SetActive {
        rep: u32,
    },
    SetRest,
    AwaitContinue(Continue),
    ToyRelayActive {
        round: u32,
    },
    FarewellDance(FarewellStage),
    Paused(Box<Phase>),
    Faulted {
        fault: FaultKind,
        resume_to: Box<Phase>,
    },
    Aborted,
    Completed,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Idle => "Idle",
            Phase::LoadingConfig => "LoadingConfig",
            Phase::Greeting(_) => "Greeting",
            Phase::PositioningRequest => "PositioningRequest",
            Phase::AssistanceRequest(_) => "AssistanceRequest",
            Phase::Demonstration => "Demonstration",
            Phase::SetActive { .. } => "SetActive",
            Phase::SetRest => "SetRest",
            Phase::AwaitContinue(_) => "AwaitContinue",
            Phase::ToyRelayActive { .. } => "ToyRelayActive",
            Phase::FarewellDance(_) => "FarewellDance",
            Phase::Paused(_) => "Paused",
            Phase::Faulted { .. } => "Faulted",
            Phase::Aborted => "Aborted",
            Phase::Completed => "Completed",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Phase::Aborted | Phase::Completed)
    }

    /// The phase underneath any pause or fault.
    pub fn innermost(&self) -> &Phase {
        match self {
            Phase::Paused(inner) => inner.innermost(),
            Phase::Faulted { resume_to, .. } => resume_to.innermost(),
            other => other,
        }
    }

    /// Stable numeric code, used across the C ABI.
    pub fn code(&self) -> u32 {
        match self {
            Phase::Idle => 0,
            Phase::LoadingConfig => 1,
            Phase::Greeting(_) => 2,
            Phase::PositioningRequest => 3,
            Phase::AssistanceRequest(_) => 4,
            Phase::Demonstration => 5,
            Phase::SetActive { .. } => 6,
            Phase::SetRest => 7,
            Phase::AwaitContinue(_) => 8,
            Phase::ToyRelayActive { .. } => 9,
            Phase::FarewellDance(_) => 10,
            Phase::Paused(_) => 11,
            Phase::Faulted { .. } => 12,
            Phase::Aborted => 13,
            Phase::Completed => 14,
        }
    }
}

/// Position in the program. `set_index` is 0 until the first set starts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cursor {
    pub program_index: usize,
    pub set_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrchestratorState {
    pub phase: Phase,
    pub cursor: Cursor,
    pub effective_speed: SpeedSetting,
}

/// What the session is blocked on, for whoever plays the human side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Awaiting {
    /// A keep-pace prompt: tap or say "go".
    Continue { next: ContinueKind, listening: bool },
    Assistance(AssistanceKind),
    /// Toy relay: tap once the toy is back.
    RelayReturn { round: u32 },
    /// Open question before the farewell dance.
    FarewellAnswer,
    Paused,
    Faulted(FaultKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContinueKind {
    StartProgram,
    StartSet,
    NextSet,
    NextActivity,
}
