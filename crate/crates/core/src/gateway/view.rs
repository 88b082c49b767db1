//! What a console shows, as a pure fold over received messages.

use serde::{Deserialize, Serialize};

use super::wire::{PromptBody, ToConsole};
use crate::cues::LedFrame;
use crate::runtime::Snapshot;
use crate::telemetry::SessionSummary;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ViewModel {
    pub snapshot: Option<Snapshot>,
    pub frame: Option<LedFrame>,
    pub transcript: Vec<String>,
    pub rep: Option<u32>,
    /// Script of the assistance request still on screen.
    pub banner: Option<String>,
    pub summary: Option<SessionSummary>,
    pub errors: usize,
}

impl ViewModel {
    pub fn apply(&mut self, message: &ToConsole) {
        match message {
            ToConsole::StateUpdate { snapshot } => {
                if snapshot.awaiting.is_none_or(|a| !matches!(a, crate::orchestrator::Awaiting::Assistance(_))) {
                    self.banner = None;
                }
                self.rep = snapshot.last_rep;
                self.snapshot = Some(snapshot.clone());
            }
            ToConsole::CueFrame { frame } => self.frame = Some(*frame),
            ToConsole::Utterance { text, .. } => self.transcript.push(text.clone()),
            ToConsole::Prompt { prompt, .. } => {
                if let PromptBody::Assistance { script, .. } = prompt {
                    self.banner = Some(script.clone());
                }
            }
            ToConsole::RepCount { n, .. } => self.rep = Some(*n),
            ToConsole::SessionSummary { summary } => self.summary = Some(summary.clone()),
            ToConsole::Error { .. } | ToConsole::Refused { .. } => self.errors += 1,
        }
    }

    pub fn replay<'a>(messages: impl IntoIterator<Item = &'a ToConsole>) -> Self {
        let mut v = Self::default();
        for m in messages {
            v.apply(m);
        }
        v
    }
}
