//! Console protocol messages.
//!
//! Every message is one JSON text frame carrying the protocol version `v`, a
//! per-connection, per-direction sequence number `seq`, and a `kind`.

use serde::{Deserialize, Serialize};

use crate::catalog::AssistanceKind;
use crate::cues::LedFrame;
use crate::orchestrator::{Command, Timed};
use crate::runtime::{Input, Snapshot};
use crate::telemetry::SessionSummary;
use crate::time::Millis;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub v: u32,
    pub seq: u64,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Envelope<T> {
    pub fn new(seq: u64, body: T) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            seq,
            body,
        }
    }
}

/// Console to engine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum FromConsole {
    /// Must be the first message on a connection.
    Hello {
        #[serde(default)]
        client: String,
    },
    ButtonDown {
        button: crate::interaction::Button,
    },
    ButtonUp {
        button: crate::interaction::Button,
    },
    SpeechText {
        text: String,
    },
    AssistanceDone,
    TherapistAbort,
    EngineerReset,
    SkipToFarewell,
}

impl FromConsole {
    /// The engine input this message carries; `None` for `Hello`.
    pub fn into_input(self) -> Option<Input> {
        Some(match self {
            FromConsole::Hello { .. } => return None,
            FromConsole::ButtonDown { button } => Input::ButtonDown { button },
            FromConsole::ButtonUp { button } => Input::ButtonUp { button },
            FromConsole::SpeechText { text } => Input::SpeechText { text },
            FromConsole::AssistanceDone => Input::AssistanceDone,
            FromConsole::TherapistAbort => Input::TherapistAbort,
            FromConsole::EngineerReset => Input::EngineerReset,
            FromConsole::SkipToFarewell => Input::SkipToFarewell,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "prompt")]
pub enum PromptBody {
    Assistance { assistance: AssistanceKind, script: String },
    Listening { vocabulary: String, window: Millis },
}

/// Engine to console.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ToConsole {
    StateUpdate {
        snapshot: Snapshot,
    },
    CueFrame {
        frame: LedFrame,
    },
    Utterance {
        at: Millis,
        text: String,
    },
    Prompt {
        at: Millis,
        #[serde(flatten)]
        prompt: PromptBody,
    },
    RepCount {
        at: Millis,
        n: u32,
    },
    SessionSummary {
        summary: SessionSummary,
    },
    /// The previous message could not be used; the connection stays up.
    Error {
        reason: String,
    },
    /// Sent before closing a connection that cannot be served.
    Refused {
        reason: String,
    },
}

/// Console-visible messages for a batch of executed commands.
pub fn messages_for(commands: &[Timed]) -> Vec<ToConsole> {
    commands
        .iter()
        .filter_map(|t| match &t.command {
            Command::Speak { text } => Some(ToConsole::Utterance {
                at: t.at,
                text: text.clone(),
            }),
            Command::RequestAssistance { assistance, script } => Some(ToConsole::Prompt {
                at: t.at,
                prompt: PromptBody::Assistance {
                    assistance: *assistance,
                    script: script.clone(),
                },
            }),
            Command::StartListening { vocabulary, window } => Some(ToConsole::Prompt {
                at: t.at,
                prompt: PromptBody::Listening {
                    vocabulary: vocabulary.name.clone(),
                    window: *window,
                },
            }),
            Command::CountRep { n } => Some(ToConsole::RepCount { at: t.at, n: *n }),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decoded {
    Message(u64, FromConsole),
    /// Wrong protocol version; the connection must be refused.
    VersionMismatch(u32),
    Malformed(String),
}

/// Parses one inbound frame.
pub fn decode(text: &str) -> Decoded {
    #[derive(Deserialize)]
    struct Version {
        v: u32,
    }
    match serde_json::from_str::<Version>(text) {
        Ok(Version { v }) if v != PROTOCOL_VERSION => return Decoded::VersionMismatch(v),
        Ok(_) => {}
        Err(e) => return Decoded::Malformed(e.to_string()),
    }
    match serde_json::from_str::<Envelope<FromConsole>>(text) {
        Ok(env) => Decoded::Message(env.seq, env.body),
        Err(e) => Decoded::Malformed(e.to_string()),
    }
}

pub fn encode(seq: u64, message: &ToConsole) -> String {
    serde_json::to_string(&Envelope::new(seq, message)).expect("messages serialize")
}

/// Per-connection inbound bookkeeping: handshake and sequence checks.
#[derive(Debug, Clone, Default)]
pub struct InboundState {
    greeted: bool,
    last_seq: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inbound {
    /// Handshake done; send the snapshot.
    Joined,
    Input(Input),
    Reply(String),
    Refuse(String),
}

impl InboundState {
    pub fn greeted(&self) -> bool {
        self.greeted
    }

    pub fn accept(&mut self, text: &str) -> Inbound {
        let (seq, msg) = match decode(text) {
            Decoded::Message(seq, msg) => (seq, msg),
            Decoded::VersionMismatch(v) => {
                return Inbound::Refuse(format!("protocol version {v} not supported; server speaks {PROTOCOL_VERSION}"))
            }
            Decoded::Malformed(reason) => return Inbound::Reply(reason),
        };
        if self.last_seq.is_some_and(|last| seq <= last) {
            return Inbound::Reply(format!("seq {seq} does not increase"));
        }
        self.last_seq = Some(seq);
        match (self.greeted, msg) {
            (false, FromConsole::Hello { .. }) => {
                self.greeted = true;
                Inbound::Joined
            }
            (false, _) => Inbound::Reply("expected Hello".into()),
            (true, FromConsole::Hello { .. }) => Inbound::Reply("already joined".into()),
            (true, msg) => Inbound::Input(msg.into_input().expect("not Hello")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::Button;

    #[test]
    fn decodes_console_messages() {
        let m = decode(r#"{"v":1,"seq":4,"kind":"ButtonDown","button":"Front"}"#);
        assert_eq!(m, Decoded::Message(4, FromConsole::ButtonDown { button: Button::Front }));
        assert_eq!(decode(r#"{"v":2,"seq":0,"kind":"Hello"}"#), Decoded::VersionMismatch(2));
        assert!(matches!(decode(r#"{"v":1,"seq":1,"kind":"Fly"}"#), Decoded::Malformed(_)));
        assert!(matches!(decode("not json"), Decoded::Malformed(_)));
    }

    #[test]
    fn handshake_and_sequence() {
        let mut s = InboundState::default();
        assert!(matches!(s.accept(r#"{"v":1,"seq":0,"kind":"AssistanceDone"}"#), Inbound::Reply(_)));
        assert_eq!(s.accept(r#"{"v":1,"seq":1,"kind":"Hello","client":"t"}"#), Inbound::Joined);
        assert_eq!(
            s.accept(r#"{"v":1,"seq":2,"kind":"SpeechText","text":"go"}"#),
            Inbound::Input(Input::SpeechText { text: "go".into() })
        );
        assert!(matches!(s.accept(r#"{"v":1,"seq":2,"kind":"AssistanceDone"}"#), Inbound::Reply(_)));
        assert!(matches!(s.accept(r#"{"v":0,"seq":9,"kind":"AssistanceDone"}"#), Inbound::Refuse(_)));
    }

    #[test]
    fn outbound_shape() {
        let text = encode(3, &ToConsole::RepCount { at: Millis(500), n: 2 });
        assert_eq!(text, r#"{"v":1,"seq":3,"kind":"RepCount","at":500,"n":2}"#);
        let p = encode(
            0,
            &ToConsole::Prompt {
                at: Millis(1),
                prompt: PromptBody::Listening {
                    vocabulary: "go".into(),
                    window: Millis(2000),
                },
            },
        );
        assert_eq!(
            p,
            r#"{"v":1,"seq":0,"kind":"Prompt","at":1,"prompt":"Listening","vocabulary":"go","window":2000}"#
        );
    }
}
