//! Scripted-events files: console input with a virtual timestamp per line.
//!
//! Each line is a console message body plus `at`, so a recorded live
//! session replays unchanged in fast mode:
//!
//! ```text
//! {"schema":"rehabot.events","version":1}
//! {"at":78500,"kind":"ButtonDown","button":"Middle"}
//! {"at":78600,"kind":"ButtonUp","button":"Middle"}
//! {"at":95000,"kind":"SpeechText","text":"go"}
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::runtime::{Engine, Input};
use crate::time::Millis;

pub const EVENTS_SCHEMA: &str = "rehabot.events";
pub const EVENTS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedInput {
    pub at: Millis,
    #[serde(flatten)]
    pub input: Input,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {reason}")]
pub struct ScriptError {
    pub line: usize,
    pub reason: String,
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
}

pub fn render_events(inputs: &[ScriptedInput]) -> String {
    let header = Header {
        schema: EVENTS_SCHEMA.into(),
        version: EVENTS_VERSION,
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for i in inputs {
        out.push_str(&serde_json::to_string(i).expect("input serializes"));
        out.push('\n');
    }
    out
}

/// Parses an events file. Blank lines are skipped; timestamps must not
/// decrease.
pub fn parse_events(text: &str) -> Result<Vec<ScriptedInput>, ScriptError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let err = |line: usize, reason: String| ScriptError { line: line + 1, reason };
    let (n, first) = lines.next().ok_or_else(|| err(0, "missing header".into()))?;
    let header: Header = serde_json::from_str(first).map_err(|e| err(n, format!("bad header: {e}")))?;
    if header.schema != EVENTS_SCHEMA {
        return Err(err(n, format!("schema is {:?}, expected {EVENTS_SCHEMA:?}", header.schema)));
    }
    if header.version != EVENTS_VERSION {
        return Err(err(n, format!("unsupported version {}", header.version)));
    }
    let mut out: Vec<ScriptedInput> = Vec::new();
    for (n, line) in lines {
        let input: ScriptedInput = serde_json::from_str(line).map_err(|e| err(n, e.to_string()))?;
        if let Some(prev) = out.last() {
            if input.at < prev.at {
                return Err(err(n, format!("timestamp {} before {}", input.at.0, prev.at.0)));
            }
        }
        out.push(input);
    }
    Ok(out)
}

/// Queues a whole script on an engine.
pub fn load_into(engine: &mut Engine, inputs: &[ScriptedInput]) {
    for i in inputs {
        engine.submit(i.at, i.input.clone());
    }
}
