//! Constrained speech interaction over a text channel.
//!
//! A prompt listens for one of a few one-word answers for a fixed window. A
//! match inside the window resolves it; a head tap while the window is open
//! falls back to touch; silence past the window times it out. After a
//! timeout the prompt lingers without a deadline and still accepts matches.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::time::Millis;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabularyEntry {
    pub token: String,
    pub synonyms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub name: String,
    pub entries: Vec<VocabularyEntry>,
}

impl Vocabulary {
    pub fn new(name: &str, entries: &[(&str, &[&str])]) -> Self {
        Self {
            name: name.to_string(),
            entries: entries
                .iter()
                .map(|(token, syn)| VocabularyEntry {
                    token: token.to_string(),
                    synonyms: syn.iter().map(|s| s.to_string()).collect(),
                })
                .collect(),
        }
    }

    pub fn go() -> Self {
        Self::new("go", &[("go", &["go"])])
    }

    pub fn yes_no() -> Self {
        Self::new(
            "yes_no",
            &[
                ("yes", &["yes", "yeah", "sure", "okay", "yep"]),
                ("no", &["no", "nope", "nah"]),
            ],
        )
    }

    /// Canonical token for an utterance, if any word in it is a synonym.
    /// Matching ignores case and surrounding punctuation.
    pub fn resolve(&self, utterance: &str) -> Option<&str> {
        utterance
            .split(|c: char| !c.is_alphanumeric() && c != '\'')
            .filter(|w| !w.is_empty())
            .find_map(|word| {
                let word = word.to_lowercase();
                self.entries
                    .iter()
                    .find(|e| e.synonyms.iter().any(|s| s.eq_ignore_ascii_case(&word)))
                    .map(|e| e.token.as_str())
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeechPrompt {
    pub vocabulary: Vocabulary,
    pub window: Millis,
    pub fallback_script: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "token")]
pub enum SpeechOutcome {
    Matched(String),
    TimedOut,
    FellBackToTactile,
}

/// What became of one heard utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Heard {
    /// Resolved the open window.
    Matched(String),
    /// Matched after the window had timed out.
    Late(String),
    /// Not in the vocabulary, dropped by the simulated recogniser, or nothing is listening.
    Ignored,
}

#[derive(Debug, Clone)]
struct Listening {
    vocabulary: Vocabulary,
    deadline: Option<Millis>,
}

/// Tracks the open listening window; lives inside the event loop.
#[derive(Debug, Clone, Default)]
pub struct SpeechManager {
    listening: Option<Listening>,
    false_negative: f64,
}

impl SpeechManager {
    pub fn new(false_negative: f64) -> Self {
        Self {
            listening: None,
            false_negative: false_negative.clamp(0.0, 1.0),
        }
    }

    pub fn start(&mut self, vocabulary: Vocabulary, at: Millis, window: Millis) {
        self.listening = Some(Listening {
            vocabulary,
            deadline: Some(at + window),
        });
    }

    pub fn stop(&mut self) {
        self.listening = None;
    }

    pub fn is_listening(&self) -> bool {
        self.listening.is_some()
    }

    pub fn window_open(&self) -> bool {
        self.listening.as_ref().is_some_and(|l| l.deadline.is_some())
    }

    pub fn deadline(&self) -> Option<Millis> {
        self.listening.as_ref().and_then(|l| l.deadline)
    }

    /// Handles text heard at `at`. A match strictly before the deadline
    /// resolves the prompt.
    pub fn hear<R: Rng>(&mut self, text: &str, at: Millis, rng: &mut R) -> Heard {
        let Some(l) = self.listening.as_ref() else {
            return Heard::Ignored;
        };
        let Some(token) = l.vocabulary.resolve(text).map(str::to_string) else {
            return Heard::Ignored;
        };
        if self.false_negative > 0.0 && rng.gen_bool(self.false_negative) {
            return Heard::Ignored;
        }
        let late = l.deadline.is_none_or(|d| at >= d);
        self.listening = None;
        if late {
            Heard::Late(token)
        } else {
            Heard::Matched(token)
        }
    }

    /// A head tap while the window is open ends the prompt by touch.
    pub fn tap(&mut self) -> Option<SpeechOutcome> {
        if self.window_open() {
            self.listening = None;
            Some(SpeechOutcome::FellBackToTactile)
        } else {
            self.listening = None;
            None
        }
    }

    /// Closes the window once the deadline has passed; the prompt lingers.
    pub fn expire(&mut self, now: Millis) -> Option<SpeechOutcome> {
        let l = self.listening.as_mut()?;
        match l.deadline {
            Some(d) if now >= d => {
                l.deadline = None;
                Some(SpeechOutcome::TimedOut)
            }
            _ => None,
        }
    }
}

/// Input on the speech prompt's channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PromptInput {
    Text(String),
    Tap,
}

/// Runs one prompt over time-ordered input, returning the outcome and when it
/// happened. Inputs after the outcome are not consumed.
pub fn run_speech_prompt<R: Rng>(
    prompt: &SpeechPrompt,
    start: Millis,
    inputs: &[(Millis, PromptInput)],
    rng: &mut R,
    false_negative: f64,
) -> (SpeechOutcome, Millis) {
    let mut m = SpeechManager::new(false_negative);
    m.start(prompt.vocabulary.clone(), start, prompt.window);
    let deadline = start + prompt.window;
    for (at, input) in inputs.iter().filter(|(at, _)| *at >= start) {
        if *at >= deadline {
            break;
        }
        match input {
            PromptInput::Text(t) => {
                if let Heard::Matched(token) = m.hear(t, *at, rng) {
                    return (SpeechOutcome::Matched(token), *at);
                }
            }
            PromptInput::Tap => return (SpeechOutcome::FellBackToTactile, *at),
        }
    }
    (m.expire(deadline).expect("window was open"), deadline)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn prompt(v: Vocabulary) -> SpeechPrompt {
        SpeechPrompt {
            vocabulary: v,
            window: Millis(2000),
            fallback_script: "You can also tap my head to continue.".into(),
        }
    }

    #[test]
    fn go_matches_inside_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = run_speech_prompt(
            &prompt(Vocabulary::go()),
            Millis(0),
            &[(Millis(1200), PromptInput::Text("go".into()))],
            &mut rng,
            0.0,
        );
        assert_eq!(out, (SpeechOutcome::Matched("go".into()), Millis(1200)));
    }

    #[test]
    fn silence_times_out_at_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = run_speech_prompt(&prompt(Vocabulary::go()), Millis(500), &[], &mut rng, 0.0);
        assert_eq!(out, (SpeechOutcome::TimedOut, Millis(2500)));
    }

    #[test]
    fn synonyms_resolve_to_canonical_token() {
        let v = Vocabulary::yes_no();
        assert_eq!(v.resolve("yep"), Some("yes"));
        assert_eq!(v.resolve("Yeah!"), Some("yes"));
        assert_eq!(v.resolve("  SURE "), Some("yes"));
        assert_eq!(v.resolve("nope"), Some("no"));
        assert_eq!(v.resolve("maybe"), None);
        assert_eq!(Vocabulary::go().resolve("Go!"), Some("go"));
    }

    #[test]
    fn tap_during_window_falls_back() {
        let mut m = SpeechManager::new(0.0);
        m.start(Vocabulary::go(), Millis(0), Millis(2000));
        assert_eq!(m.tap(), Some(SpeechOutcome::FellBackToTactile));
        assert!(!m.is_listening());
    }

    #[test]
    fn late_match_after_timeout() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = SpeechManager::new(0.0);
        m.start(Vocabulary::go(), Millis(0), Millis(2000));
        assert_eq!(m.expire(Millis(1999)), None);
        assert_eq!(m.expire(Millis(2000)), Some(SpeechOutcome::TimedOut));
        assert_eq!(m.expire(Millis(9000)), None);
        assert!(m.is_listening() && !m.window_open());
        assert_eq!(m.tap(), None);
        m.start(Vocabulary::go(), Millis(0), Millis(2000));
        m.expire(Millis(2000));
        assert_eq!(m.hear("go", Millis(5000), &mut rng), Heard::Late("go".into()));
    }

    #[test]
    fn match_at_deadline_instant_is_late() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = SpeechManager::new(0.0);
        m.start(Vocabulary::go(), Millis(0), Millis(2000));
        assert_eq!(m.hear("go", Millis(2000), &mut rng), Heard::Late("go".into()));
    }

    #[test]
    fn certain_false_negative_drops_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let out = run_speech_prompt(
            &prompt(Vocabulary::go()),
            Millis(0),
            &[(Millis(100), PromptInput::Text("go".into()))],
            &mut rng,
            1.0,
        );
        assert_eq!(out, (SpeechOutcome::TimedOut, Millis(2000)));
    }
}
