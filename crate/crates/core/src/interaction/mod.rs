//! Tactile gestures, constrained speech and phrase selection.

pub mod gesture;
pub mod phrases;
pub mod speech;

pub use gesture::{
    classify_presses, Button, ButtonEdge, EdgeKind, Gesture, GestureClassifier, GestureKind, InputAnomaly, RawPress,
    Thresholds,
};
pub use phrases::{PhrasePicker, Pool};
pub use speech::{run_speech_prompt, Heard, PromptInput, SpeechManager, SpeechOutcome, SpeechPrompt, Vocabulary};
