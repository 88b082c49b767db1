//! LED cue patterns.
//!
//! Blinking effects run at 2 Hz: a 500 ms period, phase-locked to the moment
//! the effect was set.

use serde::{Deserialize, Serialize};

use crate::time::Millis;

pub const PERIOD: Millis = Millis(500);
const HALF: u64 = 250;
const SWEEP_STEP: u64 = 125;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CueEffect {
    /// All head rings blink together: tap my head.
    PromptHeadTap,
    /// Front/rear rings alternate with the middle ring.
    PausedPattern,
    /// A light sweeps front to rear.
    SetupInProgress,
    /// Side LEDs lit: speak to me.
    ListenSideLeds,
    AllOff,
    /// Head rings blink and side LEDs are lit: tap or speak.
    PromptAndListen,
}

impl CueEffect {
    pub const ALL: [CueEffect; 6] = [
        CueEffect::PromptHeadTap,
        CueEffect::PausedPattern,
        CueEffect::SetupInProgress,
        CueEffect::ListenSideLeds,
        CueEffect::AllOff,
        CueEffect::PromptAndListen,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Leds {
    pub front_ring: bool,
    pub middle_ring: bool,
    pub rear_ring: bool,
    pub left_side: bool,
    pub right_side: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LedFrame {
    pub at: Millis,
    #[serde(flatten)]
    pub leds: Leds,
}

fn head(front: bool, middle: bool, rear: bool) -> Leds {
    Leds {
        front_ring: front,
        middle_ring: middle,
        rear_ring: rear,
        ..Leds::default()
    }
}

/// LED state of `effect` at `phase` ms after it was set.
pub fn pattern(effect: CueEffect, phase: Millis) -> Leds {
    let p = phase.0 % PERIOD.0;
    let first_half = p < HALF;
    match effect {
        CueEffect::PromptHeadTap => head(first_half, first_half, first_half),
        CueEffect::PausedPattern => head(first_half, !first_half, first_half),
        CueEffect::SetupInProgress => {
            let step = p / SWEEP_STEP;
            head(step == 0, step == 1, step == 2)
        }
        CueEffect::ListenSideLeds => Leds {
            left_side: true,
            right_side: true,
            ..Leds::default()
        },
        CueEffect::AllOff => Leds::default(),
        CueEffect::PromptAndListen => Leds {
            left_side: true,
            right_side: true,
            ..head(first_half, first_half, first_half)
        },
    }
}

/// Holds the active effect; frames are sampled on demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CueController {
    effect: CueEffect,
    since: Millis,
}

impl Default for CueController {
    fn default() -> Self {
        Self {
            effect: CueEffect::AllOff,
            since: Millis::ZERO,
        }
    }
}

impl CueController {
    pub fn set_effect(&mut self, effect: CueEffect, at: Millis) {
        self.effect = effect;
        self.since = at;
    }

    pub fn effect(&self) -> CueEffect {
        self.effect
    }

    pub fn since(&self) -> Millis {
        self.since
    }

    pub fn frame_at(&self, t: Millis) -> LedFrame {
        LedFrame {
            at: t,
            leds: pattern(self.effect, t.saturating_sub(self.since)),
        }
    }
}
