//! A seeded stand-in for the patient and carer.
//!
//! The autopilot watches what the session is waiting for and answers after a
//! randomised human-like delay. Everything it does is recorded as a scripted
//! events file, so a run can be replayed exactly without it.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::AssistanceKind;
use crate::config::{SessionConfig, SpeedDirection};
use crate::interaction::{Button, Thresholds};
use crate::orchestrator::{Awaiting, ContinueKind, Phase};
use crate::robot::FaultKind;
use crate::runtime::{Engine, Input};
use crate::script::ScriptedInput;
use crate::time::Millis;

/// Random speed changes and pauses injected during sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Chaos {
    pub speed_change: f64,
    pub pause: f64,
}

/// Response delays in ms.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    /// Share of "go" prompts answered by voice inside the window.
    pub voice_share: f64,
    pub continue_delay: Range<u64>,
    pub voice_delay: Range<u64>,
    pub rest: Range<u64>,
    pub positioning: Range<u64>,
    pub auxiliary_aid: Range<u64>,
    pub posture_change: Range<u64>,
    pub relay_round: Range<u64>,
    pub pause_hold: Range<u64>,
    pub engineer: Range<u64>,
    pub chaos: Option<Chaos>,
    /// Give up after this much virtual time.
    pub horizon: Millis,
}

impl Default for Policy {
    fn default() -> Self {
        Self {
            voice_share: 0.5,
            continue_delay: 2_000..6_000,
            voice_delay: 400..1_800,
            rest: 60_000..120_000,
            positioning: 15_000..45_000,
            auxiliary_aid: 10_000..40_000,
            posture_change: 20_000..50_000,
            relay_round: 20_000..40_000,
            pause_hold: 5_000..30_000,
            engineer: 60_000..180_000,
            chaos: None,
            horizon: Millis::from_secs(6 * 3600),
        }
    }
}

impl Policy {
    pub fn with_chaos(speed_change: f64, pause: f64) -> Self {
        Self {
            chaos: Some(Chaos { speed_change, pause }),
            ..Self::default()
        }
    }
}

pub struct Autopilot {
    rng: ChaCha8Rng,
    policy: Policy,
    thresholds: Thresholds,
    handled: Option<u64>,
    seen_set: Option<(usize, u32)>,
    /// Spans during which buttons are in use, so gestures never interleave.
    reserved: Vec<(Millis, Millis)>,
    last_input: Millis,
    script: Vec<ScriptedInput>,
}

/// How long after its last input the pilot assumes an answer was lost.
const SETTLE: Millis = Millis(3_000);

impl Autopilot {
    pub fn new(config: &SessionConfig, seed: u64, policy: Policy) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2);
        Self {
            rng,
            policy,
            thresholds: Thresholds::from(&config.interaction),
            handled: None,
            seen_set: None,
            reserved: Vec::new(),
            last_input: Millis::ZERO,
            script: Vec::new(),
        }
    }

    /// Builds an engine for `config` and drives it to the end.
    pub fn run(config: SessionConfig, seed: u64, policy: Policy) -> (Engine, Vec<ScriptedInput>) {
        let mut pilot = Self::new(&config, seed, policy);
        let mut engine = Engine::new(config);
        pilot.drive(&mut engine);
        (engine, pilot.into_script())
    }

    pub fn script(&self) -> &[ScriptedInput] {
        &self.script
    }

    /// Recorded input, ordered by time.
    pub fn into_script(mut self) -> Vec<ScriptedInput> {
        self.script.sort_by_key(|s| s.at);
        self.script
    }

    pub fn drive(&mut self, engine: &mut Engine) {
        let mut retries = 0;
        while !engine.is_finished() && engine.now() < self.policy.horizon {
            self.react(engine);
            // The session still waits although every input so far has been
            // consumed: an answer was swallowed (e.g. by a pause), so answer
            // again rather than idle until the battery runs out.
            let next = engine.next_event_time();
            let settled = self.last_input + SETTLE;
            if engine.awaiting().is_some() && next.is_none_or(|t| t > settled) && engine.now() >= self.last_input {
                if retries > 3 {
                    break;
                }
                retries += 1;
                self.handled = None;
                engine.run_until(settled.max(engine.now()));
                continue;
            }
            if engine.step() {
                if engine.awaiting().is_none() {
                    retries = 0;
                }
                continue;
            }
            break;
        }
    }

    fn submit(&mut self, engine: &mut Engine, at: Millis, input: Input) {
        self.last_input = self.last_input.max(at);
        engine.submit(at, input.clone());
        self.script.push(ScriptedInput { at, input });
    }

    fn draw(&mut self, range: &Range<u64>) -> Millis {
        if range.is_empty() {
            Millis(range.start.max(1))
        } else {
            Millis(self.rng.gen_range(range.clone()).max(1))
        }
    }

    /// Earliest start at or after `at` for a gesture lasting `len` that keeps
    /// clear of other gestures by more than the double-tap window.
    fn slot(&mut self, at: Millis, len: Millis) -> Millis {
        let gap = self.thresholds.double_tap_window + Millis(200);
        let mut start = at;
        while let Some(&(_, end)) = self
            .reserved
            .iter()
            .find(|&&(s, e)| start < e + gap && s < start + len + gap)
        {
            start = end + gap;
        }
        self.reserved.push((start, start + len));
        start
    }

    fn tap(&mut self, engine: &mut Engine, at: Millis) {
        let button = Button::ALL[self.rng.gen_range(0..3)];
        let hold = self.rng.gen_range(60..200).min(self.thresholds.long_press.0.saturating_sub(1)).max(1);
        let at = self.slot(at, Millis(hold));
        self.submit(engine, at, Input::ButtonDown { button });
        self.submit(engine, at + Millis(hold), Input::ButtonUp { button });
    }

    fn say(&mut self, engine: &mut Engine, at: Millis, text: &str) {
        self.submit(engine, at, Input::SpeechText { text: text.into() });
    }

    /// Hold Middle and double-tap Front or Rear, starting at `at` or as soon
    /// after as the buttons are free. Returns the start.
    pub fn speed_chord(&mut self, engine: &mut Engine, at: Millis, direction: SpeedDirection) -> Millis {
        let th = self.thresholds;
        let side = if direction == th.front_double_tap {
            Button::Front
        } else {
            Button::Rear
        };
        let short = (th.long_press.0 / 4).clamp(1, 60);
        let gap = (th.double_tap_window.0 / 4).max(1);
        let span = (th.chord_overlap + Millis(10 + 2 * short + gap)).max(th.long_press) + Millis(50);
        let at = self.slot(at, span);
        let t1 = at + Millis(th.chord_overlap.0 + 10);
        let t2 = t1 + Millis(short + gap);
        let release = (t2 + Millis(short)).max(at + th.long_press) + Millis(50);
        let m = Button::Middle;
        self.submit(engine, at, Input::ButtonDown { button: m });
        self.submit(engine, t1, Input::ButtonDown { button: side });
        self.submit(engine, t1 + Millis(short), Input::ButtonUp { button: side });
        self.submit(engine, t2, Input::ButtonDown { button: side });
        self.submit(engine, t2 + Millis(short), Input::ButtonUp { button: side });
        self.submit(engine, release, Input::ButtonUp { button: m });
        at
    }

    /// Long-press Front and Rear together, at `at` or as soon after as the
    /// buttons are free. Returns the start.
    pub fn pause_chord(&mut self, engine: &mut Engine, at: Millis) -> Millis {
        let at = self.slot(at, self.thresholds.long_press + Millis(210));
        let release = at + self.thresholds.long_press + Millis(200);
        self.submit(engine, at, Input::ButtonDown { button: Button::Front });
        self.submit(engine, at + Millis(10), Input::ButtonDown { button: Button::Rear });
        self.submit(engine, release, Input::ButtonUp { button: Button::Front });
        self.submit(engine, release + Millis(10), Input::ButtonUp { button: Button::Rear });
        at
    }

    fn react(&mut self, engine: &mut Engine) {
        let now = engine.now();
        self.maybe_chaos(engine, now);
        let Some((epoch, what)) = engine.awaiting() else {
            return;
        };
        if self.handled == Some(epoch) {
            return;
        }
        self.handled = Some(epoch);
        match what {
            Awaiting::Continue { next, listening } => {
                if next == ContinueKind::NextSet {
                    let at = now + self.draw(&self.policy.rest.clone());
                    if self.rng.gen_bool(0.5) {
                        self.say(engine, at, "go");
                    } else {
                        self.tap(engine, at);
                    }
                } else if listening && self.rng.gen_bool(self.policy.voice_share.clamp(0.0, 1.0)) {
                    let at = now + self.draw(&self.policy.voice_delay.clone());
                    self.say(engine, at, "go");
                } else {
                    let at = now + self.draw(&self.policy.continue_delay.clone());
                    self.tap(engine, at);
                }
            }
            Awaiting::Assistance(kind) => {
                let range = match kind {
                    AssistanceKind::Positioning => self.policy.positioning.clone(),
                    AssistanceKind::AuxiliaryAid => self.policy.auxiliary_aid.clone(),
                    AssistanceKind::PostureChange => self.policy.posture_change.clone(),
                    AssistanceKind::KeepingPace => self.policy.continue_delay.clone(),
                };
                let at = now + self.draw(&range);
                self.submit(engine, at, Input::AssistanceDone);
            }
            Awaiting::RelayReturn { .. } => {
                let at = now + self.draw(&self.policy.relay_round.clone());
                self.tap(engine, at);
            }
            Awaiting::FarewellAnswer => {
                let at = now + self.draw(&self.policy.voice_delay.clone());
                self.say(engine, at, "yes");
            }
            Awaiting::Paused => {
                let at = now + self.draw(&self.policy.pause_hold.clone());
                self.pause_chord(engine, at);
            }
            Awaiting::Faulted(FaultKind::BatteryDrain) => {
                let at = now + self.draw(&self.policy.engineer.clone());
                self.submit(engine, at, Input::EngineerReset);
            }
            Awaiting::Faulted(_) => {}
        }
    }

    fn maybe_chaos(&mut self, engine: &mut Engine, now: Millis) {
        let Some(chaos) = self.policy.chaos.clone() else {
            return;
        };
        let Phase::SetActive { .. } = engine.phase() else {
            return;
        };
        let cursor = engine.orchestrator().cursor();
        let key = (cursor.program_index, cursor.set_index);
        if self.seen_set == Some(key) {
            return;
        }
        self.seen_set = Some(key);
        let entry = engine.orchestrator().config().program[cursor.program_index];
        let span = 2_000 * u64::from(entry.reps()).max(1);
        if self.rng.gen_bool(chaos.speed_change.clamp(0.0, 1.0)) {
            let at = now + Millis(self.rng.gen_range(1..span));
            let dir = if self.rng.gen_bool(0.5) {
                SpeedDirection::Faster
            } else {
                SpeedDirection::Slower
            };
            self.speed_chord(engine, at, dir);
        }
        if self.rng.gen_bool(chaos.pause.clamp(0.0, 1.0)) {
            let at = now + Millis(self.rng.gen_range(1..span));
            self.pause_chord(engine, at);
        }
    }
}
