//! Single-threaded event loop over a virtual clock.
//!
//! All external input goes through one ordered queue. At each instant the
//! loop handles, in order: robot faults, timers, the speech deadline, stuck
//! buttons, queued input, and finally gesture deadlines; it repeats until
//! nothing is left at that instant.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{ActivityId, Catalog};
use crate::config::SessionConfig;
use crate::cues::{CueController, CueEffect, LedFrame};
use crate::interaction::{Button, ButtonEdge, EdgeKind, GestureClassifier, Heard, SpeechManager, Thresholds};
use crate::orchestrator::{Awaiting, Command, EngineEvent, Orchestrator, OrchestratorState, Phase, Timed, TimerId};
use crate::robot::{FaultKind, FaultProfile, RobotSimState, SimRobot};
use crate::telemetry::{EventKind, EventLog, SessionEvent};
use crate::time::Millis;

/// A held button is released on its own after this long.
pub const STUCK_BUTTON_TIMEOUT: Millis = Millis(10_000);

const ROBOT_SEED_SALT: u64 = 0x5DEE_CE66_D1CE_F00D;

/// External input, as carried by the wire protocol and scripted-events files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Input {
    ButtonDown { button: Button },
    ButtonUp { button: Button },
    SpeechText { text: String },
    AssistanceDone,
    TherapistAbort,
    EngineerReset,
    SkipToFarewell,
    InjectFault { fault: FaultKind },
    Shutdown,
}

impl Input {
    fn label(&self) -> String {
        match self {
            Input::ButtonDown { button } => format!("ButtonDown({button:?})"),
            Input::ButtonUp { button } => format!("ButtonUp({button:?})"),
            Input::SpeechText { .. } => "SpeechText".into(),
            Input::AssistanceDone => "AssistanceDone".into(),
            Input::TherapistAbort => "TherapistAbort".into(),
            Input::EngineerReset => "EngineerReset".into(),
            Input::SkipToFarewell => "SkipToFarewell".into(),
            Input::InjectFault { fault } => format!("InjectFault({fault:?})"),
            Input::Shutdown => "Shutdown".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineStats {
    /// Inputs the session logged as not applicable in its state.
    pub ignored_inputs: u64,
    /// Internal inconsistencies: rejected log appends, refused motions.
    pub engine_errors: u64,
    /// Button edges that could not belong to a press.
    pub input_anomalies: u64,
    pub synthesized_releases: u64,
}

/// Read-only view handed to observers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub at: Millis,
    pub state: OrchestratorState,
    pub activity: Option<ActivityId>,
    pub cue: CueEffect,
    pub awaiting: Option<Awaiting>,
    pub last_rep: Option<u32>,
    pub robot: RobotSimState,
    pub ended: bool,
}

#[derive(Debug, Clone)]
pub struct Engine {
    orch: Orchestrator,
    robot: SimRobot,
    classifier: GestureClassifier,
    speech: SpeechManager,
    speech_rng: ChaCha8Rng,
    now: Millis,
    timers: BTreeMap<TimerId, Millis>,
    queue: BTreeMap<(Millis, u64), Input>,
    next_seq: u64,
    log: EventLog,
    cue: CueController,
    stats: EngineStats,
    outbox: Vec<Timed>,
    last_rep: Option<u32>,
}

impl Engine {
    /// Builds the session and starts it at time zero.
    pub fn new(config: SessionConfig) -> Self {
        let profile = FaultProfile::from_settings(&config.faults, config.seed ^ ROBOT_SEED_SALT);
        Self::with_robot(config, SimRobot::new(profile))
    }

    /// Starts a session on an existing robot, e.g. one already part-drained.
    pub fn with_robot(config: SessionConfig, robot: SimRobot) -> Self {
        Self::with_parts(config, Catalog::builtin(), robot)
    }

    pub fn with_catalog(config: SessionConfig, catalog: Arc<Catalog>) -> Self {
        let profile = FaultProfile::from_settings(&config.faults, config.seed ^ ROBOT_SEED_SALT);
        Self::with_parts(config, catalog, SimRobot::new(profile))
    }

    pub fn with_parts(config: SessionConfig, catalog: Arc<Catalog>, robot: SimRobot) -> Self {
        let mut speech_rng = ChaCha8Rng::seed_from_u64(config.seed);
        speech_rng.set_stream(1);
        let mut engine = Self {
            classifier: GestureClassifier::new(Thresholds::from(&config.interaction)),
            speech: SpeechManager::new(config.interaction.speech_false_negative),
            speech_rng,
            orch: Orchestrator::with_catalog(config, catalog),
            robot,
            now: Millis::ZERO,
            timers: BTreeMap::new(),
            queue: BTreeMap::new(),
            next_seq: 0,
            log: EventLog::new(),
            cue: CueController::default(),
            stats: EngineStats::default(),
            outbox: Vec::new(),
            last_rep: None,
        };
        let out = engine.orch.start(Millis::ZERO);
        engine.execute(out);
        engine
    }

    pub fn now(&self) -> Millis {
        self.now
    }

    pub fn orchestrator(&self) -> &Orchestrator {
        &self.orch
    }

    pub fn phase(&self) -> &Phase {
        self.orch.phase()
    }

    pub fn is_finished(&self) -> bool {
        self.orch.is_terminal()
    }

    pub fn awaiting(&self) -> Option<(u64, Awaiting)> {
        self.orch.awaiting()
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn events(&self) -> &[SessionEvent] {
        self.log.events()
    }

    pub fn stats(&self) -> EngineStats {
        self.stats
    }

    pub fn robot(&self) -> &SimRobot {
        &self.robot
    }

    pub fn into_robot(self) -> SimRobot {
        self.robot
    }

    pub fn cue_frame(&self, at: Millis) -> LedFrame {
        self.cue.frame_at(at)
    }

    pub fn snapshot(&self) -> Snapshot {
        let state = self.orch.state();
        let activity = match state.phase {
            Phase::Idle | Phase::LoadingConfig | Phase::Greeting(_) => None,
            _ => self.orch.config().program.get(state.cursor.program_index).map(|a| a.activity),
        };
        Snapshot {
            at: self.now,
            activity,
            state,
            cue: self.cue.effect(),
            awaiting: self.orch.awaiting().map(|a| a.1),
            last_rep: self.last_rep,
            robot: self.robot.state(),
            ended: self.log.is_ended(),
        }
    }

    /// Commands carried out since the last call, for observers.
    pub fn drain_outbox(&mut self) -> Vec<Timed> {
        std::mem::take(&mut self.outbox)
    }

    /// Queues input for `at`; input for the past is taken as arriving now.
    pub fn submit(&mut self, at: Millis, input: Input) {
        let at = at.max(self.now);
        self.queue.insert((at, self.next_seq), input);
        self.next_seq += 1;
    }

    fn stuck_release(&self) -> Option<(Millis, Button)> {
        Button::ALL
            .iter()
            .filter_map(|&b| self.classifier.held_since(b).map(|d| (d + STUCK_BUTTON_TIMEOUT, b)))
            .min()
    }

    /// Due time of the session's running timer, if any.
    pub fn timer_due(&self) -> Option<Millis> {
        self.timers.values().min().copied()
    }

    /// When the loop next has something to do.
    pub fn next_event_time(&self) -> Option<Millis> {
        if self.orch.is_terminal() {
            return None;
        }
        [
            self.robot.next_fault().map(|f| f.0),
            self.timers.values().min().copied(),
            self.speech.deadline(),
            self.stuck_release().map(|s| s.0),
            self.queue.keys().next().map(|k| k.0),
            self.classifier.next_deadline(),
        ]
        .into_iter()
        .flatten()
        .min()
        .map(|t| t.max(self.now))
    }

    /// Handles everything due at the next event time. Returns false when
    /// there is nothing left to do.
    pub fn step(&mut self) -> bool {
        let Some(t) = self.next_event_time() else {
            return false;
        };
        self.now = t;
        self.robot.advance_to(t);
        let mut handled = 0;
        while self.handle_one(t) {
            handled += 1;
        }
        if handled == 0 {
            // A deadline that nothing consumes would spin forever.
            self.stats.engine_errors += 1;
            return false;
        }
        true
    }

    /// Runs every event due at or before `limit`, then moves the clock there.
    pub fn run_until(&mut self, limit: Millis) {
        while self.next_event_time().is_some_and(|t| t <= limit) {
            if !self.step() {
                break;
            }
        }
        if !self.orch.is_terminal() {
            self.now = self.now.max(limit);
            self.robot.advance_to(self.now);
        }
    }

    /// Runs until the session ends or nothing more can happen.
    pub fn run_to_completion(&mut self) {
        while !self.orch.is_terminal() && self.step() {}
    }

    fn handle_one(&mut self, t: Millis) -> bool {
        if self.orch.is_terminal() {
            return false;
        }
        if let Some(fault) = self.robot.take_fault(t) {
            self.dispatch(EngineEvent::FaultInjected(fault));
            return true;
        }
        if let Some((&id, _)) = self.timers.iter().filter(|(_, &due)| due <= t).min_by_key(|(&id, &due)| (due, id)) {
            self.timers.remove(&id);
            self.dispatch(EngineEvent::TimerFired(id));
            return true;
        }
        if self.speech.deadline().is_some_and(|d| d <= t) {
            if self.speech.expire(t).is_some() {
                self.dispatch(EngineEvent::SpeechTimeout);
            }
            return true;
        }
        if let Some((due, button)) = self.stuck_release().filter(|s| s.0 <= t) {
            self.stats.synthesized_releases += 1;
            self.append(SessionEvent {
                at: t,
                kind: EventKind::InputSynthesized { button },
            });
            self.press(ButtonEdge {
                button,
                kind: EdgeKind::Up,
                at: due,
            });
            return true;
        }
        if let Some(entry) = self.queue.first_entry() {
            if entry.key().0 <= t {
                let input = entry.remove();
                self.accept(input);
                return true;
            }
        }
        let gestures = self.classifier.advance(t);
        if gestures.is_empty() {
            return false;
        }
        for g in gestures {
            self.dispatch(EngineEvent::Gesture(g.kind));
        }
        true
    }

    fn accept(&mut self, input: Input) {
        match input {
            Input::ButtonDown { button } => self.press(ButtonEdge {
                button,
                kind: EdgeKind::Down,
                at: self.now,
            }),
            Input::ButtonUp { button } => self.press(ButtonEdge {
                button,
                kind: EdgeKind::Up,
                at: self.now,
            }),
            Input::SpeechText { ref text } => match self.speech.hear(text, self.now, &mut self.speech_rng) {
                Heard::Matched(token) => self.dispatch(EngineEvent::SpeechHeard { token, late: false }),
                Heard::Late(token) => self.dispatch(EngineEvent::SpeechHeard { token, late: true }),
                Heard::Ignored => self.ignored(&input),
            },
            Input::AssistanceDone => self.dispatch(EngineEvent::AssistanceDone),
            Input::TherapistAbort => self.dispatch(EngineEvent::TherapistAbort),
            Input::SkipToFarewell => self.dispatch(EngineEvent::SkipToFarewell),
            Input::Shutdown => self.dispatch(EngineEvent::Shutdown),
            Input::EngineerReset => {
                if matches!(
                    self.orch.phase(),
                    Phase::Faulted {
                        fault: FaultKind::BatteryDrain,
                        ..
                    }
                ) {
                    self.robot.recharge(self.now);
                }
                self.dispatch(EngineEvent::EngineerReset);
            }
            Input::InjectFault { fault } => {
                // Only touch the robot when the session will act on the fault,
                // so an ignored injection leaves no hidden damage.
                let applies = match fault {
                    FaultKind::FallDuringDance => {
                        *self.orch.phase() == Phase::FarewellDance(crate::orchestrator::FarewellStage::Dancing)
                    }
                    FaultKind::BatteryDrain => !matches!(self.orch.phase(), Phase::Faulted { .. }),
                    FaultKind::UnrecoverableError => true,
                };
                if applies {
                    self.robot.apply_fault(fault, self.now);
                }
                self.dispatch(EngineEvent::FaultInjected(fault));
            }
        }
    }

    fn press(&mut self, edge: ButtonEdge) {
        let (gestures, anomaly) = self.classifier.push(edge);
        if let Some(a) = anomaly {
            self.stats.input_anomalies += 1;
            log::debug!("dropped button edge: {a:?}");
            let input = match edge.kind {
                EdgeKind::Down => Input::ButtonDown { button: edge.button },
                EdgeKind::Up => Input::ButtonUp { button: edge.button },
            };
            self.ignored(&input);
        }
        for g in gestures {
            self.dispatch(EngineEvent::Gesture(g.kind));
        }
    }

    fn ignored(&mut self, input: &Input) {
        let state = self.orch.phase().name().to_string();
        self.append(SessionEvent {
            at: self.now,
            kind: EventKind::IgnoredInput {
                input: input.label(),
                state,
            },
        });
    }

    fn dispatch(&mut self, event: EngineEvent) {
        if self.orch.is_terminal() {
            return;
        }
        let out = self.orch.step(self.now, event);
        self.execute(out);
    }

    fn append(&mut self, event: SessionEvent) {
        if matches!(event.kind, EventKind::IgnoredInput { .. }) {
            self.stats.ignored_inputs += 1;
        }
        if let Err(e) = self.log.append(event) {
            log::warn!("log append rejected: {e}");
            self.stats.engine_errors += 1;
        }
    }

    fn execute(&mut self, commands: Vec<Timed>) {
        for timed in &commands {
            let now = self.now;
            match &timed.command {
                Command::StartMotion { motion, duration } => {
                    if let Err(e) = self.robot.execute_motion(*motion, *duration, now) {
                        log::warn!("motion {motion:?} refused: {e}");
                        self.stats.engine_errors += 1;
                    }
                }
                Command::StopMotion => self.robot.stop_motion(now),
                Command::SetCue { effect } => self.cue.set_effect(*effect, now),
                Command::StartListening { vocabulary, window } => self.speech.start(vocabulary.clone(), now, *window),
                Command::StopListening => self.speech.stop(),
                Command::StartTimer { id, due } => {
                    self.timers.insert(*id, *due);
                }
                Command::CancelTimer { id } => {
                    self.timers.remove(id);
                }
                Command::CountRep { n } => self.last_rep = Some(*n),
                Command::LogEvent { event } => {
                    if matches!(event.kind, EventKind::SetStarted { .. }) {
                        self.last_rep = None;
                    }
                    self.append(event.clone())
                }
                Command::Speak { .. } | Command::RequestAssistance { .. } => {}
            }
        }
        if self.orch.is_terminal() {
            self.timers.clear();
            self.robot.stop_motion(self.now);
        }
        self.outbox.extend(commands);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::ActivityId;
    use crate::config::{ActivityConfig, SpeedSetting};
    use crate::interaction::GestureKind;
    use crate::telemetry::SessionStatus;

    fn engine(program: Vec<ActivityConfig>) -> Engine {
        Engine::new(SessionConfig::new("Alex", "Jo", program))
    }

    fn tap(e: &mut Engine, at: u64) {
        e.submit(Millis(at), Input::ButtonDown { button: Button::Middle });
        e.submit(Millis(at + 100), Input::ButtonUp { button: Button::Middle });
    }

    #[test]
    fn silence_times_out_at_window() {
        let mut e = engine(vec![ActivityConfig::exercise(ActivityId::Bridge, 1, 1, SpeedSetting::Fast)]);
        e.run_until(Millis(3000 + 75_000));
        assert_eq!(e.phase(), &Phase::Greeting(crate::orchestrator::GreetingStage::AwaitingGo));
        e.run_until(Millis(200_000));
        let timeouts: Vec<Millis> = e
            .events()
            .iter()
            .filter(|ev| matches!(ev.kind, EventKind::SpeechOutcome { .. }))
            .map(|ev| ev.at)
            .collect();
        assert_eq!(timeouts, vec![Millis(78_000 + 2000)]);
    }

    #[test]
    fn late_go_is_logged_and_still_continues() {
        let mut e = engine(vec![ActivityConfig::exercise(ActivityId::Bridge, 1, 1, SpeedSetting::Fast)]);
        e.submit(Millis(78_000 + 2000), Input::SpeechText { text: "go!".into() });
        e.run_until(Millis(81_000));
        assert!(e
            .events()
            .iter()
            .any(|ev| ev.kind == EventKind::LateSpeech { token: "go".into() }));
        assert_eq!(e.phase(), &Phase::PositioningRequest);
    }

    #[test]
    fn stuck_button_is_released_and_flagged() {
        let mut e = engine(vec![ActivityConfig::exercise(ActivityId::Bridge, 1, 1, SpeedSetting::Fast)]);
        e.submit(Millis(100), Input::ButtonDown { button: Button::Rear });
        e.run_until(Millis(20_000));
        assert_eq!(e.stats().synthesized_releases, 1);
        let flagged = e
            .events()
            .iter()
            .find(|ev| matches!(ev.kind, EventKind::InputSynthesized { .. }))
            .unwrap();
        assert_eq!(flagged.at, Millis(10_100));
    }

    #[test]
    fn taps_from_two_sources_are_seen_in_arrival_order() {
        let mut e = engine(vec![ActivityConfig::exercise(ActivityId::Bridge, 1, 1, SpeedSetting::Fast)]);
        e.run_until(Millis(79_000));
        e.submit(Millis(79_000), Input::ButtonDown { button: Button::Front });
        e.submit(Millis(79_005), Input::ButtonDown { button: Button::Rear });
        e.submit(Millis(79_100), Input::ButtonUp { button: Button::Front });
        e.submit(Millis(79_105), Input::ButtonUp { button: Button::Rear });
        e.run_until(Millis(80_000));
        let gestures: Vec<GestureKind> = e
            .events()
            .iter()
            .filter_map(|ev| match ev.kind {
                EventKind::GestureReceived { gesture } => Some(gesture),
                _ => None,
            })
            .collect();
        assert_eq!(gestures, vec![GestureKind::SingleTap(Button::Front), GestureKind::SingleTap(Button::Rear)]);
        // the second tap arrives during the positioning request and completes it
        assert!(!e.events().iter().any(|ev| matches!(ev.kind, EventKind::IgnoredInput { .. })));
    }

    #[test]
    fn abort_ends_session_and_stops_loop() {
        let mut e = engine(vec![ActivityConfig::exercise(ActivityId::Bridge, 1, 1, SpeedSetting::Fast)]);
        tap(&mut e, 79_000);
        e.submit(Millis(90_000), Input::TherapistAbort);
        e.submit(Millis(95_000), Input::AssistanceDone);
        e.run_to_completion();
        assert!(e.is_finished());
        assert_eq!(
            e.events().last().unwrap().kind,
            EventKind::SessionEnded {
                status: SessionStatus::Aborted
            }
        );
        assert_eq!(e.next_event_time(), None);
    }

    #[test]
    fn battery_runs_out_and_waits_for_engineer() {
        let mut cfg = SessionConfig::new(
            "Alex",
            "Jo",
            vec![ActivityConfig::exercise(ActivityId::StaticQuads, 3, 10, SpeedSetting::Slow)],
        );
        cfg.faults.battery_capacity_ms = 60_000;
        let mut e = Engine::new(cfg);
        e.run_to_completion();
        assert!(matches!(e.phase(), Phase::Faulted { .. }));
        assert_eq!(e.stats().engine_errors, 0);
        let t = e.now();
        e.submit(t + Millis(90_000), Input::EngineerReset);
        e.step();
        assert!(!matches!(e.phase(), Phase::Faulted { .. }));
        assert_eq!(e.robot().charge_units(), e.robot().capacity_units());
    }
}
