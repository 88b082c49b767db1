//! The session state machine.
//!
//! [`Orchestrator::step`] is a pure transition: its output depends only on
//! the current state, the event, the configuration and the seed. Effects come
//! back as [`Timed`] commands for the event loop to carry out; nothing here
//! reads a clock or touches I/O.

mod command;
mod state;

use std::collections::VecDeque;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use command::{Command, EngineEvent, Timed, TimerId};
pub use state::{Awaiting, Continue, ContinueKind, Cursor, FarewellStage, GreetingStage, OrchestratorState, Phase};

use crate::catalog::{personalize, rep_duration, scripts, ActivityId, AssistanceKind, Catalog, CatalogError, ExerciseSpec, Posture};
use crate::config::{ActivityPlan, SessionConfig, SpeedDirection, SpeedSetting};
use crate::cues::CueEffect;
use crate::interaction::{GestureKind, PhrasePicker, Pool, SpeechOutcome, Vocabulary};
use crate::robot::{FaultKind, Motion};
use crate::telemetry::{EventKind, SessionEvent, SessionStatus};
use crate::time::Millis;

/// How long the robot takes to get ready before greeting.
pub const SETUP_TIME: Millis = Millis(3000);
/// Length of the stand-up motion after a fall.
pub const STAND_UP_TIME: Millis = Millis(5000);

/// Rep boundaries of a set started at `start`, with no speed changes.
pub fn schedule_set(spec: &ExerciseSpec, reps: u32, speed: SpeedSetting, start: Millis) -> Result<Vec<Millis>, CatalogError> {
    let d = rep_duration(spec, speed)?;
    Ok((1..=reps as u64).map(|k| Millis(start.0 + k * d.0)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EntryStep {
    Assist(AssistanceKind),
    Demonstrate,
    StartSetPrompt,
    RelayRounds,
    FarewellQuestion,
}

#[derive(Debug, Clone, Copy)]
struct ActiveTimer {
    id: TimerId,
    due: Millis,
}

#[derive(Debug, Clone)]
struct Listen {
    vocabulary: Vocabulary,
    window_open: bool,
}

/// Everything halted by a pause or fault, to be restarted on resume.
#[derive(Debug, Clone)]
struct Suspended {
    at: Millis,
    timer_left: Option<Millis>,
    motion_left: Option<(Motion, Millis)>,
    listening: Option<Vocabulary>,
    cue: CueEffect,
}

#[derive(Debug, Clone)]
pub struct Orchestrator {
    config: SessionConfig,
    catalog: Arc<Catalog>,
    rng: ChaCha8Rng,
    picker: PhrasePicker,
    phase: Phase,
    cursor: Cursor,
    speed: SpeedSetting,
    now: Millis,
    out: Vec<Timed>,

    timer: Option<ActiveTimer>,
    next_timer: TimerId,
    motion: Option<(Motion, Millis)>,
    listen: Option<Listen>,
    cue: CueEffect,
    suspended: Option<Suspended>,

    entry: VecDeque<EntryStep>,
    robot_posture: Posture,
    rep_anchor: Millis,
    instructional_next: bool,
    dance_left: Millis,
    wait_epoch: u64,
}

impl Orchestrator {
    pub fn new(config: SessionConfig) -> Self {
        Self::with_catalog(config, Catalog::builtin())
    }

    pub fn with_catalog(config: SessionConfig, catalog: Arc<Catalog>) -> Self {
        let speed = config.program.first().map_or(SpeedSetting::Medium, |a| a.speed());
        Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            catalog,
            picker: PhrasePicker::new(),
            phase: Phase::Idle,
            cursor: Cursor::default(),
            speed,
            now: Millis::ZERO,
            out: Vec::new(),
            timer: None,
            next_timer: 1,
            motion: None,
            listen: None,
            cue: CueEffect::AllOff,
            suspended: None,
            entry: VecDeque::new(),
            robot_posture: Posture::Crouched,
            rep_anchor: Millis::ZERO,
            instructional_next: false,
            dance_left: Millis::ZERO,
            wait_epoch: 0,
        }
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn phase(&self) -> &Phase {
        &self.phase
    }

    pub fn cursor(&self) -> Cursor {
        self.cursor
    }

    pub fn effective_speed(&self) -> SpeedSetting {
        self.speed
    }

    pub fn cue(&self) -> CueEffect {
        self.cue
    }

    pub fn state(&self) -> OrchestratorState {
        OrchestratorState {
            phase: self.phase.clone(),
            cursor: self.cursor,
            effective_speed: self.speed,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.phase.is_terminal()
    }

    /// What input the session is waiting for, with a counter that changes
    /// every time a new wait begins.
    pub fn awaiting(&self) -> Option<(u64, Awaiting)> {
        let what = match &self.phase {
            Phase::Greeting(GreetingStage::AwaitingGo) | Phase::AwaitContinue(Continue::StartProgram) => {
                Awaiting::Continue {
                    next: ContinueKind::StartProgram,
                    listening: self.window_open(),
                }
            }
            Phase::AwaitContinue(Continue::StartSet) => Awaiting::Continue {
                next: ContinueKind::StartSet,
                listening: self.window_open(),
            },
            Phase::AwaitContinue(Continue::NextActivity) => Awaiting::Continue {
                next: ContinueKind::NextActivity,
                listening: self.window_open(),
            },
            Phase::SetRest => Awaiting::Continue {
                next: ContinueKind::NextSet,
                listening: self.window_open(),
            },
            Phase::PositioningRequest => Awaiting::Assistance(AssistanceKind::Positioning),
            Phase::AssistanceRequest(k) => Awaiting::Assistance(*k),
            Phase::ToyRelayActive { round } => Awaiting::RelayReturn { round: *round },
            Phase::FarewellDance(FarewellStage::Question) => Awaiting::FarewellAnswer,
            Phase::Paused(_) => Awaiting::Paused,
            Phase::Faulted { fault, .. } => Awaiting::Faulted(*fault),
            _ => return None,
        };
        Some((self.wait_epoch, what))
    }

    fn window_open(&self) -> bool {
        self.listen.as_ref().is_some_and(|l| l.window_open)
    }

    // ---- command helpers -------------------------------------------------

    fn emit(&mut self, command: Command) {
        self.out.push(Timed { at: self.now, command });
    }

    fn log(&mut self, kind: EventKind) {
        let event = SessionEvent { at: self.now, kind };
        self.emit(Command::LogEvent { event });
    }

    fn say(&mut self, text: &str) {
        let text = personalize(text, &self.config.patient_name, &self.config.carer_name);
        self.emit(Command::Speak { text });
    }

    fn say_script(&mut self, key: &str) {
        let text = self.catalog.script(key).to_string();
        self.say(&text);
    }

    fn set_cue(&mut self, effect: CueEffect) {
        if self.cue != effect {
            self.cue = effect;
            self.emit(Command::SetCue { effect });
        }
    }

    fn start_timer(&mut self, after: Millis) {
        if let Some(t) = self.timer.take() {
            self.emit(Command::CancelTimer { id: t.id });
        }
        let id = self.next_timer;
        self.next_timer += 1;
        let due = self.now + after;
        self.timer = Some(ActiveTimer { id, due });
        self.emit(Command::StartTimer { id, due });
    }

    fn cancel_timer(&mut self) -> Option<Millis> {
        let t = self.timer.take()?;
        self.emit(Command::CancelTimer { id: t.id });
        Some(t.due.saturating_sub(self.now))
    }

    fn start_motion(&mut self, motion: Motion, duration: Millis) {
        self.motion = Some((motion, self.now + duration));
        self.emit(Command::StartMotion { motion, duration });
    }

    fn stop_motion(&mut self) -> Option<(Motion, Millis)> {
        let (motion, ends) = self.motion.take()?;
        self.emit(Command::StopMotion);
        let left = ends.saturating_sub(self.now);
        (left > Millis::ZERO).then_some((motion, left))
    }

    fn listen(&mut self, vocabulary: Vocabulary) {
        self.listen = Some(Listen {
            vocabulary: vocabulary.clone(),
            window_open: true,
        });
        let window = Millis(self.config.interaction.speech_window_ms);
        self.emit(Command::StartListening { vocabulary, window });
    }

    fn stop_listening(&mut self) -> Option<Listen> {
        let l = self.listen.take()?;
        self.emit(Command::StopListening);
        Some(l)
    }

    fn ignore(&mut self, input: &str) {
        let state = self.phase.name().to_string();
        self.log(EventKind::IgnoredInput {
            input: input.to_string(),
            state,
        });
    }

    fn new_wait(&mut self) {
        self.wait_epoch += 1;
    }

    fn spec(&self, index: usize) -> &ExerciseSpec {
        self.catalog.lookup(self.config.program[index].activity)
    }

    fn current_activity(&self) -> ActivityId {
        self.config.program[self.cursor.program_index].activity
    }

    fn take_out(&mut self) -> Vec<Timed> {
        std::mem::take(&mut self.out)
    }

    // ---- lifecycle -------------------------------------------------------

    /// Begins the session at `at`: setup cue, then the greeting.
    pub fn start(&mut self, at: Millis) -> Vec<Timed> {
        if self.phase != Phase::Idle {
            return Vec::new();
        }
        self.now = at;
        self.phase = Phase::LoadingConfig;
        self.log(EventKind::SessionStarted {
            patient: self.config.patient_name.clone(),
            carer: self.config.carer_name.clone(),
            program: self.config.program.iter().map(|a| a.activity).collect(),
            seed: self.config.seed,
        });
        self.set_cue(CueEffect::SetupInProgress);
        self.start_timer(SETUP_TIME);
        self.take_out()
    }

    pub fn step(&mut self, at: Millis, event: EngineEvent) -> Vec<Timed> {
        if self.phase.is_terminal() || self.phase == Phase::Idle {
            return Vec::new();
        }
        self.now = self.now.max(at);
        match event {
            EngineEvent::Gesture(g) => {
                self.log(EventKind::GestureReceived { gesture: g });
                self.on_gesture(g);
            }
            EngineEvent::SpeechHeard { token, late } => self.on_speech(token, late),
            EngineEvent::SpeechTimeout => self.on_speech_timeout(),
            EngineEvent::TimerFired(id) => match self.timer {
                Some(t) if t.id == id => {
                    self.timer = None;
                    self.motion = None;
                    self.on_timer();
                }
                _ => self.ignore("TimerFired(stale)"),
            },
            EngineEvent::AssistanceDone => match self.phase {
                Phase::PositioningRequest | Phase::AssistanceRequest(_) => self.complete_assistance(),
                _ => self.ignore("AssistanceDone"),
            },
            EngineEvent::FaultInjected(fault) => self.on_fault(fault),
            EngineEvent::EngineerReset => self.on_engineer_reset(),
            EngineEvent::TherapistAbort => self.end(SessionStatus::Aborted),
            EngineEvent::SkipToFarewell => self.skip_to_farewell(),
            EngineEvent::Shutdown => self.end(SessionStatus::Interrupted),
        }
        self.take_out()
    }

    fn on_timer(&mut self) {
        match self.phase.clone() {
            Phase::LoadingConfig => self.begin_greeting(),
            Phase::Greeting(GreetingStage::Speaking) => self.greeting_done(),
            Phase::Demonstration => self.next_entry_step(),
            Phase::SetActive { rep } => self.rep_done(rep),
            Phase::FarewellDance(FarewellStage::Dancing) => self.activity_completed(),
            Phase::FarewellDance(FarewellStage::Recovering) => {
                self.phase = Phase::FarewellDance(FarewellStage::Dancing);
                let left = self.dance_left;
                self.start_motion(Motion::Dance, left);
                self.start_timer(left);
            }
            _ => self.ignore("TimerFired"),
        }
    }

    fn begin_greeting(&mut self) {
        self.phase = Phase::Greeting(GreetingStage::Speaking);
        self.set_cue(CueEffect::AllOff);
        if self.config.program[0].activity == ActivityId::IntroSpeech {
            self.log(EventKind::ActivityStarted {
                index: 0,
                activity: ActivityId::IntroSpeech,
            });
        }
        let intro = self
            .catalog
            .intro(&self.config.intro_variant)
            .or_else(|| self.catalog.intros().first())
            .cloned()
            .expect("catalog has intros");
        self.say(&intro.text);
        self.start_motion(Motion::Intro, intro.duration);
        self.start_timer(intro.duration);
    }

    fn greeting_done(&mut self) {
        if self.config.program[0].activity == ActivityId::IntroSpeech {
            self.log(EventKind::ActivityCompleted {
                index: 0,
                activity: ActivityId::IntroSpeech,
            });
            if self.config.program.len() == 1 {
                self.finish();
                return;
            }
        }
        self.prompt_continue(scripts::START_SESSION, Phase::Greeting(GreetingStage::AwaitingGo));
    }

    fn first_activity_index(&self) -> usize {
        usize::from(self.config.program[0].activity == ActivityId::IntroSpeech)
    }

    /// Keep-pace prompt: speak, light the tap+listen cue and listen for "go".
    fn prompt_continue(&mut self, script: &str, phase: Phase) {
        self.phase = phase;
        self.say_script(script);
        self.log(EventKind::AssistanceRequested {
            assistance: AssistanceKind::KeepingPace,
        });
        self.set_cue(CueEffect::PromptAndListen);
        self.listen(Vocabulary::go());
        self.new_wait();
    }

    fn is_continue_phase(&self) -> bool {
        matches!(
            self.phase,
            Phase::Greeting(GreetingStage::AwaitingGo) | Phase::SetRest | Phase::AwaitContinue(_)
        )
    }

    fn continue_received(&mut self) {
        self.stop_listening();
        self.log(EventKind::AssistanceCompleted {
            assistance: AssistanceKind::KeepingPace,
        });
        self.set_cue(CueEffect::AllOff);
        match self.phase {
            Phase::Greeting(_) | Phase::AwaitContinue(Continue::StartProgram) => {
                let first = self.first_activity_index();
                self.enter_activity(first);
            }
            Phase::AwaitContinue(Continue::StartSet) => self.start_set(1),
            Phase::SetRest => self.start_set(self.cursor.set_index + 1),
            Phase::AwaitContinue(Continue::NextActivity) => self.enter_activity(self.cursor.program_index + 1),
            _ => unreachable!("not a continue phase"),
        }
    }

    // ---- activities ------------------------------------------------------

    fn enter_activity(&mut self, index: usize) {
        if index >= self.config.program.len() {
            self.finish();
            return;
        }
        self.cursor = Cursor {
            program_index: index,
            set_index: 0,
        };
        let entry = self.config.program[index];
        self.speed = entry.speed();
        self.log(EventKind::ActivityStarted {
            index,
            activity: entry.activity,
        });
        let spec = self.spec(index);
        let mut steps = VecDeque::new();
        if spec.posture != self.robot_posture && spec.posture != Posture::LyingSide {
            steps.push_back(EntryStep::Assist(AssistanceKind::Positioning));
        }
        if spec.needs(AssistanceKind::PostureChange).is_some() && self.robot_posture != Posture::LyingSide {
            steps.push_back(EntryStep::Assist(AssistanceKind::PostureChange));
        }
        if spec.needs(AssistanceKind::AuxiliaryAid).is_some() {
            steps.push_back(EntryStep::Assist(AssistanceKind::AuxiliaryAid));
        }
        match entry.plan {
            ActivityPlan::Exercise { .. } => {
                steps.push_back(EntryStep::Demonstrate);
                steps.push_back(EntryStep::StartSetPrompt);
            }
            ActivityPlan::ToyRelay { .. } => {
                steps.push_back(EntryStep::Demonstrate);
                steps.push_back(EntryStep::RelayRounds);
            }
            ActivityPlan::Scripted => match entry.activity {
                ActivityId::FarewellDance => steps.push_back(EntryStep::FarewellQuestion),
                // Only reachable if an intro is scheduled mid-program; the greeting covers it.
                _ => {}
            },
        }
        self.entry = steps;
        self.next_entry_step();
    }

    fn next_entry_step(&mut self) {
        let Some(step) = self.entry.pop_front() else {
            self.activity_completed();
            return;
        };
        let index = self.cursor.program_index;
        match step {
            EntryStep::Assist(kind) => {
                let spec = self.spec(index);
                let script = match kind {
                    AssistanceKind::Positioning => {
                        let key = format!("positioning.{}", spec.posture.name());
                        self.catalog.script(&key).to_string()
                    }
                    _ => spec.needs(kind).map(|n| n.request_script.clone()).unwrap_or_default(),
                };
                let script = personalize(&script, &self.config.patient_name, &self.config.carer_name);
                self.phase = if kind == AssistanceKind::Positioning {
                    Phase::PositioningRequest
                } else {
                    Phase::AssistanceRequest(kind)
                };
                self.emit(Command::Speak { text: script.clone() });
                self.emit(Command::RequestAssistance {
                    assistance: kind,
                    script,
                });
                self.log(EventKind::AssistanceRequested { assistance: kind });
                self.set_cue(CueEffect::PromptHeadTap);
                self.new_wait();
            }
            EntryStep::Demonstrate => {
                let spec = self.spec(index).clone();
                self.phase = Phase::Demonstration;
                self.set_cue(CueEffect::AllOff);
                self.say(&spec.demo_script);
                self.start_motion(Motion::Demonstrate(spec.id), spec.demo_duration);
                self.start_timer(spec.demo_duration);
            }
            EntryStep::StartSetPrompt => {
                self.prompt_continue(scripts::START_SET, Phase::AwaitContinue(Continue::StartSet));
            }
            EntryStep::RelayRounds => self.relay_round(1),
            EntryStep::FarewellQuestion => {
                self.phase = Phase::FarewellDance(FarewellStage::Question);
                self.say_script(scripts::FAREWELL_QUESTION);
                self.set_cue(CueEffect::PromptAndListen);
                self.listen(Vocabulary::yes_no());
                self.new_wait();
            }
        }
    }

    fn complete_assistance(&mut self) {
        let kind = match self.phase {
            Phase::PositioningRequest => AssistanceKind::Positioning,
            Phase::AssistanceRequest(k) => k,
            _ => return,
        };
        self.log(EventKind::AssistanceCompleted { assistance: kind });
        match kind {
            AssistanceKind::Positioning => self.robot_posture = self.spec(self.cursor.program_index).posture,
            AssistanceKind::PostureChange => self.robot_posture = Posture::LyingSide,
            _ => {}
        }
        self.set_cue(CueEffect::AllOff);
        self.next_entry_step();
    }

    fn activity_completed(&mut self) {
        let index = self.cursor.program_index;
        self.log(EventKind::ActivityCompleted {
            index,
            activity: self.current_activity(),
        });
        if index + 1 >= self.config.program.len() {
            self.finish();
        } else {
            self.prompt_continue(scripts::NEXT_ACTIVITY, Phase::AwaitContinue(Continue::NextActivity));
        }
    }

    fn finish(&mut self) {
        self.say_script(scripts::GOODBYE);
        self.set_cue(CueEffect::AllOff);
        self.log(EventKind::SessionEnded {
            status: SessionStatus::Finished,
        });
        self.phase = Phase::Completed;
    }

    // ---- sets ------------------------------------------------------------

    fn plan(&self) -> (u32, u32) {
        let a = &self.config.program[self.cursor.program_index];
        (a.sets(), a.reps())
    }

    fn rep_len(&self) -> Millis {
        rep_duration(self.spec(self.cursor.program_index), self.speed).expect("sets only run for exercises")
    }

    fn start_set(&mut self, set: u32) {
        let (_, reps) = self.plan();
        self.cursor.set_index = set;
        self.phase = Phase::SetActive { rep: 1 };
        self.log(EventKind::SetStarted {
            activity: self.current_activity(),
            set,
            reps,
            speed: self.speed,
        });
        self.set_cue(CueEffect::AllOff);
        self.say_script(scripts::SET_START);
        self.start_rep();
    }

    fn start_rep(&mut self) {
        self.rep_anchor = self.now;
        let d = self.rep_len();
        self.start_motion(Motion::Repetition(self.current_activity()), d);
        self.start_timer(d);
    }

    fn rep_done(&mut self, rep: u32) {
        let (sets, reps) = self.plan();
        let set = self.cursor.set_index;
        self.emit(Command::CountRep { n: rep });
        self.log(EventKind::RepCounted { set, rep });
        let cadence = self.config.interaction.utterance_cadence.max(1);
        if rep < reps && rep % cadence == 0 {
            self.interleave_utterance();
        }
        if rep < reps {
            self.phase = Phase::SetActive { rep: rep + 1 };
            self.start_rep();
            return;
        }
        self.log(EventKind::SetCompleted { set });
        if set < sets {
            self.prompt_continue(scripts::NEXT_SET, Phase::SetRest);
        } else {
            self.activity_completed();
        }
    }

    fn interleave_utterance(&mut self) {
        let id = self.current_activity();
        let text = if self.instructional_next {
            let pool = &self.catalog.lookup(id).instructional_phrases;
            self.picker.pick(Pool::Instructional(id), pool, &mut self.rng).to_string()
        } else {
            self.picker
                .pick(Pool::Motivational, self.catalog.motivational(), &mut self.rng)
                .to_string()
        };
        self.instructional_next = !self.instructional_next;
        self.say(&text);
    }

    fn change_speed(&mut self, direction: SpeedDirection) {
        let from = self.speed;
        let to = from.step(direction);
        self.log(EventKind::SpeedChanged { from, to });
        if from == to {
            return;
        }
        self.speed = to;
        if let Phase::SetActive { .. } = self.phase {
            // The rep in progress keeps its start; only its end moves.
            let due = self.now.max(self.rep_anchor + self.rep_len());
            self.stop_motion();
            let left = due - self.now;
            self.start_motion(Motion::Repetition(self.current_activity()), left);
            self.start_timer(left);
        }
    }

    // ---- toy relay and farewell -----------------------------------------

    fn relay_round(&mut self, round: u32) {
        self.phase = Phase::ToyRelayActive { round };
        let id = self.current_activity();
        let pool = &self.catalog.lookup(id).instructional_phrases;
        let instruction = self.picker.pick(Pool::Instructional(id), pool, &mut self.rng).to_string();
        self.say(&instruction);
        self.say_script(scripts::RELAY_ROUND);
        self.log(EventKind::AssistanceRequested {
            assistance: AssistanceKind::KeepingPace,
        });
        self.set_cue(CueEffect::PromptHeadTap);
        self.new_wait();
    }

    fn relay_confirmed(&mut self, round: u32) {
        self.log(EventKind::AssistanceCompleted {
            assistance: AssistanceKind::KeepingPace,
        });
        self.set_cue(CueEffect::AllOff);
        let text = self
            .picker
            .pick(Pool::Motivational, self.catalog.motivational(), &mut self.rng)
            .to_string();
        self.say(&text);
        let rounds = match self.config.program[self.cursor.program_index].plan {
            ActivityPlan::ToyRelay { rounds } => rounds,
            _ => 1,
        };
        if round < rounds {
            self.relay_round(round + 1);
        } else {
            self.activity_completed();
        }
    }

    /// Any answer to the farewell question gets the same reply, then the dance.
    fn farewell_answered(&mut self, reply: bool) {
        self.stop_listening();
        if reply {
            self.say_script(scripts::FAREWELL_GENERIC);
        }
        self.set_cue(CueEffect::AllOff);
        self.phase = Phase::FarewellDance(FarewellStage::Dancing);
        let dance = self
            .catalog
            .dance(&self.config.entertainment)
            .or_else(|| self.catalog.dances().first())
            .cloned()
            .expect("catalog has dances");
        self.say(&dance.text);
        self.start_motion(Motion::Dance, dance.duration);
        self.start_timer(dance.duration);
    }

    // ---- inputs ----------------------------------------------------------

    fn on_gesture(&mut self, g: GestureKind) {
        match g {
            GestureKind::SingleTap(_) => match self.phase {
                _ if self.is_continue_phase() => {
                    if self.window_open() {
                        self.log(EventKind::SpeechOutcome {
                            outcome: SpeechOutcome::FellBackToTactile,
                        });
                    }
                    self.continue_received();
                }
                Phase::PositioningRequest | Phase::AssistanceRequest(_) => self.complete_assistance(),
                Phase::ToyRelayActive { round } => self.relay_confirmed(round),
                Phase::FarewellDance(FarewellStage::Question) => {
                    self.log(EventKind::SpeechOutcome {
                        outcome: SpeechOutcome::FellBackToTactile,
                    });
                    self.farewell_answered(true);
                }
                _ => self.ignore("SingleTap"),
            },
            GestureKind::PauseChord => match self.phase {
                Phase::Paused(_) => self.resume(),
                Phase::Idle | Phase::LoadingConfig | Phase::Faulted { .. } | Phase::Aborted | Phase::Completed => {
                    self.ignore("PauseChord")
                }
                _ => self.pause(),
            },
            GestureKind::SpeedUpChord | GestureKind::SlowDownChord => match self.phase {
                Phase::SetActive { .. } | Phase::SetRest => {
                    let dir = if g == GestureKind::SpeedUpChord {
                        SpeedDirection::Faster
                    } else {
                        SpeedDirection::Slower
                    };
                    self.change_speed(dir);
                }
                _ => self.ignore("SpeedChord"),
            },
            GestureKind::DoubleTap(_) => self.ignore("DoubleTap"),
            GestureKind::LongPress(_) => self.ignore("LongPress"),
        }
    }

    fn on_speech(&mut self, token: String, late: bool) {
        let farewell = self.phase == Phase::FarewellDance(FarewellStage::Question);
        if self.listen.is_none() || !(self.is_continue_phase() || farewell) {
            self.ignore("SpeechHeard");
            return;
        }
        if late {
            self.log(EventKind::LateSpeech { token });
        } else {
            self.log(EventKind::SpeechOutcome {
                outcome: SpeechOutcome::Matched(token),
            });
        }
        if farewell {
            self.farewell_answered(true);
        } else {
            self.continue_received();
        }
    }

    fn on_speech_timeout(&mut self) {
        if !self.window_open() {
            self.ignore("SpeechTimeout");
            return;
        }
        self.log(EventKind::SpeechOutcome {
            outcome: SpeechOutcome::TimedOut,
        });
        if let Some(l) = self.listen.as_mut() {
            l.window_open = false;
        }
        match self.phase {
            Phase::FarewellDance(FarewellStage::Question) => {
                // The open question's fallback is the generic reply itself.
                self.say_script(scripts::FAREWELL_GENERIC);
                self.farewell_answered(false);
            }
            Phase::Greeting(_) => {
                self.say_script(scripts::SPEECH_FALLBACK);
                self.phase = Phase::AwaitContinue(Continue::StartProgram);
            }
            _ => self.say_script(scripts::SPEECH_FALLBACK),
        }
    }

    // ---- pause, faults, abort --------------------------------------------

    fn suspend(&mut self) {
        let timer_left = self.cancel_timer();
        let motion_left = self.stop_motion();
        let listening = self.stop_listening().map(|l| l.vocabulary);
        self.suspended = Some(Suspended {
            at: self.now,
            timer_left,
            motion_left,
            listening,
            cue: self.cue,
        });
    }

    fn restore(&mut self) {
        let Some(s) = self.suspended.take() else {
            return;
        };
        self.rep_anchor = self.rep_anchor + (self.now - s.at);
        self.set_cue(s.cue);
        if let Some((motion, left)) = s.motion_left {
            self.start_motion(motion, left);
        }
        if let Some(left) = s.timer_left {
            self.start_timer(left);
        }
        if let Some(v) = s.listening {
            self.listen(v);
        }
    }

    fn pause(&mut self) {
        self.suspend();
        self.log(EventKind::PausedAt);
        self.set_cue(CueEffect::PausedPattern);
        let prior = std::mem::replace(&mut self.phase, Phase::Idle);
        self.phase = Phase::Paused(Box::new(prior));
        self.new_wait();
    }

    fn resume(&mut self) {
        let Phase::Paused(prior) = std::mem::replace(&mut self.phase, Phase::Idle) else {
            unreachable!("resume outside pause");
        };
        self.phase = *prior;
        self.log(EventKind::ResumedAt);
        self.restore();
        self.new_wait();
    }

    fn on_fault(&mut self, fault: FaultKind) {
        match fault {
            FaultKind::FallDuringDance => {
                if self.phase != Phase::FarewellDance(FarewellStage::Dancing) {
                    self.ignore("FallDuringDance");
                    return;
                }
                self.log(EventKind::FaultOccurred { fault });
                self.dance_left = self.cancel_timer().unwrap_or(Millis::ZERO);
                self.stop_motion();
                self.phase = Phase::FarewellDance(FarewellStage::Recovering);
                self.say_script(scripts::FALL_RECOVERY);
                self.start_motion(Motion::StandUp, STAND_UP_TIME);
                self.start_timer(STAND_UP_TIME);
            }
            FaultKind::BatteryDrain => {
                if matches!(self.phase, Phase::Faulted { .. }) {
                    self.ignore("BatteryDrain");
                    return;
                }
                self.log(EventKind::FaultOccurred { fault });
                if !matches!(self.phase, Phase::Paused(_)) {
                    self.suspend();
                }
                self.set_cue(CueEffect::AllOff);
                let prior = std::mem::replace(&mut self.phase, Phase::Idle);
                self.phase = Phase::Faulted {
                    fault,
                    resume_to: Box::new(prior),
                };
                self.new_wait();
            }
            FaultKind::UnrecoverableError => {
                self.log(EventKind::FaultOccurred { fault });
                self.end(SessionStatus::Aborted);
            }
        }
    }

    fn on_engineer_reset(&mut self) {
        let Phase::Faulted { .. } = self.phase else {
            self.ignore("EngineerReset");
            return;
        };
        let Phase::Faulted { resume_to, .. } = std::mem::replace(&mut self.phase, Phase::Idle) else {
            unreachable!()
        };
        self.log(EventKind::EngineerIntervention);
        self.phase = *resume_to;
        self.say_script(scripts::ENGINEER_RESUMED);
        if matches!(self.phase, Phase::Paused(_)) {
            self.set_cue(CueEffect::PausedPattern);
        } else {
            self.restore();
        }
        self.new_wait();
    }

    fn abandon_set(&mut self) {
        if let Phase::SetActive { rep } = *self.phase.innermost() {
            self.log(EventKind::SetAbandoned {
                set: self.cursor.set_index,
                reps_done: rep - 1,
            });
        }
    }

    fn halt_everything(&mut self) {
        self.cancel_timer();
        self.stop_motion();
        self.stop_listening();
        self.suspended = None;
        self.entry.clear();
    }

    fn end(&mut self, status: SessionStatus) {
        self.abandon_set();
        self.halt_everything();
        self.set_cue(CueEffect::AllOff);
        self.log(EventKind::SessionEnded { status });
        self.phase = Phase::Aborted;
    }

    fn skip_to_farewell(&mut self) {
        if matches!(
            self.phase,
            Phase::Paused(_) | Phase::Faulted { .. } | Phase::LoadingConfig | Phase::FarewellDance(_)
        ) {
            self.ignore("SkipToFarewell");
            return;
        }
        let dance = self
            .config
            .program
            .iter()
            .position(|a| a.activity == ActivityId::FarewellDance);
        self.abandon_set();
        self.halt_everything();
        self.set_cue(CueEffect::AllOff);
        match dance {
            Some(i) if i >= self.cursor.program_index => self.enter_activity(i),
            _ => self.finish(),
        }
    }
}
