//! Simulated robot: timed opaque motions, a battery and injected faults.
//!
//! Battery charge is kept in integer units so drain is exact and additive:
//! one millisecond of motion costs [`UNITS_PER_MS`] units, an idle
//! millisecond costs `idle_drain` of that, and a full battery holds
//! `battery_capacity` milliseconds of continuous motion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{ActivityId, Posture};
use crate::config::FaultSettings;
use crate::time::Millis;

pub const UNITS_PER_MS: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaultKind {
    FallDuringDance,
    BatteryDrain,
    UnrecoverableError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "motion", content = "of")]
pub enum Motion {
    Intro,
    Demonstrate(ActivityId),
    Repetition(ActivityId),
    Dance,
    StandUp,
}

impl Motion {
    /// Posture the robot ends up in.
    fn posture(self, catalog_posture: impl Fn(ActivityId) -> Posture) -> Posture {
        match self {
            Motion::Intro | Motion::StandUp => Posture::Crouched,
            Motion::Demonstrate(id) | Motion::Repetition(id) => catalog_posture(id),
            Motion::Dance => Posture::Standing,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaultProfile {
    pub fall_probability_per_dance: f64,
    pub battery_capacity: Millis,
    pub idle_drain: f64,
    pub seed: u64,
}

impl FaultProfile {
    pub fn from_settings(s: &FaultSettings, seed: u64) -> Self {
        Self {
            fall_probability_per_dance: s.fall_probability,
            battery_capacity: Millis(s.battery_capacity_ms),
            idle_drain: s.idle_drain,
            seed,
        }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum RobotError {
    #[error("cannot move while fallen")]
    MotionWhileFallen,
    #[error("battery is empty")]
    BatteryEmpty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotionInProgress {
    pub motion: Motion,
    pub started: Millis,
    pub ends_at: Millis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotSimState {
    pub posture: Posture,
    pub motion: Option<MotionInProgress>,
    /// Remaining charge in [0, 1].
    pub battery: f64,
    pub fallen: bool,
}

/// One accounted stretch of battery drain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Drain {
    pub from: Millis,
    pub to: Millis,
    pub motion: Option<Motion>,
    pub units: u64,
}

#[derive(Debug, Clone)]
pub struct SimRobot {
    profile: FaultProfile,
    rng: ChaCha8Rng,
    idle_rate: u64,
    capacity: u64,
    charge: u64,
    posture: Posture,
    motion: Option<MotionInProgress>,
    fallen: bool,
    /// Battery fault already raised and not yet recharged.
    depleted: bool,
    pending_fall: Option<Millis>,
    /// The current dance already fell once; its resumption does not roll again.
    dance_fell: bool,
    now: Millis,
    drains: Vec<Drain>,
    postures: fn(ActivityId) -> Posture,
}

fn builtin_posture(id: ActivityId) -> Posture {
    crate::catalog::Catalog::builtin().lookup(id).posture
}

impl SimRobot {
    pub fn new(profile: FaultProfile) -> Self {
        let capacity = profile.battery_capacity.0.saturating_mul(UNITS_PER_MS).max(1);
        let idle_rate = (profile.idle_drain.clamp(0.0, 1.0) * UNITS_PER_MS as f64).round() as u64;
        Self {
            rng: ChaCha8Rng::seed_from_u64(profile.seed),
            profile,
            idle_rate,
            capacity,
            charge: capacity,
            posture: Posture::Crouched,
            motion: None,
            fallen: false,
            depleted: false,
            pending_fall: None,
            dance_fell: false,
            now: Millis::ZERO,
            drains: Vec::new(),
            postures: builtin_posture,
        }
    }

    pub fn state(&self) -> RobotSimState {
        RobotSimState {
            posture: self.posture,
            motion: self.motion,
            battery: self.charge as f64 / self.capacity as f64,
            fallen: self.fallen,
        }
    }

    pub fn profile(&self) -> &FaultProfile {
        &self.profile
    }

    pub fn charge_units(&self) -> u64 {
        self.charge
    }

    pub fn capacity_units(&self) -> u64 {
        self.capacity
    }

    pub fn drains(&self) -> &[Drain] {
        &self.drains
    }

    fn rate(&self, moving: bool) -> u64 {
        if moving {
            UNITS_PER_MS
        } else {
            self.idle_rate
        }
    }

    fn accrue(&mut self, from: Millis, to: Millis, motion: Option<Motion>) {
        if to <= from {
            return;
        }
        let want = (to.0 - from.0).saturating_mul(self.rate(motion.is_some()));
        let units = want.min(self.charge);
        self.charge -= units;
        if units > 0 {
            self.drains.push(Drain { from, to, motion, units });
        }
    }

    /// Accounts drain up to `now` and retires finished motions.
    pub fn advance_to(&mut self, now: Millis) {
        if now <= self.now {
            return;
        }
        if let Some(m) = self.motion {
            let end = m.ends_at.min(now);
            self.accrue(self.now, end, Some(m.motion));
            if m.ends_at <= now {
                self.motion = None;
                self.accrue(end, now, None);
            }
        } else {
            self.accrue(self.now, now, None);
        }
        self.now = now;
    }

    /// Starts a motion at the current instant. Zero-length motions complete
    /// immediately and cost nothing.
    pub fn execute_motion(&mut self, motion: Motion, duration: Millis, now: Millis) -> Result<Millis, RobotError> {
        self.advance_to(now);
        if self.fallen && motion != Motion::StandUp {
            return Err(RobotError::MotionWhileFallen);
        }
        if self.charge == 0 {
            return Err(RobotError::BatteryEmpty);
        }
        if motion == Motion::StandUp {
            self.fallen = false;
        }
        self.posture = motion.posture(self.postures);
        let ends_at = now + duration;
        self.motion = (duration > Millis::ZERO).then_some(MotionInProgress {
            motion,
            started: now,
            ends_at,
        });
        self.pending_fall = None;
        if !matches!(motion, Motion::Dance | Motion::StandUp) {
            self.dance_fell = false;
        }
        if motion == Motion::Dance && duration > Millis::ZERO && !self.dance_fell {
            let p = self.profile.fall_probability_per_dance.clamp(0.0, 1.0);
            if p > 0.0 && self.rng.gen_bool(p) {
                self.pending_fall = Some(Millis(now.0 + self.rng.gen_range(0..duration.0)));
            }
        }
        Ok(ends_at)
    }

    pub fn stop_motion(&mut self, now: Millis) {
        self.advance_to(now);
        self.motion = None;
        self.pending_fall = None;
    }

    /// Instant at which the battery runs flat under the current plan.
    fn empty_at(&self) -> Option<Millis> {
        if self.depleted {
            return None;
        }
        let mut charge = self.charge;
        let mut t = self.now;
        if let Some(m) = self.motion {
            let span = m.ends_at.0 - t.0;
            if charge <= span * UNITS_PER_MS {
                return Some(Millis(t.0 + charge.div_ceil(UNITS_PER_MS)));
            }
            charge -= span * UNITS_PER_MS;
            t = m.ends_at;
        }
        if self.idle_rate == 0 {
            return None;
        }
        Some(Millis(t.0 + charge.div_ceil(self.idle_rate)))
    }

    /// Earliest pending fault.
    pub fn next_fault(&self) -> Option<(Millis, FaultKind)> {
        let battery = self.empty_at().map(|t| (t, FaultKind::BatteryDrain));
        let fall = self.pending_fall.map(|t| (t, FaultKind::FallDuringDance));
        match (battery, fall) {
            (Some(b), Some(f)) => Some(if f.0 < b.0 { f } else { b }),
            (b, f) => b.or(f),
        }
    }

    /// Raises the fault due at `now`, if any, updating robot state.
    pub fn take_fault(&mut self, now: Millis) -> Option<FaultKind> {
        let (t, kind) = self.next_fault()?;
        if t > now {
            return None;
        }
        self.advance_to(now);
        self.apply_fault(kind, now);
        Some(kind)
    }

    /// Forces a fault regardless of the model, e.g. from a CLI flag.
    pub fn apply_fault(&mut self, kind: FaultKind, now: Millis) {
        self.advance_to(now);
        self.pending_fall = None;
        match kind {
            FaultKind::FallDuringDance => {
                self.motion = None;
                self.fallen = true;
                self.dance_fell = true;
            }
            FaultKind::BatteryDrain => {
                self.motion = None;
                if self.charge > 0 {
                    self.drains.push(Drain {
                        from: now,
                        to: now,
                        motion: None,
                        units: self.charge,
                    });
                }
                self.charge = 0;
                self.depleted = true;
            }
            FaultKind::UnrecoverableError => {
                self.motion = None;
            }
        }
    }

    /// Engineer swaps or charges the battery.
    pub fn recharge(&mut self, now: Millis) {
        self.advance_to(now);
        self.charge = self.capacity;
        self.depleted = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(capacity_min: u64, fall: f64) -> FaultProfile {
        FaultProfile {
            fall_probability_per_dance: fall,
            battery_capacity: Millis(capacity_min * 60_000),
            idle_drain: 0.05,
            seed: 11,
        }
    }

    #[test]
    fn zero_length_motion_is_free() {
        let mut r = SimRobot::new(profile(35, 0.0));
        let before = r.charge_units();
        assert_eq!(r.execute_motion(Motion::Intro, Millis::ZERO, Millis::ZERO), Ok(Millis::ZERO));
        assert_eq!(r.charge_units(), before);
        assert!(r.state().motion.is_none());
    }

    #[test]
    fn stand_up_after_fall() {
        let mut r = SimRobot::new(profile(35, 1.0));
        r.execute_motion(Motion::Dance, Millis(90_000), Millis(0)).unwrap();
        let (t, kind) = r.next_fault().unwrap();
        assert_eq!(kind, FaultKind::FallDuringDance);
        assert!(t < Millis(90_000));
        assert_eq!(r.take_fault(t), Some(kind));
        let s = r.state();
        assert!(s.fallen && s.motion.is_none());
        assert_eq!(
            r.execute_motion(Motion::Dance, Millis(1000), t),
            Err(RobotError::MotionWhileFallen)
        );
        r.execute_motion(Motion::StandUp, Millis(4000), t).unwrap();
        let s = r.state();
        assert!(!s.fallen);
        assert_eq!(s.posture, Posture::Crouched);

        // the resumed dance is the same dance: no second roll
        let resume = t + Millis(4000);
        r.execute_motion(Motion::Dance, Millis(60_000), resume).unwrap();
        assert_eq!(r.next_fault().map(|f| f.1), Some(FaultKind::BatteryDrain));
        // a later dance rolls again
        r.execute_motion(Motion::Intro, Millis(1000), resume + Millis(60_000)).unwrap();
        r.execute_motion(Motion::Dance, Millis(60_000), resume + Millis(61_000)).unwrap();
        assert!(r.next_fault().is_some_and(|f| f.1 == FaultKind::FallDuringDance));
    }

    #[test]
    fn second_back_to_back_block_drains_battery() {
        // two ~17.5-minute stretches of continuous motion against a 35-minute battery
        let block = Millis(17 * 60_000 + 30_000);
        let mut r = SimRobot::new(profile(35, 0.0));
        r.execute_motion(Motion::Dance, block, Millis(0)).unwrap();
        r.advance_to(block);
        assert!(r.next_fault().unwrap().0 > block + block);
        r.execute_motion(Motion::Dance, block + Millis(1), block).unwrap();
        let (t, kind) = r.next_fault().unwrap();
        assert_eq!(kind, FaultKind::BatteryDrain);
        assert!(t > block && t <= block + block);
        assert_eq!(t, Millis(35 * 60_000));
    }

    #[test]
    fn drains_add_up() {
        let mut r = SimRobot::new(profile(35, 0.0));
        r.execute_motion(Motion::Repetition(ActivityId::Bridge), Millis(4000), Millis(100))
            .unwrap();
        r.advance_to(Millis(10_000));
        r.execute_motion(Motion::Demonstrate(ActivityId::Bridge), Millis(30_000), Millis(12_000))
            .unwrap();
        r.stop_motion(Millis(20_000));
        r.advance_to(Millis(25_000));
        // 100 + 5900 + 2000 + 5000 idle ms at 50 units, 4000 + 8000 motion ms at 1000 units
        let expected = (100 + 5900 + 2000 + 5000) * 50 + (4000 + 8000) * 1000;
        let logged: u64 = r.drains().iter().map(|d| d.units).sum();
        assert_eq!(logged, expected);
        assert_eq!(r.capacity_units() - r.charge_units(), expected);
    }

    #[test]
    fn recharge_restores_full_battery() {
        let mut r = SimRobot::new(profile(1, 0.0));
        r.execute_motion(Motion::Dance, Millis(120_000), Millis(0)).unwrap();
        let (t, _) = r.next_fault().unwrap();
        assert_eq!(t, Millis(60_000));
        assert_eq!(r.take_fault(t), Some(FaultKind::BatteryDrain));
        assert_eq!(r.next_fault(), None);
        assert_eq!(
            r.execute_motion(Motion::Dance, Millis(1), t),
            Err(RobotError::BatteryEmpty)
        );
        r.recharge(t + Millis(5000));
        assert_eq!(r.state().battery, 1.0);
    }

    #[test]
    fn fall_times_are_seed_determined() {
        let times = |seed| {
            let mut r = SimRobot::new(FaultProfile { seed, ..profile(35, 0.5) });
            (0..20)
                .map(|i| {
                    let start = Millis(i * 200_000);
                    r.execute_motion(Motion::Dance, Millis(90_000), start).unwrap();
                    let f = r.next_fault().filter(|f| f.1 == FaultKind::FallDuringDance);
                    r.stop_motion(start + Millis(90_000));
                    r.recharge(start + Millis(90_000));
                    f
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(times(3), times(3));
        assert!(times(3).iter().any(Option::is_some));
        assert!(times(3).iter().any(Option::is_none));
    }
}
