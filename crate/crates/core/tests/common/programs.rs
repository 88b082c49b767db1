//! Random but valid session programs.

use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::Rng;
use rehabot::catalog::{ActivityId, Catalog, Posture};
use rehabot::config::{ActivityConfig, SessionConfig, SpeedSetting};

const SPEEDS: [SpeedSetting; 3] = [SpeedSetting::Slow, SpeedSetting::Medium, SpeedSetting::Fast];

/// `exercises` distinct exercises grouped by posture, optionally wrapped in
/// an intro, a toy relay and the farewell dance.
pub fn random_program<R: Rng>(rng: &mut R, exercises: usize, max_sets: u32, max_reps: u32) -> Vec<ActivityConfig> {
    let catalog = Catalog::builtin();
    let mut pool: Vec<ActivityId> = ActivityId::ALL.into_iter().filter(|a| a.is_exercise()).collect();
    pool.shuffle(rng);
    let mut chosen: Vec<ActivityId> = pool.into_iter().take(exercises).collect();
    let mut postures: Vec<Posture> = Vec::new();
    for a in &chosen {
        let p = catalog.lookup(*a).posture;
        if !postures.contains(&p) {
            postures.push(p);
        }
    }
    chosen.sort_by_key(|a| postures.iter().position(|p| *p == catalog.lookup(*a).posture));

    let mut program = Vec::new();
    if rng.gen_bool(0.3) {
        program.push(ActivityConfig::scripted(ActivityId::IntroSpeech));
    }
    for a in chosen {
        let sets = rng.gen_range(1..=max_sets);
        let reps = rng.gen_range(1..=max_reps);
        program.push(ActivityConfig::exercise(a, sets, reps, *SPEEDS.choose(rng).unwrap()));
    }
    if rng.gen_bool(0.3) {
        program.push(ActivityConfig::toy_relay(rng.gen_range(1..=3)));
    }
    if rng.gen_bool(0.6) {
        program.push(ActivityConfig::scripted(ActivityId::FarewellDance));
    }
    program
}

/// A config whose program has between `exercises.start()` and `exercises.end()` exercises.
pub fn random_config<R: Rng>(
    rng: &mut R,
    exercises: RangeInclusive<usize>,
    max_sets: u32,
    max_reps: u32,
) -> SessionConfig {
    let n = rng.gen_range(exercises);
    let mut cfg = SessionConfig::new("Sam", "Pat", random_program(rng, n, max_sets, max_reps));
    cfg.seed = rng.gen();
    cfg
}
