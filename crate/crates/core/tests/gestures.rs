mod common;

use common::gesture_oracle::{oracle, random_stream};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rehabot::config::SpeedDirection;
use rehabot::interaction::{classify_presses, Button, GestureKind, RawPress, Thresholds};
use rehabot::time::Millis;

#[test]
fn online_matches_offline_on_seeded_streams() {
    let th = Thresholds::default();
    let mut seen = std::collections::HashMap::new();
    for seed in 0..3000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stream = random_stream(&mut rng);
        let got = classify_presses(&stream, th);
        assert_eq!(got, oracle(&stream, th), "seed {seed}: {stream:?}");
        for g in got {
            *seen.entry(std::mem::discriminant(&g.kind)).or_insert(0usize) += 1;
        }
    }
    // the generator reaches every gesture shape
    for kind in [
        GestureKind::SingleTap(Button::Front),
        GestureKind::DoubleTap(Button::Front),
        GestureKind::LongPress(Button::Front),
        GestureKind::SpeedUpChord,
        GestureKind::SlowDownChord,
        GestureKind::PauseChord,
    ] {
        let n = seen.get(&std::mem::discriminant(&kind)).copied().unwrap_or(0);
        assert!(n >= 50, "{kind:?} seen only {n} times");
    }
}

#[test]
fn alternative_thresholds_agree_too() {
    let th = Thresholds {
        double_tap_window: Millis(250),
        long_press: Millis(500),
        chord_overlap: Millis(500),
        front_double_tap: SpeedDirection::Faster,
    };
    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
        let stream = random_stream(&mut rng);
        assert_eq!(classify_presses(&stream, th), oracle(&stream, th), "seed {seed}: {stream:?}");
    }
}

fn arb_stream() -> impl Strategy<Value = Vec<RawPress>> {
    let button = prop_oneof![Just(Button::Front), Just(Button::Middle), Just(Button::Rear)];
    proptest::collection::vec((button, 1u64..1200, 1u64..2500), 0..12).prop_map(|specs| {
        let mut next_free = [0u64; 3];
        specs
            .into_iter()
            .map(|(b, gap, dur)| {
                let slot = &mut next_free[b as usize];
                let down = *slot + gap;
                *slot = down + dur;
                RawPress {
                    button: b,
                    down_at: Millis(down),
                    up_at: Millis(down + dur),
                }
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn classification_is_deterministic_and_order_free(stream in arb_stream()) {
        let th = Thresholds::default();
        let a = classify_presses(&stream, th);
        let mut rev = stream.clone();
        rev.reverse();
        prop_assert_eq!(&a, &classify_presses(&rev, th));
        prop_assert_eq!(a, oracle(&stream, th));
    }

    #[test]
    fn every_gesture_uses_its_own_presses(stream in arb_stream()) {
        let out = classify_presses(&stream, Thresholds::default());
        // taps, long presses and chords each need at least one press nobody else uses
        prop_assert!(out.len() <= stream.len());
    }
}
