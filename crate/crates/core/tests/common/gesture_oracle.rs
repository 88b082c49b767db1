//! Offline reference for gesture classification: looks at the whole press
//! timeline at once and applies the threshold rules directly.

use rehabot::config::SpeedDirection;
use rehabot::interaction::{Button, Gesture, GestureKind, RawPress, Thresholds};
use rehabot::time::Millis;

fn is_long(p: &RawPress, th: &Thresholds) -> bool {
    p.up_at.0 - p.down_at.0 >= th.long_press.0
}

pub fn oracle(presses: &[RawPress], th: Thresholds) -> Vec<Gesture> {
    let (w, l, o) = (th.double_tap_window.0, th.long_press.0, th.chord_overlap.0);
    let mut out = Vec::new();
    let emit = |out: &mut Vec<Gesture>, at: u64, kind| out.push(Gesture { at: Millis(at), kind });

    let by_button = |b: Button| {
        let mut v: Vec<RawPress> = presses.iter().copied().filter(|p| p.button == b).collect();
        v.sort_by_key(|p| p.down_at);
        v
    };
    let middle = by_button(Button::Middle);
    let mut middle_used = vec![false; middle.len()];
    let mut longs: [Vec<RawPress>; 2] = [Vec::new(), Vec::new()];

    for b in Button::ALL {
        let ps = by_button(b);
        let mut i = 0;
        while i < ps.len() {
            let p = ps[i];
            if is_long(&p, &th) {
                match b {
                    Button::Front => longs[0].push(p),
                    Button::Rear => longs[1].push(p),
                    Button::Middle => {}
                }
                i += 1;
                continue;
            }
            let next = ps.get(i + 1);
            let in_window = next.is_some_and(|q| q.down_at.0 < p.up_at.0 + w);
            if in_window && !is_long(next.unwrap(), &th) {
                let q = *next.unwrap();
                if b == Button::Middle {
                    emit(&mut out, q.up_at.0, GestureKind::DoubleTap(b));
                } else {
                    let cover = middle
                        .iter()
                        .position(|m| m.down_at.0 + o <= p.down_at.0 && m.up_at.0 >= q.up_at.0);
                    match cover {
                        None => emit(&mut out, q.up_at.0, GestureKind::DoubleTap(b)),
                        Some(k) if !is_long(&middle[k], &th) => {
                            emit(&mut out, middle[k].up_at.0, GestureKind::DoubleTap(b))
                        }
                        Some(k) => {
                            middle_used[k] = true;
                            let front_dir = th.front_double_tap;
                            let dir = if b == Button::Front { front_dir } else { front_dir.opposite() };
                            let kind = match dir {
                                SpeedDirection::Faster => GestureKind::SpeedUpChord,
                                SpeedDirection::Slower => GestureKind::SlowDownChord,
                            };
                            emit(&mut out, q.up_at.0.max(middle[k].down_at.0 + l), kind);
                        }
                    }
                }
                i += 2;
            } else {
                let at = if in_window {
                    next.unwrap().down_at.0 + l
                } else {
                    p.up_at.0 + w
                };
                emit(&mut out, at, GestureKind::SingleTap(b));
                i += 1;
            }
        }
    }

    for (k, m) in middle.iter().enumerate() {
        if is_long(m, &th) && !middle_used[k] {
            emit(&mut out, m.up_at.0, GestureKind::LongPress(Button::Middle));
        }
    }

    let mut pairs = Vec::new();
    for (i, f) in longs[0].iter().enumerate() {
        for (j, r) in longs[1].iter().enumerate() {
            let start = f.down_at.0.max(r.down_at.0);
            let end = f.up_at.0.min(r.up_at.0);
            if end >= start && end - start >= o {
                pairs.push((start + l, f.down_at.0, r.down_at.0, i, j));
            }
        }
    }
    pairs.sort();
    let mut used = [vec![false; longs[0].len()], vec![false; longs[1].len()]];
    for (c, _, _, i, j) in pairs {
        if !used[0][i] && !used[1][j] {
            used[0][i] = true;
            used[1][j] = true;
            emit(&mut out, c, GestureKind::PauseChord);
        }
    }
    for (s, b) in [(0, Button::Front), (1, Button::Rear)] {
        for (i, p) in longs[s].iter().enumerate() {
            if !used[s][i] {
                emit(&mut out, p.up_at.0 + l - o, GestureKind::LongPress(b));
            }
        }
    }
    out.sort();
    out
}

/// Random press stream: per button, non-overlapping presses with positive
/// durations and gaps, scaled around the default thresholds.
pub fn random_stream<R: rand::Rng>(rng: &mut R) -> Vec<RawPress> {
    let mut presses = Vec::new();
    for b in Button::ALL {
        let n = rng.gen_range(0..6);
        let mut t = rng.gen_range(0..1200u64);
        for _ in 0..n {
            let dur = match rng.gen_range(0..3) {
                0 => rng.gen_range(1..250),
                1 => rng.gen_range(600..1000),
                _ => rng.gen_range(1..3000),
            };
            presses.push(RawPress {
                button: b,
                down_at: Millis(t),
                up_at: Millis(t + dur),
            });
            let gap = if rng.gen_bool(0.6) { rng.gen_range(1..450) } else { rng.gen_range(1..1500) };
            t += dur + gap;
        }
    }
    presses
}
