//! Tactile gesture classification.
//!
//! Three head buttons produce down/up edges. The classifier turns them into
//! taps, double taps, long presses and the two chords:
//!
//! * speed chord — a long Middle hold that starts at least `chord_overlap`
//!   before a Front or Rear double tap and is still held when it ends;
//! * pause chord — Front and Rear long presses overlapping by at least
//!   `chord_overlap`.
//!
//! Every gesture carries the instant at which it became certain; the
//! classifier emits it exactly then. Presses consumed by a chord never also
//! surface as primitives, which is why a Front/Rear long press is only
//! reported `long_press - chord_overlap` after release, once no pause partner
//! can still appear.

use serde::{Deserialize, Serialize};

use crate::config::{InteractionSettings, SpeedDirection};
use crate::time::Millis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Button {
    Front,
    Middle,
    Rear,
}

impl Button {
    pub const ALL: [Button; 3] = [Button::Front, Button::Middle, Button::Rear];

    fn idx(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "gesture", content = "button")]
pub enum GestureKind {
    SingleTap(Button),
    DoubleTap(Button),
    LongPress(Button),
    SpeedUpChord,
    SlowDownChord,
    PauseChord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Gesture {
    pub at: Millis,
    pub kind: GestureKind,
}

/// A complete press of one button.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RawPress {
    pub button: Button,
    pub down_at: Millis,
    pub up_at: Millis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    Down,
    Up,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ButtonEdge {
    pub button: Button,
    pub kind: EdgeKind,
    pub at: Millis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Thresholds {
    pub double_tap_window: Millis,
    pub long_press: Millis,
    pub chord_overlap: Millis,
    /// Speed direction of a Front double tap under a Middle hold.
    pub front_double_tap: SpeedDirection,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self::from(&InteractionSettings::default())
    }
}

impl From<&InteractionSettings> for Thresholds {
    fn from(s: &InteractionSettings) -> Self {
        Self {
            double_tap_window: Millis(s.double_tap_window_ms),
            long_press: Millis(s.long_press_ms),
            chord_overlap: Millis(s.chord_overlap_ms.min(s.long_press_ms)),
            front_double_tap: s.front_double_tap,
        }
    }
}

/// Edges that cannot belong to a press; they are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputAnomaly {
    DownWhileHeld(Button),
    UpWithoutDown(Button),
    OutOfOrder { button: Button, at: Millis, last: Millis },
}

#[derive(Debug, Clone, Copy, Default)]
struct ButtonState {
    held: Option<Millis>,
    /// Unpaired short press `(down, up)` still inside its double-tap window.
    tap: Option<(Millis, Millis)>,
    /// The held press started inside `tap`'s window.
    second: bool,
}

#[derive(Debug, Clone, Copy)]
struct PendingDouble {
    button: Button,
    first_down: Millis,
    second_up: Millis,
}

#[derive(Debug, Clone, Copy)]
struct MiddlePress {
    down: Millis,
    up: Millis,
    consumed: bool,
}

#[derive(Debug, Clone, Copy)]
struct LongCandidate {
    down: Millis,
    up: Option<Millis>,
}


/// Online classifier. Feed edges with [`push`](Self::push) and let time pass
/// with [`advance`](Self::advance); [`next_deadline`](Self::next_deadline)
/// tells the event loop when to wake up.
#[derive(Debug, Clone)]
pub struct GestureClassifier {
    th: Thresholds,
    buttons: [ButtonState; 3],
    doubles: Vec<PendingDouble>,
    middles: Vec<MiddlePress>,
    /// Front (0) and Rear (1) long-press candidates, including held presses.
    longs: [Vec<LongCandidate>; 2],
    /// The held Middle press already carried a speed chord.
    middle_held_consumed: bool,
    processed: Option<Millis>,
    last_edge: Millis,
}

fn side(button: Button) -> Option<usize> {
    match button {
        Button::Front => Some(0),
        Button::Rear => Some(1),
        Button::Middle => None,
    }
}

impl GestureClassifier {
    pub fn new(th: Thresholds) -> Self {
        Self {
            th,
            buttons: Default::default(),
            doubles: Vec::new(),
            middles: Vec::new(),
            longs: Default::default(),
            middle_held_consumed: false,
            processed: None,
            last_edge: Millis::ZERO,
        }
    }

    pub fn thresholds(&self) -> Thresholds {
        self.th
    }

    /// Down time of the press currently holding `button`, if any.
    pub fn held_since(&self, button: Button) -> Option<Millis> {
        self.buttons[button.idx()].held
    }

    /// Feeds one edge. Deadlines strictly before the edge are processed first;
    /// deadlines at the edge's own instant wait for [`advance`](Self::advance)
    /// so that every edge of that instant is seen.
    pub fn push(&mut self, edge: ButtonEdge) -> (Vec<Gesture>, Option<InputAnomaly>) {
        let mut out = Vec::new();
        if edge.at < self.last_edge {
            let anomaly = InputAnomaly::OutOfOrder {
                button: edge.button,
                at: edge.at,
                last: self.last_edge,
            };
            return (out, Some(anomaly));
        }
        if edge.at > Millis::ZERO {
            out = self.advance(Millis(edge.at.0 - 1));
        }
        self.last_edge = edge.at;
        let anomaly = match edge.kind {
            EdgeKind::Down => self.down(edge.button, edge.at, &mut out),
            EdgeKind::Up => self.up(edge.button, edge.at, &mut out),
        };
        (out, anomaly)
    }

    fn down(&mut self, button: Button, t: Millis, out: &mut Vec<Gesture>) -> Option<InputAnomaly> {
        let w = self.th.double_tap_window;
        let st = &mut self.buttons[button.idx()];
        if st.held.is_some() {
            return Some(InputAnomaly::DownWhileHeld(button));
        }
        if let Some((_, up)) = st.tap {
            if t < up + w {
                st.second = true;
            } else {
                out.push(Gesture {
                    at: up + w,
                    kind: GestureKind::SingleTap(button),
                });
                st.tap = None;
            }
        }
        st.held = Some(t);
        if let Some(s) = side(button) {
            self.longs[s].push(LongCandidate { down: t, up: None });
        }
        None
    }

    fn up(&mut self, button: Button, t: Millis, out: &mut Vec<Gesture>) -> Option<InputAnomaly> {
        let l = self.th.long_press;
        let st = &mut self.buttons[button.idx()];
        let Some(down) = st.held.take() else {
            return Some(InputAnomaly::UpWithoutDown(button));
        };
        let long = t - down >= l;
        if long {
            if st.tap.take().is_some() {
                // The earlier tap became a single tap the moment this press turned long.
                out.push(Gesture {
                    at: down + l,
                    kind: GestureKind::SingleTap(button),
                });
            }
            st.second = false;
        } else if st.second {
            let (first_down, _) = st.tap.take().expect("second press implies pending tap");
            st.second = false;
            match button {
                Button::Middle => out.push(Gesture {
                    at: t,
                    kind: GestureKind::DoubleTap(button),
                }),
                _ => self.doubles.push(PendingDouble {
                    button,
                    first_down,
                    second_up: t,
                }),
            }
        } else {
            st.tap = Some((down, t));
        }
        match side(button) {
            Some(s) => {
                let track = &mut self.longs[s];
                if let Some(pos) = track.iter().position(|c| c.down == down && c.up.is_none()) {
                    if long {
                        track[pos].up = Some(t);
                    } else {
                        track.remove(pos);
                    }
                }
            }
            None => {
                let consumed = std::mem::take(&mut self.middle_held_consumed);
                self.middles.push(MiddlePress { down, up: t, consumed });
            }
        }
        None
    }

    /// The Middle press covering a double tap, as `(down, up if released)`.
    fn middle_cover(&self, d: &PendingDouble) -> Option<(Millis, Option<Millis>)> {
        let o = self.th.chord_overlap;
        if let Some(down) = self.buttons[Button::Middle.idx()].held {
            if down + o <= d.first_down {
                return Some((down, None));
            }
        }
        self.middles
            .iter()
            .find(|m| m.down + o <= d.first_down && m.up >= d.second_up)
            .map(|m| (m.down, Some(m.up)))
    }

    fn chord_for(&self, button: Button) -> GestureKind {
        let dir = if button == Button::Front {
            self.th.front_double_tap
        } else {
            self.th.front_double_tap.opposite()
        };
        match dir {
            SpeedDirection::Faster => GestureKind::SpeedUpChord,
            SpeedDirection::Slower => GestureKind::SlowDownChord,
        }
    }

    /// When and as what a pending double tap surfaces, given what is known
    /// now, plus the Middle press it consumes. A still-held Middle press turns
    /// the double tap into a chord once the hold reaches the long threshold;
    /// if it is released sooner the answer changes on the next call.
    fn resolve_double(&self, d: &PendingDouble) -> (Millis, GestureKind, Option<Millis>) {
        let l = self.th.long_press;
        match self.middle_cover(d) {
            None => (d.second_up, GestureKind::DoubleTap(d.button), None),
            Some((down, Some(up))) if up - down < l => (up, GestureKind::DoubleTap(d.button), None),
            Some((down, _)) => (d.second_up.max(down + l), self.chord_for(d.button), Some(down)),
        }
    }

    fn pause_pairs(&self) -> Vec<(Millis, usize, usize)> {
        let l = self.th.long_press;
        let mut pairs = Vec::new();
        for (i, f) in self.longs[0].iter().enumerate() {
            for (j, r) in self.longs[1].iter().enumerate() {
                pairs.push((f.down.max(r.down) + l, i, j));
            }
        }
        pairs
    }

    /// Earliest instant at which something may be emitted.
    pub fn next_deadline(&self) -> Option<Millis> {
        let w = self.th.double_tap_window;
        let l = self.th.long_press;
        let o = self.th.chord_overlap;
        let mut best: Option<Millis> = None;
        let mut offer = |t: Millis| best = Some(best.map_or(t, |b: Millis| b.min(t)));
        for st in &self.buttons {
            match (st.tap, st.second, st.held) {
                (Some((_, up)), false, _) => offer(up + w),
                (Some(_), true, Some(down)) => offer(down + l),
                _ => {}
            }
        }
        for d in &self.doubles {
            offer(self.resolve_double(d).0);
        }
        for m in &self.middles {
            if !m.consumed && m.up - m.down >= l {
                offer(m.up);
            }
        }
        for (c, ..) in self.pause_pairs() {
            if self.processed.is_none_or(|p| c > p) {
                offer(c);
            }
        }
        for track in &self.longs {
            for c in track {
                if let Some(up) = c.up {
                    offer(up + l - o);
                }
            }
        }
        best
    }

    /// Processes every deadline up to and including `now`.
    pub fn advance(&mut self, now: Millis) -> Vec<Gesture> {
        let mut out = Vec::new();
        while let Some(d) = self.next_deadline() {
            if d > now {
                break;
            }
            self.step(d, &mut out);
            self.processed = Some(self.processed.map_or(d, |p| p.max(d)));
        }
        self.processed = Some(self.processed.map_or(now, |p| p.max(now)));
        self.middles.retain(|m| m.up >= now || (!m.consumed && m.up - m.down >= self.th.long_press));
        out
    }

    fn step(&mut self, d: Millis, out: &mut Vec<Gesture>) {
        let w = self.th.double_tap_window;
        let l = self.th.long_press;
        let o = self.th.chord_overlap;

        for button in Button::ALL {
            let st = &mut self.buttons[button.idx()];
            match (st.tap, st.second, st.held) {
                (Some((_, up)), false, _) if up + w <= d => {
                    out.push(Gesture {
                        at: up + w,
                        kind: GestureKind::SingleTap(button),
                    });
                    st.tap = None;
                }
                (Some(_), true, Some(down)) if down + l <= d => {
                    out.push(Gesture {
                        at: down + l,
                        kind: GestureKind::SingleTap(button),
                    });
                    st.tap = None;
                    st.second = false;
                }
                _ => {}
            }
        }

        // Speed chords and plain Front/Rear double taps.
        let mut i = 0;
        while i < self.doubles.len() {
            let (at, kind, middle) = self.resolve_double(&self.doubles[i]);
            if at > d {
                i += 1;
                continue;
            }
            if let Some(m_down) = middle {
                if self.buttons[Button::Middle.idx()].held == Some(m_down) {
                    self.middle_held_consumed = true;
                } else if let Some(m) = self.middles.iter_mut().find(|m| m.down == m_down) {
                    m.consumed = true;
                }
            }
            out.push(Gesture { at, kind });
            self.doubles.remove(i);
        }

        // Pause chords, greedily by (chord time, front down, rear down).
        let mut pairs: Vec<(Millis, Millis, Millis, usize, usize)> = self
            .pause_pairs()
            .into_iter()
            .filter(|(c, ..)| *c == d)
            .map(|(c, i, j)| (c, self.longs[0][i].down, self.longs[1][j].down, i, j))
            .collect();
        pairs.sort();
        let mut used_f = Vec::new();
        let mut used_r = Vec::new();
        for (c, _, _, i, j) in pairs {
            if used_f.contains(&i) || used_r.contains(&j) {
                continue;
            }
            let f = self.longs[0][i];
            let r = self.longs[1][j];
            let is_long = |x: &LongCandidate| x.up.map_or(d >= x.down + l, |u| u - x.down >= l);
            let end = match (f.up, r.up) {
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => d,
            };
            let start = f.down.max(r.down);
            if is_long(&f) && is_long(&r) && end >= start && end - start >= o {
                out.push(Gesture {
                    at: c,
                    kind: GestureKind::PauseChord,
                });
                used_f.push(i);
                used_r.push(j);
            }
        }
        used_f.sort_unstable();
        used_r.sort_unstable();
        for i in used_f.into_iter().rev() {
            self.longs[0].remove(i);
        }
        for j in used_r.into_iter().rev() {
            self.longs[1].remove(j);
        }

        // Unconsumed long presses.
        let mut k = 0;
        while k < self.middles.len() {
            let m = self.middles[k];
            if m.up <= d && m.up - m.down >= l {
                if !m.consumed {
                    out.push(Gesture {
                        at: m.up,
                        kind: GestureKind::LongPress(Button::Middle),
                    });
                }
                self.middles[k].consumed = true;
            }
            k += 1;
        }
        for (s, button) in [(0, Button::Front), (1, Button::Rear)] {
            self.longs[s].retain(|c| match c.up {
                Some(up) if up + l - o <= d => {
                    out.push(Gesture {
                        at: up + l - o,
                        kind: GestureKind::LongPress(button),
                    });
                    false
                }
                _ => true,
            });
        }
    }
}

/// Offline entry point: classifies a complete press list.
///
/// Presses may come in any order; overlapping presses of the same button are
/// malformed and the later one is dropped. Output is ordered by time, ties
/// broken by gesture kind.
pub fn classify_presses(presses: &[RawPress], th: Thresholds) -> Vec<Gesture> {
    let mut edges: Vec<ButtonEdge> = presses
        .iter()
        .flat_map(|p| {
            [
                ButtonEdge {
                    button: p.button,
                    kind: EdgeKind::Down,
                    at: p.down_at,
                },
                ButtonEdge {
                    button: p.button,
                    kind: EdgeKind::Up,
                    at: p.up_at.max(p.down_at),
                },
            ]
        })
        .collect();
    // Releases before presses at the same instant so back-to-back presses stay separate.
    edges.sort_by_key(|e| (e.at, e.kind == EdgeKind::Down, e.button));
    let mut c = GestureClassifier::new(th);
    let mut out = Vec::new();
    for e in edges {
        out.extend(c.push(e).0);
    }
    while let Some(d) = c.next_deadline() {
        out.extend(c.advance(d));
    }
    out.sort();
    out
}
