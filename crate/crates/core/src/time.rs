//! Virtual time.
//!
//! All engine time is integer milliseconds on a virtual clock. In fast mode the
//! clock jumps straight to the next pending event; in realtime mode the gateway
//! advances it in step with the wall clock.

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

/// A virtual timestamp or duration in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Millis(pub u64);

impl Millis {
    pub const ZERO: Millis = Millis(0);

    pub const fn from_secs(secs: u64) -> Self {
        Millis(secs * 1000)
    }

    pub const fn as_u64(self) -> u64 {
        self.0
    }

    pub fn saturating_sub(self, other: Millis) -> Millis {
        Millis(self.0.saturating_sub(other.0))
    }

    /// Renders as `mm:ss`, truncating any fractional second.
    pub fn to_mm_ss(self) -> String {
        let secs = self.0 / 1000;
        format!("{:02}:{:02}", secs / 60, secs % 60)
    }
}

impl Add for Millis {
    type Output = Millis;
    fn add(self, rhs: Millis) -> Millis {
        Millis(self.0 + rhs.0)
    }
}

impl Sub for Millis {
    type Output = Millis;
    fn sub(self, rhs: Millis) -> Millis {
        Millis(self.0 - rhs.0)
    }
}

impl fmt::Display for Millis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.0)
    }
}

/// Monotonic virtual clock owned by the event loop.
#[derive(Debug, Clone, Default)]
pub struct VirtualClock {
    now: Millis,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> Millis {
        self.now
    }

    /// Moves the clock forward. Moving backwards is a logic error in the caller.
    pub fn advance_to(&mut self, t: Millis) {
        debug_assert!(t >= self.now, "virtual clock moved backwards");
        if t > self.now {
            self.now = t;
        }
    }
}
