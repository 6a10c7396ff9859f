//! Virtual time.
//!
//! All simulated time is kept as integer tenths of a millisecond so that
//! latency sums such as `417.1 + 623.0 + 1148.6 + 450.0` are exact. Values
//! cross the serialization boundary as milliseconds with one decimal.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Ticks per millisecond.
pub const TICKS_PER_MS: u64 = 10;

/// Converts a millisecond value with at most one meaningful decimal to ticks.
///
/// Returns `None` for negative, NaN or infinite input.
pub fn ms_to_ticks(ms: f64) -> Option<u64> {
    if !ms.is_finite() || ms < 0.0 {
        return None;
    }
    let ticks = (ms * TICKS_PER_MS as f64).round();
    if ticks > u64::MAX as f64 {
        return None;
    }
    Some(ticks as u64)
}

fn ticks_to_ms(ticks: u64) -> f64 {
    ticks as f64 / TICKS_PER_MS as f64
}

fn fmt_ticks(ticks: u64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    write!(f, "{}.{}", ticks / TICKS_PER_MS, ticks % TICKS_PER_MS)
}

/// A point on the simulation clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct VirtualTime(u64);

impl VirtualTime {
    pub const ZERO: VirtualTime = VirtualTime(0);

    pub const fn from_ticks(ticks: u64) -> Self {
        VirtualTime(ticks)
    }

    pub const fn from_ms(ms: u64) -> Self {
        VirtualTime(ms * TICKS_PER_MS)
    }

    pub fn from_ms_f64(ms: f64) -> Option<Self> {
        ms_to_ticks(ms).map(VirtualTime)
    }

    pub const fn ticks(self) -> u64 {
        self.0
    }

    pub fn as_ms(self) -> f64 {
        ticks_to_ms(self.0)
    }

    /// Elapsed time since `earlier`, zero if `earlier` is in the future.
    pub fn since(self, earlier: VirtualTime) -> SimDuration {
        SimDuration(self.0.saturating_sub(earlier.0))
    }
}

impl fmt::Display for VirtualTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_ticks(self.0, f)?;
        f.write_str("ms")
    }
}

/// A non-negative span of simulated time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimDuration(u64);

impl SimDuration {
    pub const ZERO: SimDuration = SimDuration(0);

    pub const fn from_ticks(ticks: u64) -> Self {
        SimDuration(ticks)
    }

    pub const fn from_ms(ms: u64) -> Self {
        SimDuration(ms * TICKS_PER_MS)
    }

    pub fn from_ms_f64(ms: f64) -> Option<Self> {
        ms_to_ticks(ms).map(SimDuration)
    }

    pub const fn ticks(self) -> u64 {
        self.0
    }

    pub fn as_ms(self) -> f64 {
        ticks_to_ms(self.0)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for SimDuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_ticks(self.0, f)?;
        f.write_str("ms")
    }
}

impl Add<SimDuration> for VirtualTime {
    type Output = VirtualTime;
    fn add(self, rhs: SimDuration) -> VirtualTime {
        VirtualTime(self.0 + rhs.0)
    }
}

impl AddAssign<SimDuration> for VirtualTime {
    fn add_assign(&mut self, rhs: SimDuration) {
        self.0 += rhs.0;
    }
}

impl Sub for VirtualTime {
    type Output = SimDuration;
    /// Panics in debug builds when `rhs` is later than `self`.
    fn sub(self, rhs: VirtualTime) -> SimDuration {
        SimDuration(self.0 - rhs.0)
    }
}

impl Add for SimDuration {
    type Output = SimDuration;
    fn add(self, rhs: SimDuration) -> SimDuration {
        SimDuration(self.0 + rhs.0)
    }
}

impl AddAssign for SimDuration {
    fn add_assign(&mut self, rhs: SimDuration) {
        self.0 += rhs.0;
    }
}

impl Sub for SimDuration {
    type Output = SimDuration;
    fn sub(self, rhs: SimDuration) -> SimDuration {
        SimDuration(self.0 - rhs.0)
    }
}

impl Mul<u64> for SimDuration {
    type Output = SimDuration;
    fn mul(self, rhs: u64) -> SimDuration {
        SimDuration(self.0 * rhs)
    }
}

impl std::iter::Sum for SimDuration {
    fn sum<I: Iterator<Item = SimDuration>>(iter: I) -> Self {
        SimDuration(iter.map(|d| d.0).sum())
    }
}

macro_rules! ms_serde {
    ($ty:ident) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_f64(ticks_to_ms(self.0))
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let ms = f64::deserialize(d)?;
                ms_to_ticks(ms).map($ty).ok_or_else(|| {
                    serde::de::Error::custom(format!(
                        "expected a non-negative millisecond value, got {ms}"
                    ))
                })
            }
        }
    };
}

ms_serde!(VirtualTime);
ms_serde!(SimDuration);
