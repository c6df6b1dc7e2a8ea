//! Simulated time shared by every component.
//!
//! No component reads the wall clock directly: everything that needs "now"
//! holds a [`SimClock`] handle. In lock-step runs the harness advances a
//! manual clock tick by tick; in free-running deployments the clock maps
//! elapsed wall time onto simulated time through a compression factor.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

/// Nanoseconds since the scenario epoch.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_secs_f64(secs: f64) -> Self {
        SimTime((secs.max(0.0) * 1e9).round() as u64)
    }

    pub fn from_secs(secs: u64) -> Self {
        SimTime(secs * 1_000_000_000)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e9
    }

    pub fn as_secs(self) -> u64 {
        self.0 / 1_000_000_000
    }

    pub fn add_secs_f64(self, secs: f64) -> Self {
        SimTime((self.0 as i64 + (secs * 1e9).round() as i64).max(0) as u64)
    }

    /// Elapsed seconds since `earlier`; zero if `earlier` is in the future.
    pub fn secs_since(self, earlier: SimTime) -> f64 {
        (self.0.saturating_sub(earlier.0)) as f64 / 1e9
    }
}

/// Fixed calendar epoch that simulated time is rendered against.
pub const EPOCH_UNIX_SECS: i64 = 1_704_067_200; // 2024-01-01T00:00:00Z

/// Render a simulated timestamp as an ISO-8601 UTC string.
pub fn to_iso8601(t: SimTime) -> String {
    to_datetime(t).format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string()
}

pub fn to_datetime(t: SimTime) -> DateTime<Utc> {
    let secs = EPOCH_UNIX_SECS + (t.0 / 1_000_000_000) as i64;
    let nanos = (t.0 % 1_000_000_000) as u32;
    Utc.timestamp_opt(secs, nanos).unwrap()
}

/// Unix seconds of a simulated timestamp (fits the register image's u32).
pub fn to_unix_secs(t: SimTime) -> u64 {
    EPOCH_UNIX_SECS as u64 + t.as_secs()
}

/// Parse an ISO-8601 instant back to simulated time. Returns `None` for
/// instants before the epoch.
pub fn from_iso8601(s: &str) -> Option<SimTime> {
    let dt = DateTime::parse_from_rfc3339(s).ok()?;
    let nanos = dt.timestamp_nanos_opt()? - EPOCH_UNIX_SECS * 1_000_000_000;
    if nanos < 0 {
        return None;
    }
    Some(SimTime(nanos as u64))
}

enum ClockInner {
    /// Harness-driven: `now` only moves when the harness advances it.
    Manual(AtomicU64),
    /// Free-running: simulated time = start + wall_elapsed * factor.
    Scaled {
        wall_start: Instant,
        sim_start: u64,
        factor: f64,
    },
}

/// Shared clock handle. Cheap to clone; all clones observe the same time.
#[derive(Clone)]
pub struct SimClock {
    inner: Arc<ClockInner>,
}

impl SimClock {
    /// A clock that moves only via [`SimClock::advance_to`].
    pub fn manual() -> Self {
        SimClock {
            inner: Arc::new(ClockInner::Manual(AtomicU64::new(0))),
        }
    }

    /// A clock that runs `factor` simulated seconds per wall second,
    /// starting now at `sim_start`.
    pub fn scaled(sim_start: SimTime, factor: f64) -> Self {
        SimClock {
            inner: Arc::new(ClockInner::Scaled {
                wall_start: Instant::now(),
                sim_start: sim_start.0,
                factor,
            }),
        }
    }

    pub fn now(&self) -> SimTime {
        match &*self.inner {
            ClockInner::Manual(ns) => SimTime(ns.load(Ordering::Acquire)),
            ClockInner::Scaled {
                wall_start,
                sim_start,
                factor,
            } => {
                let elapsed = wall_start.elapsed().as_secs_f64() * factor;
                SimTime(sim_start + (elapsed * 1e9) as u64)
            }
        }
    }

    /// Move a manual clock forward. Never moves time backwards.
    pub fn advance_to(&self, t: SimTime) {
        if let ClockInner::Manual(ns) = &*self.inner {
            ns.fetch_max(t.0, Ordering::AcqRel);
        }
    }

    /// Sleep (wall time) until the clock reads at least `t`. On a manual
    /// clock this spins briefly; lock-step harnesses advance the clock
    /// themselves so free-running loops are only used with scaled clocks.
    pub fn sleep_until(&self, t: SimTime) {
        match &*self.inner {
            ClockInner::Manual(_) => {
                while self.now() < t {
                    std::thread::sleep(std::time::Duration::from_millis(1));
                }
            }
            ClockInner::Scaled { factor, .. } => {
                let now = self.now();
                if t > now {
                    let wall = (t.0 - now.0) as f64 / 1e9 / factor.max(1e-9);
                    std::thread::sleep(std::time::Duration::from_secs_f64(wall.min(3600.0)));
                }
            }
        }
    }
}

impl std::fmt::Debug for SimClock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SimClock({})", to_iso8601(self.now()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manual_clock_advances_monotonically() {
        let clock = SimClock::manual();
        assert_eq!(clock.now(), SimTime::ZERO);
        clock.advance_to(SimTime::from_secs(5));
        assert_eq!(clock.now().as_secs(), 5);
        // Going backwards is a no-op.
        clock.advance_to(SimTime::from_secs(3));
        assert_eq!(clock.now().as_secs(), 5);
    }

    #[test]
    fn iso8601_round_trip() {
        let t = SimTime::from_secs_f64(86400.0 + 0.25);
        let s = to_iso8601(t);
        assert_eq!(s, "2024-01-02T00:00:00.250Z");
        assert_eq!(from_iso8601(&s), Some(t));
    }

    #[test]
    fn scaled_clock_moves_on_its_own() {
        let clock = SimClock::scaled(SimTime::from_secs(100), 1000.0);
        let a = clock.now();
        std::thread::sleep(std::time::Duration::from_millis(5));
        let b = clock.now();
        assert!(b > a);
        assert!(a >= SimTime::from_secs(100));
    }
}
