//! Simulation clock: virtual ticks or wall-clock time with acceleration.

use std::sync::Mutex;
use std::time::Instant;

/// Time source for the exchange. Virtual mode advances only when told to
/// (one tick per simulated second), which makes runs deterministic; real
/// mode maps elapsed wall time through an acceleration factor.
#[derive(Debug)]
pub enum SimClock {
    Virtual(Mutex<f64>),
    Real { start: Instant, accel: f64 },
}

impl SimClock {
    pub fn virtual_at(t: f64) -> SimClock {
        SimClock::Virtual(Mutex::new(t))
    }

    pub fn real_time(accel: f64) -> SimClock {
        SimClock::Real { start: Instant::now(), accel }
    }

    /// Current simulated time in seconds.
    pub fn now(&self) -> f64 {
        match self {
            SimClock::Virtual(t) => *t.lock().unwrap(),
            SimClock::Real { start, accel } => start.elapsed().as_secs_f64() * accel,
        }
    }

    /// Advances a virtual clock; panics on a real clock, which advances itself.
    pub fn advance(&self, dt: f64) {
        match self {
            SimClock::Virtual(t) => *t.lock().unwrap() += dt,
            SimClock::Real { .. } => panic!("cannot advance a real-time clock"),
        }
    }

    /// Jumps a virtual clock to an absolute time (used during log replay).
    pub fn set(&self, t: f64) {
        match self {
            SimClock::Virtual(v) => *v.lock().unwrap() = t,
            SimClock::Real { .. } => panic!("cannot set a real-time clock"),
        }
    }
}
