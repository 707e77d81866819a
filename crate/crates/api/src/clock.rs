use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use crowdtone_core::Millis;

pub trait Clock: Send + Sync {
    fn now(&self) -> Millis;

    /// Moves a manual clock; wall clocks refuse.
    fn set(&self, _now: Millis) -> bool {
        false
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Millis {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as Millis)
            .unwrap_or(0)
    }
}

/// Clock that only moves when told to. Used for deterministic runs against
/// the HTTP service.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start: Millis) -> Self {
        Self(AtomicU64::new(start))
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Millis {
        self.0.load(Ordering::SeqCst)
    }

    fn set(&self, now: Millis) -> bool {
        self.0.store(now, Ordering::SeqCst);
        true
    }
}
