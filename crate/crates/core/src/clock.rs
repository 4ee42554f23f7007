use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

/// Millisecond timestamp source for messages and records.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// Deterministic clock: each reading advances by a fixed step.
#[derive(Debug)]
pub struct LogicalClock {
    next: AtomicU64,
    step: u64,
}

impl LogicalClock {
    pub fn new(start_ms: u64, step_ms: u64) -> Self {
        LogicalClock {
            next: AtomicU64::new(start_ms),
            step: step_ms,
        }
    }
}

impl Default for LogicalClock {
    /// 2025-01-01T00:00:00Z, one millisecond per reading.
    fn default() -> Self {
        LogicalClock::new(1_735_689_600_000, 1)
    }
}

impl Clock for LogicalClock {
    fn now_ms(&self) -> u64 {
        self.next.fetch_add(self.step, Ordering::SeqCst)
    }
}
