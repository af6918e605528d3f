//! Retry backoff and outbound rate limiting.
//!
//! Both guards protect real API quota: transient failures (HTTP 429/5xx,
//! network errors) are retried under a bounded exponential backoff with
//! jitter, and all outgoing requests of one backend share a fixed
//! requests-per-second budget regardless of how many workers are in flight.
//! Cache and replay hits bypass both — they cost nothing.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;

/// Bounded exponential backoff: up to `max_attempts` tries, sleeping between
/// them with exponentially growing, jittered delays capped at `max_delay`.
#[derive(Debug, Clone)]
pub struct RetryConfig {
    /// Total attempts including the first (so 5 = 1 try + 4 retries).
    pub max_attempts: u32,
    /// Delay budget before the first retry; doubles per retry.
    pub base_delay: Duration,
    /// Upper cap on any single delay (pre-jitter).
    pub max_delay: Duration,
}

impl Default for RetryConfig {
    fn default() -> Self {
        RetryConfig {
            max_attempts: 5,
            base_delay: Duration::from_millis(250),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryConfig {
    /// Jittered sleep before retry number `retry` (1-based: `retry = 1` is
    /// the delay after the first failure). Equal jitter — half the
    /// exponential delay is kept as a floor, the other half is uniformly
    /// random — so retries desynchronize without collapsing to zero wait.
    pub fn backoff_delay(&self, retry: u32, rng: &mut impl Rng) -> Duration {
        let doublings = retry.saturating_sub(1).min(16);
        let exp = self
            .base_delay
            .saturating_mul(1u32 << doublings)
            .min(self.max_delay);
        let half = exp.as_nanos() as u64 / 2;
        Duration::from_nanos(half + rng.gen_range(0..=half))
    }
}

/// Shared fixed-interval rate limiter: `acquire` returns when the caller may
/// send, spacing grants at least `1/requests_per_second` apart across all
/// threads sharing the limiter.
pub struct RateLimiter {
    min_interval: Duration,
    /// Earliest instant the next grant may happen.
    next_slot: Mutex<Option<Instant>>,
}

impl RateLimiter {
    /// A limiter allowing `requests_per_second` outgoing requests. Rates are
    /// validated by the gateway config; a non-finite or non-positive rate
    /// here falls back to unlimited.
    pub fn new(requests_per_second: f64) -> Self {
        let min_interval = if requests_per_second.is_finite() && requests_per_second > 0.0 {
            Duration::from_secs_f64(1.0 / requests_per_second)
        } else {
            Duration::ZERO
        };
        RateLimiter {
            min_interval,
            next_slot: Mutex::new(None),
        }
    }

    /// Block until this caller's turn. Grants are handed out in arrival
    /// order under a mutex; the sleep happens outside the lock.
    pub fn acquire(&self) {
        if self.min_interval.is_zero() {
            return;
        }
        let wait = {
            let mut slot = self.next_slot.lock().expect("rate limiter poisoned");
            let now = Instant::now();
            let granted_at = match *slot {
                Some(at) if at > now => at,
                _ => now,
            };
            *slot = Some(granted_at + self.min_interval);
            granted_at.saturating_duration_since(now)
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}
