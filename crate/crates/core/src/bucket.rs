//! Tick-driven token bucket shared by the prefilter rate-limit map and the
//! per-identity L7 limiter.

use serde::{Deserialize, Serialize};

use crate::flow::Tick;

/// A token bucket refilled in whole ticks.
///
/// A new bucket starts full. Refill happens when the bucket is first touched
/// in a tick, so all arrivals of one tick see the same token supply and the
/// number of takes over ticks `a..=b` never exceeds
/// `burst + rate * (b - a) * tick_len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenBucket {
    tokens: f64,
    last_update: Tick,
}

impl TokenBucket {
    pub fn full(burst: f64, now: Tick) -> Self {
        TokenBucket {
            tokens: burst,
            last_update: now,
        }
    }

    pub fn tokens(&self) -> f64 {
        self.tokens
    }

    pub fn last_update(&self) -> Tick {
        self.last_update
    }

    pub fn refill(&mut self, now: Tick, rate: f64, burst: f64, tick_len: f64) {
        if now > self.last_update {
            let elapsed = (now - self.last_update) as f64 * tick_len;
            self.tokens = (self.tokens + rate * elapsed).min(burst);
            self.last_update = now;
        }
    }

    /// Takes one token if a whole token is available.
    pub fn try_take(&mut self) -> bool {
        // Tolerate accumulated refill error just below a whole token.
        if self.tokens >= 1.0 - 1e-9 {
            self.tokens = (self.tokens - 1.0).max(0.0);
            true
        } else {
            false
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_full_and_drains() {
        let mut b = TokenBucket::full(3.0, 0);
        assert!(b.try_take());
        assert!(b.try_take());
        assert!(b.try_take());
        assert!(!b.try_take());
    }

    #[test]
    fn refill_caps_at_burst() {
        let mut b = TokenBucket::full(4.0, 0);
        for _ in 0..4 {
            b.try_take();
        }
        b.refill(100, 2.0, 4.0, 1.0);
        assert_eq!(b.tokens(), 4.0);
    }

    #[test]
    fn fractional_rate_accumulates() {
        let mut b = TokenBucket::full(1.0, 0);
        assert!(b.try_take());
        b.refill(1, 0.5, 1.0, 1.0);
        assert!(!b.try_take());
        b.refill(2, 0.5, 1.0, 1.0);
        assert!(b.try_take());
    }

    #[test]
    fn refill_ignores_stale_tick() {
        let mut b = TokenBucket::full(2.0, 5);
        b.try_take();
        b.refill(3, 10.0, 2.0, 1.0);
        assert_eq!(b.tokens(), 1.0);
        assert_eq!(b.last_update(), 5);
    }
}
