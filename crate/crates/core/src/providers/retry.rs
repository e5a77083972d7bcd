//! Bounded exponential backoff and a token-bucket rate limiter.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use super::ProviderError;

/// At most `max_retries` retries (total attempts = max_retries + 1), with
/// exponential backoff capped at `max_delay_ms`.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay_ms: 250,
            max_delay_ms: 10_000,
        }
    }
}

impl RetryPolicy {
    pub fn new(max_retries: u32, base_delay_ms: u64) -> Self {
        RetryPolicy {
            max_retries,
            base_delay_ms,
            ..Default::default()
        }
    }

    /// No retries at all; first failure is final.
    pub fn none() -> Self {
        RetryPolicy {
            max_retries: 0,
            base_delay_ms: 0,
            max_delay_ms: 0,
        }
    }

    fn delay_for(&self, attempt: u32) -> Duration {
        let exp = self.base_delay_ms.saturating_mul(1u64 << attempt.min(16));
        Duration::from_millis(exp.min(self.max_delay_ms))
    }

    /// Run `f`, retrying retryable failures up to the configured bound.
    pub fn run<T>(
        &self,
        f: impl Fn() -> Result<T, ProviderError>,
    ) -> Result<T, ProviderError> {
        let mut attempt = 0;
        loop {
            match f() {
                Ok(value) => return Ok(value),
                Err(e) if e.is_retryable() && attempt < self.max_retries => {
                    std::thread::sleep(self.delay_for(attempt));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Token bucket shared by all concurrent callers of one provider. Capacity
/// equals one second of tokens, so short bursts are allowed but the
/// sustained rate stays at `rate_per_sec`.
#[derive(Debug)]
pub struct RateLimiter {
    bucket: Option<Mutex<Bucket>>,
}

#[derive(Debug)]
struct Bucket {
    rate: f64,
    capacity: f64,
    tokens: f64,
    last_refill: Instant,
}

impl RateLimiter {
    pub fn new(rate_per_sec: f64) -> Self {
        if rate_per_sec <= 0.0 {
            return Self::unlimited();
        }
        RateLimiter {
            bucket: Some(Mutex::new(Bucket {
                rate: rate_per_sec,
                capacity: rate_per_sec.max(1.0),
                tokens: rate_per_sec.max(1.0),
                last_refill: Instant::now(),
            })),
        }
    }

    pub fn unlimited() -> Self {
        RateLimiter { bucket: None }
    }

    /// Block until a token is available.
    pub fn acquire(&self) {
        let Some(bucket) = &self.bucket else { return };
        loop {
            let wait = {
                let mut b = bucket.lock().unwrap();
                let now = Instant::now();
                let elapsed = now.duration_since(b.last_refill).as_secs_f64();
                b.tokens = (b.tokens + elapsed * b.rate).min(b.capacity);
                b.last_refill = now;
                if b.tokens >= 1.0 {
                    b.tokens -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - b.tokens) / b.rate)
            };
            std::thread::sleep(wait);
        }
    }
}
