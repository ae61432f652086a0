//! Exponential backoff with full jitter.

use std::time::Duration;

use rand::Rng;

use super::BackendError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub max_attempts: u32,
    pub base: Duration,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 5, base: Duration::from_secs(1), factor: 2.0 }
    }
}

impl RetryPolicy {
    /// Upper bound of the wait before retry number `retry` (0-based).
    pub fn ceiling(&self, retry: u32) -> Duration {
        self.base.mul_f64(self.factor.powi(retry as i32))
    }

    /// Uniform draw from `[0, ceiling(retry)]`.
    pub fn delay<R: Rng + ?Sized>(&self, retry: u32, rng: &mut R) -> Duration {
        self.ceiling(retry).mul_f64(rng.random::<f64>())
    }
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, d: Duration);
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Calls `f` until it succeeds, fails with a non-transient error, or the
/// attempt budget runs out. Returns the final outcome and the attempt count.
pub fn run_with_retry<T>(
    policy: &RetryPolicy,
    sleeper: &dyn Sleeper,
    mut f: impl FnMut() -> Result<T, BackendError>,
) -> (Result<T, BackendError>, u32) {
    let mut rng = rand::rng();
    let mut attempt = 1;
    loop {
        match f() {
            Err(e) if e.is_transient() && attempt < policy.max_attempts.max(1) => {
                let wait = policy.delay(attempt - 1, &mut rng);
                log::debug!("attempt {attempt} failed ({e}); retrying in {wait:?}");
                sleeper.sleep(wait);
                attempt += 1;
            }
            other => return (other, attempt),
        }
    }
}
