use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Requests per minute when a provider does not configure its own limit.
pub const DEFAULT_REQUESTS_PER_MINUTE: u32 = 30;

/// Token bucket refilled continuously at `requests_per_minute / 60` per second.
#[derive(Debug)]
pub struct RateLimiter {
    capacity: f64,
    refill_per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    /// Burst capacity equals one minute's allowance.
    pub fn new(requests_per_minute: u32) -> Self {
        Self::with_burst(requests_per_minute, requests_per_minute)
    }

    pub fn with_burst(requests_per_minute: u32, burst: u32) -> Self {
        let capacity = f64::from(burst.max(1));
        RateLimiter {
            capacity,
            refill_per_sec: f64::from(requests_per_minute.max(1)) / 60.0,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Blocks until a request may be sent.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut state = self.state.lock().expect("limiter lock");
                let now = Instant::now();
                let elapsed = now.duration_since(state.1).as_secs_f64();
                state.0 = (state.0 + elapsed * self.refill_per_sec).min(self.capacity);
                state.1 = now;
                if state.0 >= 1.0 {
                    state.0 -= 1.0;
                    return;
                }
                (1.0 - state.0) / self.refill_per_sec
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}
