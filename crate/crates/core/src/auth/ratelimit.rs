use std::collections::{HashMap, VecDeque};

use chrono::Duration;
use parking_lot::Mutex;

use crate::time::Timestamp;

/// Failed-login counter keyed by the submitted username, whether or not that
/// account exists.
#[derive(Debug)]
pub struct LoginLimiter {
    max_failures: usize,
    window: Duration,
    failures: Mutex<HashMap<String, VecDeque<Timestamp>>>,
}

impl Default for LoginLimiter {
    fn default() -> Self {
        LoginLimiter::new(5, Duration::minutes(15))
    }
}

impl LoginLimiter {
    pub fn new(max_failures: usize, window: Duration) -> Self {
        LoginLimiter {
            max_failures,
            window,
            failures: Mutex::new(HashMap::new()),
        }
    }

    /// True while `username` has fewer than the allowed failures inside the window.
    pub fn allows(&self, username: &str, now: Timestamp) -> bool {
        let mut map = self.failures.lock();
        match map.get_mut(username) {
            Some(q) => {
                let horizon = now - self.window;
                while q.front().is_some_and(|t| *t <= horizon) {
                    q.pop_front();
                }
                let allowed = q.len() < self.max_failures;
                if q.is_empty() {
                    map.remove(username);
                }
                allowed
            }
            None => true,
        }
    }

    pub fn record_failure(&self, username: &str, now: Timestamp) {
        self.failures
            .lock()
            .entry(username.to_owned())
            .or_default()
            .push_back(now);
    }

    pub fn clear(&self, username: &str) {
        self.failures.lock().remove(username);
    }
}
