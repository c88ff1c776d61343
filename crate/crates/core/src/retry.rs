//! Bounded retry with exponential backoff for transport failures.

use std::thread;
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RetryPolicy {
    pub attempts: u32,
    #[serde(with = "millis")]
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            initial_backoff: Duration::from_millis(500),
        }
    }
}

/// Outcome of one call: transport failures are retried, rejections are not.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CallError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("{0}")]
    Rejected(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{last} (after {attempts} attempt(s))")]
pub struct RetryFailure {
    pub attempts: u32,
    pub last: CallError,
}

impl RetryPolicy {
    pub fn no_wait(attempts: u32) -> Self {
        RetryPolicy {
            attempts,
            initial_backoff: Duration::ZERO,
        }
    }

    pub fn run<T>(&self, mut op: impl FnMut(u32) -> Result<T, CallError>) -> Result<T, RetryFailure> {
        let attempts = self.attempts.max(1);
        let mut backoff = self.initial_backoff;
        let mut attempt = 1;
        loop {
            match op(attempt) {
                Ok(v) => return Ok(v),
                Err(CallError::Transport(detail)) if attempt < attempts => {
                    tracing::warn!(attempt, %detail, "transport failure, retrying");
                    thread::sleep(backoff);
                    backoff *= 2;
                    attempt += 1;
                }
                Err(last) => return Err(RetryFailure { attempts: attempt, last }),
            }
        }
    }
}

pub(crate) fn classify_http(err: ureq::Error) -> CallError {
    match err {
        ureq::Error::StatusCode(code) if code == 429 || code >= 500 => {
            CallError::Transport(format!("server responded {code}"))
        }
        ureq::Error::StatusCode(code) => CallError::Rejected(format!("server responded {code}")),
        ureq::Error::Io(e) => CallError::Transport(e.to_string()),
        ureq::Error::Timeout(t) => CallError::Transport(format!("timeout: {t}")),
        ureq::Error::HostNotFound => CallError::Transport("host not found".into()),
        ureq::Error::ConnectionFailed => CallError::Transport("connection failed".into()),
        other => CallError::Rejected(other.to_string()),
    }
}

pub(crate) fn http_agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .build()
        .new_agent()
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn retries_transport_then_gives_up() {
        let mut calls = 0;
        let r: Result<(), _> = RetryPolicy::no_wait(3).run(|_| {
            calls += 1;
            Err(CallError::Transport("down".into()))
        });
        assert_eq!(calls, 3);
        assert_eq!(r.unwrap_err().attempts, 3);
    }

    #[test]
    fn never_retries_rejections() {
        let mut calls = 0;
        let r: Result<(), _> = RetryPolicy::no_wait(3).run(|_| {
            calls += 1;
            Err(CallError::Rejected("bad".into()))
        });
        assert_eq!(calls, 1);
        assert!(matches!(r.unwrap_err().last, CallError::Rejected(_)));
    }

    #[test]
    fn recovers_after_transient_failure() {
        let r = RetryPolicy::no_wait(3).run(|attempt| {
            if attempt < 2 {
                Err(CallError::Transport("blip".into()))
            } else {
                Ok(attempt)
            }
        });
        assert_eq!(r.unwrap(), 2);
    }
}
