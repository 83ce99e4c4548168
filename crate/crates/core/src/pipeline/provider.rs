use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{0}")]
pub struct ProviderError(pub String);

/// A chat-completion backend: one prompt in, one response text out.
pub trait LlmProvider: Send + Sync {
    fn id(&self) -> String;
    fn complete(&self, prompt: &str) -> Result<String, ProviderError>;
}

impl<P: LlmProvider + ?Sized> LlmProvider for &P {
    fn id(&self) -> String {
        (**self).id()
    }

    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        (**self).complete(prompt)
    }
}

impl<P: LlmProvider + ?Sized> LlmProvider for std::sync::Arc<P> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        (**self).complete(prompt)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles after each failure.
    #[serde(with = "millis")]
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(max_attempts: u32) -> Self {
        RetryPolicy {
            max_attempts,
            base_delay: Duration::ZERO,
        }
    }

    pub fn delay_before(&self, attempt: u32) -> Duration {
        // attempt is 1-based; no wait before the first one
        if attempt <= 1 {
            Duration::ZERO
        } else {
            self.base_delay.saturating_mul(1 << (attempt - 2).min(16))
        }
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

/// Outcome of one logical request after retries.
#[derive(Debug, Clone)]
pub struct Attempted {
    pub result: Result<String, ProviderError>,
    pub attempts: u32,
}

pub fn complete_with_retry(provider: &dyn LlmProvider, prompt: &str, policy: &RetryPolicy) -> Attempted {
    let max = policy.max_attempts.max(1);
    let mut last = ProviderError("no attempt made".into());
    for attempt in 1..=max {
        let delay = policy.delay_before(attempt);
        if !delay.is_zero() {
            thread::sleep(delay);
        }
        match provider.complete(prompt) {
            Ok(text) => {
                return Attempted {
                    result: Ok(text),
                    attempts: attempt,
                }
            }
            Err(e) => {
                tracing::warn!(attempt, provider = %provider.id(), error = %e, "provider request failed");
                last = e;
            }
        }
    }
    Attempted {
        result: Err(last),
        attempts: max,
    }
}
