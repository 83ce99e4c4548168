use std::sync::Arc;

use crowdsense::pipeline::{LlmProvider, MockProvider, RecordedProvider};
use crowdsense::{Error, ProviderConfig, ProviderKind, Result};

use crate::live::LiveProvider;

pub type SharedProvider = Arc<dyn LlmProvider>;

/// Build the provider named by `kind` (or the configured one).
pub fn build(config: &ProviderConfig, kind: Option<ProviderKind>) -> Result<SharedProvider> {
    match kind.unwrap_or(config.kind) {
        ProviderKind::Mock => Ok(Arc::new(MockProvider)),
        ProviderKind::Recorded => {
            let path = config
                .fixtures_path
                .as_deref()
                .ok_or_else(|| Error::invalid("recorded provider needs provider.fixtures_path"))?;
            Ok(Arc::new(RecordedProvider::from_path(path)?))
        }
        ProviderKind::Live => {
            let (Some(base_url), Some(model)) = (&config.base_url, &config.model) else {
                return Err(Error::invalid("live provider needs provider.base_url and provider.model"));
            };
            let key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
            if key.is_none() {
                tracing::warn!(env = %config.api_key_env, "no API key in environment; sending unauthenticated requests");
            }
            Ok(Arc::new(LiveProvider::new(base_url, model, key)))
        }
    }
}
