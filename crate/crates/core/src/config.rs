use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::collaboration::DEFAULT_DISCLAIMER;
use crate::error::{Error, Result};
use crate::pipeline::{PipelineConfig, RetryPolicy, DEFAULT_CHUNK_BUDGET};

pub const DEFAULT_API_KEY_ENV: &str = "CROWDSENSE_API_KEY";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Live,
    Mock,
    Recorded,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub fixtures_path: Option<PathBuf>,
    /// Environment variable holding the API key for the live provider.
    pub api_key_env: String,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            kind: ProviderKind::Mock,
            base_url: None,
            model: None,
            fixtures_path: None,
            api_key_env: DEFAULT_API_KEY_ENV.to_owned(),
        }
    }
}

/// Service configuration, read from a JSON file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub data_dir: PathBuf,
    pub http_port: u32,
    pub provider: ProviderConfig,
    pub chunk_budget: usize,
    pub parallelism: usize,
    pub max_attempts: u32,
    pub retry_base_delay_ms: u64,
    pub disclaimer_text: String,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            data_dir: PathBuf::from("data"),
            http_port: 8080,
            provider: ProviderConfig::default(),
            chunk_budget: DEFAULT_CHUNK_BUDGET,
            parallelism: 4,
            max_attempts: 3,
            retry_base_delay_ms: 500,
            disclaimer_text: DEFAULT_DISCLAIMER.to_owned(),
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Config =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("config does not parse: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.chunk_budget < 1 {
            return Err(Error::invalid("chunk_budget must be at least 1"));
        }
        if !(1..=65535).contains(&self.http_port) {
            return Err(Error::invalid(format!("http_port {} is outside 1..65535", self.http_port)));
        }
        if self.parallelism < 1 {
            return Err(Error::invalid("parallelism must be at least 1"));
        }
        if self.max_attempts < 1 {
            return Err(Error::invalid("max_attempts must be at least 1"));
        }
        if self.disclaimer_text.trim().is_empty() {
            return Err(Error::invalid("disclaimer_text must not be empty"));
        }
        match self.provider.kind {
            ProviderKind::Recorded if self.provider.fixtures_path.is_none() => {
                Err(Error::invalid("provider kind `recorded` requires fixtures_path"))
            }
            ProviderKind::Live if self.provider.base_url.is_none() || self.provider.model.is_none() => {
                Err(Error::invalid("provider kind `live` requires base_url and model"))
            }
            _ => Ok(()),
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            chunk_budget: self.chunk_budget,
            parallelism: self.parallelism,
            retry: RetryPolicy {
                max_attempts: self.max_attempts,
                base_delay: Duration::from_millis(self.retry_base_delay_ms),
            },
        }
    }
}
