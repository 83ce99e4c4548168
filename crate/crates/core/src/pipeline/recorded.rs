//! Provider that answers from stored prompt/response pairs.
//!
//! Fixture file (JSON):
//!
//! ```json
//! { "entries": [
//!     { "prompt": "<exact prompt text>", "response": "..." },
//!     { "kind": "summarize", "category": "Scam", "response": "..." }
//! ] }
//! ```
//!
//! An exact prompt match wins; otherwise an entry keyed by request kind and
//! (case-insensitive) category answers. A bare top-level array is accepted too.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::prompts::{classify_prompt, PromptKind};
use super::provider::{LlmProvider, ProviderError};
use super::PipelineRun;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<PromptKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    pub response: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureFile {
    pub entries: Vec<FixtureEntry>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FixtureDoc {
    File(FixtureFile),
    Bare(Vec<FixtureEntry>),
}

#[derive(Debug, Default, Clone)]
pub struct RecordedProvider {
    name: String,
    by_prompt: HashMap<String, String>,
    by_key: HashMap<(PromptKind, Option<String>), String>,
}

fn key_category(category: Option<&str>) -> Option<String> {
    category.map(|c| c.trim().to_lowercase())
}

impl RecordedProvider {
    pub fn new(name: impl Into<String>, fixtures: FixtureFile) -> Self {
        let mut provider = RecordedProvider {
            name: name.into(),
            ..Default::default()
        };
        for entry in fixtures.entries {
            if let Some(prompt) = entry.prompt {
                provider.by_prompt.insert(prompt, entry.response);
            } else if let Some(kind) = entry.kind {
                provider
                    .by_key
                    .insert((kind, key_category(entry.category.as_deref())), entry.response);
            }
        }
        provider
    }

    pub fn from_json(name: impl Into<String>, json: &str) -> Result<Self> {
        let doc: FixtureDoc = serde_json::from_str(json)?;
        let fixtures = match doc {
            FixtureDoc::File(f) => f,
            FixtureDoc::Bare(entries) => FixtureFile { entries },
        };
        Ok(Self::new(name, fixtures))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read fixtures {}: {e}", path.display())))?;
        Self::from_json(format!("recorded:{}", path.display()), &text)
    }

    /// Exact-prompt fixtures from every answered request of a run.
    pub fn from_run(run: &PipelineRun) -> Self {
        let entries = run
            .requests
            .iter()
            .filter_map(|r| {
                r.response.as_ref().map(|response| FixtureEntry {
                    prompt: Some(r.prompt.clone()),
                    kind: None,
                    category: None,
                    response: response.clone(),
                })
            })
            .collect();
        Self::new(format!("replay:{}", run.id), FixtureFile { entries })
    }

    pub fn len(&self) -> usize {
        self.by_prompt.len() + self.by_key.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl LlmProvider for RecordedProvider {
    fn id(&self) -> String {
        self.name.clone()
    }

    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        if let Some(response) = self.by_prompt.get(prompt) {
            return Ok(response.clone());
        }
        let (kind, category) =
            classify_prompt(prompt).ok_or_else(|| ProviderError("no recorded response for prompt".into()))?;
        let key = (kind, key_category(category.as_deref()));
        self.by_key.get(&key).cloned().ok_or_else(|| {
            ProviderError(format!(
                "no recorded {} response for category {:?}",
                kind.as_str(),
                category.unwrap_or_default()
            ))
        })
    }
}
