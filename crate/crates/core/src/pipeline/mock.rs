//! Offline provider: a pure function of the prompt text.

use serde_json::{Map, Value};

use super::prompts::{classify_prompt, parse_data_block, PromptKind, UNASSIGNED_LABEL};
use super::provider::{LlmProvider, ProviderError};

/// Keyword lexicon, checked in order; the first category with a keyword
/// contained in the (lower-cased) complaint wins.
pub const LEXICON: &[(&str, &[&str])] = &[
    ("Payment", &["payment", "fee", "withdraw"]),
    ("Scam", &["scam", "fraud"]),
    ("Usability", &["crash", "login", "bug"]),
    ("Poor Customer Support", &["support", "ticket"]),
    ("Platform Policy", &["policy", "connects"]),
];

pub fn lexicon_category(text: &str) -> &'static str {
    let lower = text.to_lowercase();
    LEXICON
        .iter()
        .find(|(_, keywords)| keywords.iter().any(|k| lower.contains(k)))
        .map(|(name, _)| *name)
        .unwrap_or(UNASSIGNED_LABEL)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct MockProvider;

impl MockProvider {
    pub fn respond(prompt: &str) -> String {
        match classify_prompt(prompt) {
            Some((PromptKind::Categorize, _)) => categorize(&parse_data_block(prompt)),
            Some((PromptKind::Summarize, category)) => {
                let category = category.unwrap_or_default();
                let count = parse_data_block(prompt).len();
                format!(
                    "Workers report {count} complaint(s) about {category}. The common thread is that {} problems keep recurring and remain unresolved.",
                    category.to_lowercase()
                )
            }
            Some((PromptKind::Solutions, category)) => {
                let category = category.unwrap_or_default();
                format!(
                    "1. Document every {category} incident in a shared log so the pattern is visible.\n\
                     2. Raise the {category} issues with the platform collectively rather than one by one.\n\
                     3. Share workarounds for {category} problems in the community chat."
                )
            }
            None => "I can only help with categorizing, summarizing and solving worker complaints.".to_owned(),
        }
    }
}

fn categorize(items: &[String]) -> String {
    let mut groups: Vec<(&str, Vec<usize>)> = LEXICON.iter().map(|(name, _)| (*name, Vec::new())).collect();
    groups.push((UNASSIGNED_LABEL, Vec::new()));
    for (i, item) in items.iter().enumerate() {
        let label = lexicon_category(item);
        if let Some(group) = groups.iter_mut().find(|(name, _)| *name == label) {
            group.1.push(i + 1);
        }
    }
    let map: Map<String, Value> = groups
        .into_iter()
        .filter(|(_, members)| !members.is_empty())
        .map(|(name, members)| (name.to_owned(), Value::from(members)))
        .collect();
    Value::Object(map).to_string()
}

impl LlmProvider for MockProvider {
    fn id(&self) -> String {
        "mock".into()
    }

    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        Ok(Self::respond(prompt))
    }
}
