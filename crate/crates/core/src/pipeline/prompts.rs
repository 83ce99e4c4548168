//! The three fixed prompts and the data-block layout shared by every request.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Categorize,
    Summarize,
    Solutions,
}

impl PromptKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PromptKind::Categorize => "categorize",
            PromptKind::Summarize => "summarize",
            PromptKind::Solutions => "solutions",
        }
    }
}

pub const CATEGORIZE_SENTENCE: &str = "Please categorize the following data into specific problem categories. The goal is to sort the large chunk of data into distinct categories for better comprehension. You should have a problem category with a name and a list of statements related to the problem. If you find a category or theme that is not a problem, do not include it";

pub const SUMMARIZE_SENTENCE: &str = "Given the following dataset of complaints related to X (where X represents an identified problem category), please provide a concise summary of the problem to facilitate a comprehensive understanding.";

pub const SOLUTIONS_SENTENCE: &str = "Given the following dataset of complaints related to X (where X represents an identified problem category), please provide solutions to each problem category";

/// The slot in the summarize/solutions sentences that stands for the category.
const CATEGORY_SLOT: &str = "X (where X represents an identified problem category)";

pub const DATA_PLACEHOLDER: &str = "{data}";
pub const CATEGORY_PLACEHOLDER: &str = "{category}";

pub const DATA_BEGIN: &str = "--- BEGIN DATA ---";
pub const DATA_END: &str = "--- END DATA ---";

/// Label under which a categorize response lists items that are not problems.
pub const UNASSIGNED_LABEL: &str = "Unassigned";

const CATEGORIZE_FORMAT: &str = "Respond with a single JSON object and nothing else. Each key is a problem category name and each value is the list of item numbers that belong to it, for example {\"Category name\": [1, 4]}. Every item number appears at most once. List items that do not describe a problem under \"Unassigned\".";

const SOLUTIONS_FORMAT: &str = "Answer with a numbered list, one solution per item.";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub kind: PromptKind,
    pub template_text: String,
}

impl PromptTemplate {
    pub fn for_kind(kind: PromptKind) -> Self {
        let block = format!("{DATA_BEGIN}\n{DATA_PLACEHOLDER}\n{DATA_END}");
        let template_text = match kind {
            PromptKind::Categorize => format!("{CATEGORIZE_SENTENCE}.\n\n{block}\n\n{CATEGORIZE_FORMAT}"),
            PromptKind::Summarize => format!("{}\n\n{block}", with_category_slot(SUMMARIZE_SENTENCE)),
            PromptKind::Solutions => format!(
                "{}.\n\n{block}\n\n{SOLUTIONS_FORMAT}",
                with_category_slot(SOLUTIONS_SENTENCE)
            ),
        };
        PromptTemplate { kind, template_text }
    }

    /// Placeholders this kind declares.
    pub fn placeholders(&self) -> &'static [&'static str] {
        match self.kind {
            PromptKind::Categorize => &[DATA_PLACEHOLDER],
            PromptKind::Summarize | PromptKind::Solutions => &[DATA_PLACEHOLDER, CATEGORY_PLACEHOLDER],
        }
    }

    /// Single pass substitution, so placeholder-looking text inside complaint
    /// bodies or category names is never expanded.
    pub fn render(&self, category: Option<&str>, items: &[String]) -> String {
        let data = render_data_block(items);
        let mut out = String::with_capacity(self.template_text.len() + data.len());
        let mut rest = self.template_text.as_str();
        loop {
            let next_data = rest.find(DATA_PLACEHOLDER);
            let next_cat = rest.find(CATEGORY_PLACEHOLDER);
            let (pos, is_data) = match (next_data, next_cat) {
                (None, None) => break,
                (Some(d), None) => (d, true),
                (None, Some(c)) => (c, false),
                (Some(d), Some(c)) => {
                    if d < c {
                        (d, true)
                    } else {
                        (c, false)
                    }
                }
            };
            out.push_str(&rest[..pos]);
            if is_data {
                out.push_str(&data);
                rest = &rest[pos + DATA_PLACEHOLDER.len()..];
            } else {
                out.push_str(category.unwrap_or(""));
                rest = &rest[pos + CATEGORY_PLACEHOLDER.len()..];
            }
        }
        out.push_str(rest);
        out
    }
}

fn with_category_slot(sentence: &str) -> String {
    sentence.replacen(CATEGORY_SLOT, CATEGORY_PLACEHOLDER, 1)
}

/// The fixed prompt sentence as it must appear in a request of `kind` about
/// `category`.
pub fn anchor_sentence(kind: PromptKind, category: &str) -> String {
    match kind {
        PromptKind::Categorize => CATEGORIZE_SENTENCE.to_owned(),
        PromptKind::Summarize => SUMMARIZE_SENTENCE.replacen(CATEGORY_SLOT, category, 1),
        PromptKind::Solutions => SOLUTIONS_SENTENCE.replacen(CATEGORY_SLOT, category, 1),
    }
}

/// One numbered line per item; embedded newlines are flattened to spaces.
pub fn render_data_block(items: &[String]) -> String {
    items
        .iter()
        .enumerate()
        .map(|(i, text)| format!("[{}] {}", i + 1, flatten(text)))
        .collect::<Vec<_>>()
        .join("\n")
}

fn flatten(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Items embedded in a rendered prompt, in order.
pub fn parse_data_block(prompt: &str) -> Vec<String> {
    let start = match prompt.find(DATA_BEGIN) {
        Some(s) => s + DATA_BEGIN.len(),
        None => return Vec::new(),
    };
    let end = prompt[start..].find(DATA_END).map(|e| start + e).unwrap_or(prompt.len());
    prompt[start..end]
        .lines()
        .filter_map(|line| {
            let line = line.trim();
            let rest = line.strip_prefix('[')?;
            let close = rest.find(']')?;
            rest[..close].parse::<usize>().ok()?;
            Some(rest[close + 1..].trim().to_owned())
        })
        .collect()
}

/// Recover the request kind, and the category for summarize/solutions, from a
/// rendered prompt.
pub fn classify_prompt(prompt: &str) -> Option<(PromptKind, Option<String>)> {
    if prompt.contains(CATEGORIZE_SENTENCE) {
        return Some((PromptKind::Categorize, None));
    }
    const LEAD: &str = "Given the following dataset of complaints related to ";
    let start = prompt.find(LEAD)? + LEAD.len();
    let tail = &prompt[start..];
    for (kind, marker) in [
        (PromptKind::Summarize, ", please provide a concise summary of the problem"),
        (PromptKind::Solutions, ", please provide solutions to each problem category"),
    ] {
        if let Some(end) = tail.find(marker) {
            return Some((kind, Some(tail[..end].to_owned())));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_declare_exact_placeholders() {
        for kind in [PromptKind::Categorize, PromptKind::Summarize, PromptKind::Solutions] {
            let t = PromptTemplate::for_kind(kind);
            assert_eq!(t.template_text.matches(DATA_PLACEHOLDER).count(), 1);
            let expected_cat = usize::from(kind != PromptKind::Categorize);
            assert_eq!(t.template_text.matches(CATEGORY_PLACEHOLDER).count(), expected_cat);
            assert_eq!(t.placeholders().len(), 1 + expected_cat);
        }
    }

    #[test]
    fn categorize_template_carries_sentence_verbatim() {
        let t = PromptTemplate::for_kind(PromptKind::Categorize);
        assert!(t.template_text.contains(CATEGORIZE_SENTENCE));
    }

    #[test]
    fn rendered_prompts_carry_anchor() {
        let items = vec!["fees too high".to_owned()];
        for kind in [PromptKind::Summarize, PromptKind::Solutions] {
            let prompt = PromptTemplate::for_kind(kind).render(Some("Payment"), &items);
            assert!(prompt.contains(&anchor_sentence(kind, "Payment")), "{prompt}");
            assert!(!prompt.contains("{category}"));
        }
        assert_eq!(
            anchor_sentence(PromptKind::Summarize, "Scam"),
            "Given the following dataset of complaints related to Scam, please provide a concise summary of the problem to facilitate a comprehensive understanding."
        );
    }

    #[test]
    fn render_does_not_expand_placeholders_in_data() {
        let items = vec!["literal {category} and {data}".to_owned()];
        let prompt = PromptTemplate::for_kind(PromptKind::Summarize).render(Some("Scam"), &items);
        assert!(prompt.contains("[1] literal {category} and {data}"));
    }

    #[test]
    fn data_block_round_trip() {
        let items = vec!["first\nline".to_owned(), "  second  ".to_owned(), "[3] tricky".to_owned()];
        let prompt = PromptTemplate::for_kind(PromptKind::Categorize).render(None, &items);
        assert_eq!(parse_data_block(&prompt), vec!["first line", "second", "[3] tricky"]);
    }

    #[test]
    fn classify_recovers_kind_and_category() {
        let items = vec!["x".to_owned()];
        let cat = PromptTemplate::for_kind(PromptKind::Categorize).render(None, &items);
        assert_eq!(classify_prompt(&cat), Some((PromptKind::Categorize, None)));
        let sum = PromptTemplate::for_kind(PromptKind::Summarize).render(Some("Poor Customer Support"), &items);
        assert_eq!(
            classify_prompt(&sum),
            Some((PromptKind::Summarize, Some("Poor Customer Support".into())))
        );
        let sol = PromptTemplate::for_kind(PromptKind::Solutions).render(Some("Scam"), &items);
        assert_eq!(classify_prompt(&sol), Some((PromptKind::Solutions, Some("Scam".into()))));
        assert_eq!(classify_prompt("hello"), None);
    }
}
