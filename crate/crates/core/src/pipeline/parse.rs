//! Turning free-form provider responses into structured results.

use serde_json::Value;

/// Labels that mean "this is not a problem" in a categorize response.
const NON_PROBLEM_MARKERS: &[&str] = &["unassigned", "not a problem", "non-problem", "no problem", "none", "n/a"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CategoryName {
    pub display: String,
    /// Identity used to merge categories across chunks and runs.
    pub key: String,
}

impl CategoryName {
    /// Trim, collapse inner whitespace and strip decoration such as quotes or
    /// markdown emphasis. `None` when nothing is left.
    pub fn normalize(raw: &str) -> Option<Self> {
        let stripped = raw.trim().trim_matches(|c: char| matches!(c, '"' | '\'' | '*' | '`' | '#' | ':'));
        let display = stripped.split_whitespace().collect::<Vec<_>>().join(" ");
        if display.is_empty() {
            return None;
        }
        let key = display.to_lowercase();
        Some(CategoryName { display, key })
    }

    pub fn is_non_problem(&self) -> bool {
        NON_PROBLEM_MARKERS.contains(&self.key.as_str())
    }
}

pub fn category_key(name: &str) -> String {
    CategoryName::normalize(name).map(|n| n.key).unwrap_or_default()
}

/// `{category -> [1-based item numbers]}` in response order. Tolerates prose
/// or code fences around the object. Non-integer entries are skipped.
pub fn parse_category_map(response: &str) -> Result<Vec<(String, Vec<usize>)>, String> {
    let start = response.find('{').ok_or("no JSON object in response")?;
    let end = response.rfind('}').ok_or("no JSON object in response")?;
    if end < start {
        return Err("no JSON object in response".into());
    }
    let value: Value = serde_json::from_str(&response[start..=end]).map_err(|e| format!("invalid JSON: {e}"))?;
    let object = value.as_object().ok_or("response is not a JSON object")?;
    object
        .iter()
        .map(|(name, members)| {
            let list = members
                .as_array()
                .ok_or_else(|| format!("category {name:?} does not map to a list"))?;
            let indices = list
                .iter()
                .filter_map(|m| match m {
                    Value::Number(n) => n.as_u64(),
                    Value::String(s) => s.trim().parse().ok(),
                    _ => None,
                })
                .filter(|&i| i >= 1)
                .map(|i| i as usize)
                .collect();
            Ok((name.clone(), indices))
        })
        .collect()
}

fn numbered_item_start(line: &str) -> Option<&str> {
    let trimmed = line.trim_start();
    let digits = trimmed.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 || digits > 3 {
        return None;
    }
    let rest = &trimmed[digits..];
    let rest = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')'))?;
    if rest.is_empty() || rest.starts_with(char::is_whitespace) {
        Some(rest.trim())
    } else {
        None
    }
}

/// Items of a numbered list (`1.` or `1)`). Lines that follow an item without
/// a number of their own are folded into it; text before the first item is
/// ignored.
pub fn parse_numbered_list(response: &str) -> Vec<String> {
    let mut items: Vec<String> = Vec::new();
    for line in response.lines() {
        if let Some(text) = numbered_item_start(line) {
            items.push(text.to_owned());
        } else if let Some(last) = items.last_mut() {
            let more = line.trim();
            if !more.is_empty() {
                if !last.is_empty() {
                    last.push(' ');
                }
                last.push_str(more);
            }
        }
    }
    items.retain(|item| !item.is_empty());
    items
}

/// First sentence of a summary, used as the short category description.
pub fn first_sentence(text: &str) -> String {
    let text = text.trim();
    let bytes = text.as_bytes();
    for (i, c) in text.char_indices() {
        if matches!(c, '.' | '!' | '?') {
            let next = bytes.get(i + 1);
            if next.is_none() || next.is_some_and(|b| b.is_ascii_whitespace()) {
                return text[..=i].to_owned();
            }
        }
    }
    text.to_owned()
}
