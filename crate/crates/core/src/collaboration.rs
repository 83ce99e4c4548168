//! Per-category workspace: sensemaking chat, shared document with
//! annotations, and the solution board.
//!
//! Board order is fixed: every human solution ranks above every AI one, then
//! votes (descending), age (oldest first) and id. AI entries always carry the
//! configured disclaimer.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::analytics::normalize_handle;
use crate::clock::Timestamp;
use crate::error::{Error, Result};
use crate::ids::{AnnotationId, CategoryId, MessageId, RunId, SolutionId};
use crate::state::{Event, State};

pub const DEFAULT_DISCLAIMER: &str = "AI-generated suggestion — may contain errors; review before acting.";

pub const AI_LABEL: &str = "Generated using Generative AI";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub id: MessageId,
    pub category_id: CategoryId,
    pub author_handle: String,
    pub body: String,
    pub created_at: Timestamp,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: AnnotationId,
    pub author_handle: String,
    /// Character offsets `[start, end)` into the document body.
    pub start: usize,
    pub end: usize,
    pub note: String,
    pub created_at: Timestamp,
    /// Set while the anchor lies past the end of the current body.
    #[serde(default)]
    pub orphaned: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedDocument {
    pub category_id: CategoryId,
    pub version: u64,
    pub body: String,
    pub annotations: Vec<Annotation>,
}

impl SharedDocument {
    pub fn empty(category_id: CategoryId) -> Self {
        SharedDocument {
            category_id,
            version: 0,
            body: String::new(),
            annotations: Vec::new(),
        }
    }

    pub fn char_len(&self) -> usize {
        self.body.chars().count()
    }

    pub(crate) fn refresh_orphans(&mut self) {
        let len = self.char_len();
        for a in &mut self.annotations {
            a.orphaned = a.end > len;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Human,
    Ai,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    pub id: SolutionId,
    pub category_id: CategoryId,
    pub body: String,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author_handle: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_id: Option<RunId>,
    pub voter_handles: BTreeSet<String>,
    pub disclaimer_required: bool,
    pub created_at: Timestamp,
}

impl Solution {
    pub fn human(id: SolutionId, category_id: CategoryId, author: String, body: String, at: Timestamp) -> Self {
        Solution {
            id,
            category_id,
            body,
            origin: Origin::Human,
            author_handle: Some(author),
            run_id: None,
            voter_handles: BTreeSet::new(),
            disclaimer_required: false,
            created_at: at,
        }
    }

    pub fn ai(id: SolutionId, category_id: CategoryId, run_id: RunId, body: String, at: Timestamp) -> Self {
        Solution {
            id,
            category_id,
            body,
            origin: Origin::Ai,
            author_handle: None,
            run_id: Some(run_id),
            voter_handles: BTreeSet::new(),
            disclaimer_required: true,
            created_at: at,
        }
    }

    pub fn vote_count(&self) -> u64 {
        self.voter_handles.len() as u64
    }
}

/// Board comparator: human before AI, more votes first, older first, then id.
pub fn board_order(a: &Solution, b: &Solution) -> Ordering {
    a.origin
        .cmp(&b.origin)
        .then_with(|| b.vote_count().cmp(&a.vote_count()))
        .then_with(|| a.created_at.cmp(&b.created_at))
        .then_with(|| a.id.cmp(&b.id))
}

/// Serialized board entry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionView {
    pub id: SolutionId,
    pub category_id: CategoryId,
    pub body: String,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author_handle: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_id: Option<RunId>,
    pub vote_count: u64,
    pub disclaimer_required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disclaimer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub created_at: Timestamp,
}

impl SolutionView {
    pub fn new(solution: &Solution, disclaimer: &str) -> Self {
        let is_ai = solution.origin == Origin::Ai;
        SolutionView {
            id: solution.id.clone(),
            category_id: solution.category_id.clone(),
            body: solution.body.clone(),
            origin: solution.origin,
            author_handle: solution.author_handle.clone(),
            run_id: solution.run_id.clone(),
            vote_count: solution.vote_count(),
            disclaimer_required: solution.disclaimer_required,
            disclaimer: is_ai.then(|| disclaimer.to_owned()),
            label: is_ai.then(|| AI_LABEL.to_owned()),
            created_at: solution.created_at,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalSolution {
    pub category_id: CategoryId,
    pub solution_id: SolutionId,
    pub decided_at: Timestamp,
    pub decided_by: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalView {
    #[serde(flatten)]
    pub decision: FinalSolution,
    pub solution: SolutionView,
}

fn non_empty(text: &str, what: &str) -> Result<String> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        Err(Error::invalid(format!("{what} must not be empty")))
    } else {
        Ok(trimmed.to_owned())
    }
}

pub fn chat_thread(state: &State, category_id: &CategoryId) -> Result<Vec<ChatMessage>> {
    state.category(category_id)?;
    let mut thread = state.chats.get(category_id).cloned().unwrap_or_default();
    thread.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));
    Ok(thread)
}

/// The message timestamp never precedes the thread's last one, so appends
/// keep the existing prefix in place.
pub fn post_chat_message(
    state: &State,
    id: MessageId,
    category_id: &CategoryId,
    author_handle: &str,
    body: &str,
    now: Timestamp,
) -> Result<Event> {
    state.category(category_id)?;
    let author_handle = normalize_handle(author_handle)?;
    let body = non_empty(body, "message body")?;
    let created_at = match state.chats.get(category_id).and_then(|t| t.last()) {
        Some(last) if last.created_at > now => last.created_at,
        // same millisecond but an id from a fresh generator could sort lower
        Some(last) if last.created_at == now && id <= last.id => Timestamp::from_millis(now.millis() + 1),
        _ => now,
    };
    Ok(Event::ChatMessagePosted {
        message: ChatMessage {
            id,
            category_id: category_id.clone(),
            author_handle,
            body,
            created_at,
        },
    })
}

pub fn document(state: &State, category_id: &CategoryId) -> Result<SharedDocument> {
    state.category(category_id)?;
    Ok(state
        .documents
        .get(category_id)
        .cloned()
        .unwrap_or_else(|| SharedDocument::empty(category_id.clone())))
}

/// Optimistic whole-body replace.
pub fn edit_document(
    state: &State,
    category_id: &CategoryId,
    base_version: u64,
    new_body: &str,
    now: Timestamp,
) -> Result<Event> {
    let current = document(state, category_id)?;
    if current.version != base_version {
        return Err(Error::Conflict {
            message: format!(
                "document is at version {}, edit was based on {base_version}",
                current.version
            ),
            current: Some(serde_json::json!({
                "version": current.version,
                "body": current.body,
            })),
        });
    }
    Ok(Event::DocumentEdited {
        category_id: category_id.clone(),
        version: base_version + 1,
        body: new_body.to_owned(),
        at: now,
    })
}

pub fn annotate_document(
    state: &State,
    id: AnnotationId,
    category_id: &CategoryId,
    author_handle: &str,
    range: (usize, usize),
    note: &str,
    now: Timestamp,
) -> Result<Event> {
    let doc = document(state, category_id)?;
    let author_handle = normalize_handle(author_handle)?;
    let note = non_empty(note, "annotation note")?;
    let (start, end) = range;
    let len = doc.char_len();
    if start > end || end > len {
        return Err(Error::invalid(format!(
            "anchor [{start},{end}) is outside the document body of length {len}"
        )));
    }
    Ok(Event::DocumentAnnotated {
        category_id: category_id.clone(),
        annotation: Annotation {
            id,
            author_handle,
            start,
            end,
            note,
            created_at: now,
            orphaned: false,
        },
    })
}

pub fn propose_solution(
    state: &State,
    id: SolutionId,
    category_id: &CategoryId,
    author_handle: &str,
    body: &str,
    now: Timestamp,
) -> Result<Event> {
    state.category(category_id)?;
    let author = normalize_handle(author_handle)?;
    let body = non_empty(body, "solution body")?;
    Ok(Event::SolutionProposed {
        solution: Solution::human(id, category_id.clone(), author, body, now),
    })
}

pub fn list_solutions(state: &State, category_id: &CategoryId, disclaimer: &str) -> Result<Vec<SolutionView>> {
    state.category(category_id)?;
    let mut board: Vec<&Solution> = state
        .solutions
        .values()
        .filter(|s| &s.category_id == category_id)
        .collect();
    board.sort_by(|a, b| board_order(a, b));
    Ok(board.into_iter().map(|s| SolutionView::new(s, disclaimer)).collect())
}

pub fn vote_solution(state: &State, solution_id: &SolutionId, voter_handle: &str) -> Result<Option<Event>> {
    let solution = state
        .solutions
        .get(solution_id)
        .ok_or_else(|| Error::not_found("solution", solution_id))?;
    let voter_handle = normalize_handle(voter_handle)?;
    if solution.voter_handles.contains(&voter_handle) {
        return Ok(None);
    }
    Ok(Some(Event::SolutionVoted {
        solution_id: solution_id.clone(),
        voter_handle,
    }))
}

pub fn finalize_solution(
    state: &State,
    category_id: &CategoryId,
    solution_id: &SolutionId,
    decided_by: &[String],
    replace: bool,
    now: Timestamp,
) -> Result<Event> {
    state.category(category_id)?;
    let solution = state
        .solutions
        .get(solution_id)
        .ok_or_else(|| Error::not_found("solution", solution_id))?;
    if &solution.category_id != category_id {
        return Err(Error::invalid(format!(
            "solution {solution_id} belongs to another category"
        )));
    }
    if state.finals.contains_key(category_id) && !replace {
        return Err(Error::conflict("a final solution is already recorded; pass replace to change it"));
    }
    let decided_by = decided_by
        .iter()
        .map(|h| normalize_handle(h))
        .collect::<Result<BTreeSet<_>>>()?;
    if decided_by.is_empty() {
        return Err(Error::invalid("decided_by must name at least one participant"));
    }
    Ok(Event::SolutionFinalized {
        final_solution: FinalSolution {
            category_id: category_id.clone(),
            solution_id: solution_id.clone(),
            decided_at: now,
            decided_by,
        },
    })
}

pub fn final_view(state: &State, category_id: &CategoryId, disclaimer: &str) -> Result<Option<FinalView>> {
    state.category(category_id)?;
    Ok(state.finals.get(category_id).and_then(|decision| {
        state.solutions.get(&decision.solution_id).map(|s| FinalView {
            decision: decision.clone(),
            solution: SolutionView::new(s, disclaimer),
        })
    }))
}
