//! Materialized service state and the events that build it.
//!
//! `State` is a left fold of [`Event`]s. Commands validate against the state
//! and produce an event; [`State::apply`] never consults anything but the
//! event and the state, so replaying a log reproduces the state exactly.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::ProblemCategory;
use crate::clock::Timestamp;
use crate::collaboration::{Annotation, ChatMessage, FinalSolution, Origin, SharedDocument, Solution};
use crate::error::{Error, Result};
use crate::eval::TaskTiming;
use crate::ids::{CategoryId, ComplaintId, RunId, SolutionId};
use crate::ingestion::{Complaint, DataSource, SourceKind, MANUAL_SOURCE_NAME};
use crate::pipeline::{PipelineRun, RunStatus};

/// A category as a pipeline run leaves it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommittedCategory {
    pub id: CategoryId,
    pub name: String,
    pub key: String,
    pub description: String,
    pub summary: Option<String>,
    pub members: Vec<ComplaintId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineCommit {
    pub run: PipelineRun,
    pub categories: Vec<CommittedCategory>,
    pub superseded_solutions: Vec<SolutionId>,
    pub ai_solutions: Vec<Solution>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Event {
    ComplaintsIngested {
        source_kind: SourceKind,
        source_name: String,
        at: Timestamp,
        complaints: Vec<Complaint>,
    },
    ManualIssueAdded {
        complaint: Complaint,
    },
    PipelineCommitted(Box<PipelineCommit>),
    PipelineFailed {
        run: PipelineRun,
    },
    AiSolutionsGenerated {
        run: PipelineRun,
        solutions: Vec<Solution>,
    },
    ProblemUpvoted {
        category_id: CategoryId,
        voter_handle: String,
    },
    ChatMessagePosted {
        message: ChatMessage,
    },
    DocumentEdited {
        category_id: CategoryId,
        version: u64,
        body: String,
        at: Timestamp,
    },
    DocumentAnnotated {
        category_id: CategoryId,
        annotation: Annotation,
    },
    SolutionProposed {
        solution: Solution,
    },
    SolutionVoted {
        solution_id: SolutionId,
        voter_handle: String,
    },
    SolutionFinalized {
        final_solution: FinalSolution,
    },
    TaskStarted {
        session_id: String,
        task_index: u8,
        at: Timestamp,
    },
    TaskStopped {
        session_id: String,
        task_index: u8,
        at: Timestamp,
    },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::ComplaintsIngested { .. } => "complaints_ingested",
            Event::ManualIssueAdded { .. } => "manual_issue_added",
            Event::PipelineCommitted(_) => "pipeline_committed",
            Event::PipelineFailed { .. } => "pipeline_failed",
            Event::AiSolutionsGenerated { .. } => "ai_solutions_generated",
            Event::ProblemUpvoted { .. } => "problem_upvoted",
            Event::ChatMessagePosted { .. } => "chat_message_posted",
            Event::DocumentEdited { .. } => "document_edited",
            Event::DocumentAnnotated { .. } => "document_annotated",
            Event::SolutionProposed { .. } => "solution_proposed",
            Event::SolutionVoted { .. } => "solution_voted",
            Event::SolutionFinalized { .. } => "solution_finalized",
            Event::TaskStarted { .. } => "task_started",
            Event::TaskStopped { .. } => "task_stopped",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub last_sequence_no: u64,
    pub complaints: BTreeMap<ComplaintId, Complaint>,
    pub sources: BTreeMap<String, DataSource>,
    /// `"{kind}:{name}|{dedup_key}"` for every stored non-manual complaint.
    pub dedup_index: BTreeSet<String>,
    pub categories: BTreeMap<CategoryId, ProblemCategory>,
    pub assignments: BTreeMap<ComplaintId, CategoryId>,
    pub runs: BTreeMap<RunId, PipelineRun>,
    pub current_run: Option<RunId>,
    pub chats: BTreeMap<CategoryId, Vec<ChatMessage>>,
    pub documents: BTreeMap<CategoryId, SharedDocument>,
    pub solutions: BTreeMap<SolutionId, Solution>,
    pub finals: BTreeMap<CategoryId, FinalSolution>,
    pub timings: BTreeMap<String, BTreeMap<u8, TaskTiming>>,
}

type Check = std::result::Result<(), String>;

fn dedup_entry(kind: SourceKind, name: &str, key: &str) -> String {
    format!("{}|{key}", DataSource::key(kind, name))
}

impl State {
    pub fn category(&self, id: &CategoryId) -> Result<&ProblemCategory> {
        self.categories.get(id).ok_or_else(|| Error::not_found("category", id))
    }

    pub fn category_by_key(&self, key: &str) -> Option<&ProblemCategory> {
        self.categories.values().find(|c| c.key == key)
    }

    pub fn timing(&self, session_id: &str, task_index: u8) -> Option<&TaskTiming> {
        self.timings.get(session_id).and_then(|t| t.get(&task_index))
    }

    pub fn has_dedup_key(&self, kind: SourceKind, name: &str, key: &str) -> bool {
        self.dedup_index.contains(&dedup_entry(kind, name, key))
    }

    pub fn members_of(&self, id: &CategoryId) -> Vec<Complaint> {
        self.categories
            .get(id)
            .map(|c| {
                c.member_complaint_ids
                    .iter()
                    .filter_map(|cid| self.complaints.get(cid).cloned())
                    .collect()
            })
            .unwrap_or_default()
    }

    /// SHA-256 over the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).unwrap_or_default();
        hex::encode(Sha256::digest(bytes))
    }

    fn source_mut(&mut self, kind: SourceKind, name: &str) -> &mut DataSource {
        let key = DataSource::key(kind, name);
        self.sources.entry(key.clone()).or_insert_with(|| DataSource {
            id: key,
            source_kind: kind,
            source_name: name.to_owned(),
            item_count: 0,
            last_ingest_at: None,
        })
    }

    fn insert_complaint(&mut self, complaint: Complaint, at: Timestamp) {
        if let Some(key) = &complaint.dedup_key {
            self.dedup_index
                .insert(dedup_entry(complaint.source_kind, &complaint.source_name, key));
        }
        let source = self.source_mut(complaint.source_kind, &complaint.source_name);
        source.item_count += 1;
        source.last_ingest_at = Some(at);
        self.complaints.insert(complaint.id.clone(), complaint);
    }

    fn check_new_complaints<'a>(&self, complaints: impl IntoIterator<Item = &'a Complaint>) -> Check {
        let mut ids = HashSet::new();
        let mut keys = HashSet::new();
        for c in complaints {
            if self.complaints.contains_key(&c.id) || !ids.insert(&c.id) {
                return Err(format!("complaint {} already exists", c.id));
            }
            if let Some(key) = &c.dedup_key {
                let entry = dedup_entry(c.source_kind, &c.source_name, key);
                if self.dedup_index.contains(&entry) || !keys.insert(entry) {
                    return Err(format!("duplicate dedup key for complaint {}", c.id));
                }
            }
        }
        Ok(())
    }

    fn check_new_solutions<'a>(
        &self,
        solutions: impl IntoIterator<Item = &'a Solution>,
        extra_categories: &HashSet<&CategoryId>,
        removed: &HashSet<&SolutionId>,
    ) -> Check {
        let mut ids = HashSet::new();
        for s in solutions {
            if !self.categories.contains_key(&s.category_id) && !extra_categories.contains(&s.category_id) {
                return Err(format!("solution {} targets unknown category", s.id));
            }
            let taken = self.solutions.contains_key(&s.id) && !removed.contains(&s.id);
            if taken || !ids.insert(&s.id) {
                return Err(format!("solution {} already exists", s.id));
            }
        }
        Ok(())
    }

    fn require_category(&self, id: &CategoryId) -> Check {
        if self.categories.contains_key(id) {
            Ok(())
        } else {
            Err(format!("unknown category {id}"))
        }
    }

    fn document_len(&self, id: &CategoryId) -> usize {
        self.documents.get(id).map_or(0, SharedDocument::char_len)
    }

    /// Whether `event` can be folded onto this state. Never mutates.
    pub fn check(&self, event: &Event) -> Check {
        match event {
            Event::ComplaintsIngested {
                source_kind,
                source_name,
                complaints,
                ..
            } => {
                if let Some(c) = complaints
                    .iter()
                    .find(|c| c.source_kind != *source_kind || &c.source_name != source_name)
                {
                    return Err(format!("complaint {} does not belong to this source", c.id));
                }
                self.check_new_complaints(complaints)
            }
            Event::ManualIssueAdded { complaint } => self.check_new_complaints([complaint]),
            Event::PipelineCommitted(commit) => {
                let mut assigned = HashSet::new();
                let mut keys = HashSet::new();
                for c in &commit.categories {
                    if !keys.insert(&c.key) {
                        return Err(format!("category {:?} committed twice", c.name));
                    }
                    if let Some(existing) = self.categories.get(&c.id) {
                        if existing.key != c.key {
                            return Err(format!("category {} changes identity", c.id));
                        }
                    }
                    for member in &c.members {
                        if !self.complaints.contains_key(member) {
                            return Err(format!("category {} lists unknown complaint {member}", c.name));
                        }
                        if !assigned.insert(member) {
                            return Err(format!("complaint {member} assigned twice"));
                        }
                    }
                }
                let committed: HashSet<&CategoryId> = commit.categories.iter().map(|c| &c.id).collect();
                let removed: HashSet<&SolutionId> = commit.superseded_solutions.iter().collect();
                self.check_new_solutions(&commit.ai_solutions, &committed, &removed)
            }
            Event::PipelineFailed { .. } => Ok(()),
            Event::AiSolutionsGenerated { solutions, .. } => {
                self.check_new_solutions(solutions, &HashSet::new(), &HashSet::new())
            }
            Event::ProblemUpvoted { category_id, .. } => self.require_category(category_id),
            Event::ChatMessagePosted { message } => self.require_category(&message.category_id),
            Event::DocumentEdited {
                category_id,
                version,
                ..
            } => {
                self.require_category(category_id)?;
                let current = self.documents.get(category_id).map_or(0, |d| d.version);
                if *version != current + 1 {
                    return Err(format!("document edit to version {version} on top of version {current}"));
                }
                Ok(())
            }
            Event::DocumentAnnotated {
                category_id,
                annotation,
            } => {
                self.require_category(category_id)?;
                if annotation.start > annotation.end || annotation.end > self.document_len(category_id) {
                    return Err(format!("annotation {} anchor out of bounds", annotation.id));
                }
                Ok(())
            }
            Event::SolutionProposed { solution } => {
                self.check_new_solutions([solution], &HashSet::new(), &HashSet::new())
            }
            Event::SolutionVoted { solution_id, .. } => {
                if self.solutions.contains_key(solution_id) {
                    Ok(())
                } else {
                    Err(format!("unknown solution {solution_id}"))
                }
            }
            Event::SolutionFinalized { final_solution } => match self.solutions.get(&final_solution.solution_id) {
                None => Err(format!("unknown solution {}", final_solution.solution_id)),
                Some(s) if s.category_id != final_solution.category_id => {
                    Err("final solution belongs to another category".into())
                }
                Some(_) => Ok(()),
            },
            Event::TaskStarted {
                session_id,
                task_index,
                ..
            } => match self.timing(session_id, *task_index) {
                Some(_) => Err(format!("task {task_index} of {session_id} started twice")),
                None => Ok(()),
            },
            Event::TaskStopped {
                session_id,
                task_index,
                at,
            } => match self.timing(session_id, *task_index) {
                None => Err(format!("task {task_index} of {session_id} stopped before start")),
                Some(t) if t.stopped_at.is_some() => Err(format!("task {task_index} of {session_id} stopped twice")),
                Some(t) if *at < t.started_at => Err(format!("task {task_index} of {session_id} stops before it starts")),
                Some(_) => Ok(()),
            },
        }
    }

    /// Fold one event: all-or-nothing. An error means the event does not fit
    /// this state, which for a log we wrote ourselves indicates corruption.
    pub fn apply(&mut self, event: &Event) -> Check {
        self.check(event)?;
        self.mutate(event);
        Ok(())
    }

    /// Fold an event that already passed [`State::check`].
    pub(crate) fn mutate(&mut self, event: &Event) {
        match event {
            Event::ComplaintsIngested {
                source_kind,
                source_name,
                at,
                complaints,
            } => {
                self.source_mut(*source_kind, source_name).last_ingest_at = Some(*at);
                for c in complaints {
                    self.insert_complaint(c.clone(), *at);
                }
            }
            Event::ManualIssueAdded { complaint } => {
                self.insert_complaint(complaint.clone(), complaint.ingested_at);
            }
            Event::PipelineCommitted(commit) => self.mutate_commit(commit),
            Event::PipelineFailed { run } => {
                self.runs.insert(run.id.clone(), run.clone());
            }
            Event::AiSolutionsGenerated { run, solutions } => {
                self.runs.insert(run.id.clone(), run.clone());
                for s in solutions {
                    self.solutions.insert(s.id.clone(), s.clone());
                }
            }
            Event::ProblemUpvoted {
                category_id,
                voter_handle,
            } => {
                if let Some(c) = self.categories.get_mut(category_id) {
                    c.voter_handles.insert(voter_handle.clone());
                }
            }
            Event::ChatMessagePosted { message } => {
                self.chats
                    .entry(message.category_id.clone())
                    .or_default()
                    .push(message.clone());
            }
            Event::DocumentEdited {
                category_id,
                version,
                body,
                ..
            } => {
                let doc = self
                    .documents
                    .entry(category_id.clone())
                    .or_insert_with(|| SharedDocument::empty(category_id.clone()));
                doc.version = *version;
                doc.body = body.clone();
                doc.refresh_orphans();
            }
            Event::DocumentAnnotated {
                category_id,
                annotation,
            } => {
                self.documents
                    .entry(category_id.clone())
                    .or_insert_with(|| SharedDocument::empty(category_id.clone()))
                    .annotations
                    .push(annotation.clone());
            }
            Event::SolutionProposed { solution } => {
                self.solutions.insert(solution.id.clone(), solution.clone());
            }
            Event::SolutionVoted {
                solution_id,
                voter_handle,
            } => {
                if let Some(s) = self.solutions.get_mut(solution_id) {
                    s.voter_handles.insert(voter_handle.clone());
                }
            }
            Event::SolutionFinalized { final_solution } => {
                self.finals
                    .insert(final_solution.category_id.clone(), final_solution.clone());
            }
            Event::TaskStarted {
                session_id,
                task_index,
                at,
            } => {
                self.timings.entry(session_id.clone()).or_default().insert(
                    *task_index,
                    TaskTiming {
                        session_id: session_id.clone(),
                        task_index: *task_index,
                        started_at: *at,
                        stopped_at: None,
                    },
                );
            }
            Event::TaskStopped {
                session_id,
                task_index,
                at,
            } => {
                if let Some(t) = self.timings.get_mut(session_id).and_then(|t| t.get_mut(task_index)) {
                    t.stopped_at = Some(*at);
                }
            }
        }
    }

    fn mutate_commit(&mut self, commit: &PipelineCommit) {
        let run_id = commit.run.id.clone();
        let at = commit.run.finished_at.unwrap_or(commit.run.started_at);
        for category in self.categories.values_mut() {
            category.member_complaint_ids.clear();
        }
        self.assignments.clear();
        for c in &commit.categories {
            for member in &c.members {
                self.assignments.insert(member.clone(), c.id.clone());
            }
            let entry = self
                .categories
                .entry(c.id.clone())
                .or_insert_with(|| ProblemCategory {
                    id: c.id.clone(),
                    name: c.name.clone(),
                    key: c.key.clone(),
                    description: String::new(),
                    summary: None,
                    member_complaint_ids: Vec::new(),
                    voter_handles: BTreeSet::new(),
                    run_id: run_id.clone(),
                    created_at: at,
                });
            entry.name = c.name.clone();
            entry.description = c.description.clone();
            entry.summary = c.summary.clone();
            entry.member_complaint_ids = c.members.clone();
            entry.run_id = run_id.clone();
        }
        for id in &commit.superseded_solutions {
            self.solutions.remove(id);
        }
        self.runs.insert(run_id.clone(), commit.run.clone());
        self.current_run = Some(run_id);
        for s in &commit.ai_solutions {
            self.solutions.insert(s.id.clone(), s.clone());
        }
    }

    /// Every cross-module invariant; returns the violations found.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let mut per_source: HashMap<String, u64> = HashMap::new();
        for c in self.complaints.values() {
            if c.body.trim().is_empty() {
                problems.push(format!("complaint {} has an empty body", c.id));
            }
            let is_review = c.source_kind == SourceKind::AppStoreReview;
            match c.star_rating {
                Some(r) if is_review && (1..=3).contains(&r) => {}
                None if !is_review => {}
                other => problems.push(format!("complaint {} has rating {other:?} for {}", c.id, c.source_kind)),
            }
            if c.source_kind == SourceKind::Manual {
                if c.external_id.is_some() || c.source_name != MANUAL_SOURCE_NAME {
                    problems.push(format!("manual complaint {} carries source metadata", c.id));
                }
            } else if c.dedup_key.is_none() {
                problems.push(format!("complaint {} has no dedup key", c.id));
            }
            *per_source.entry(DataSource::key(c.source_kind, &c.source_name)).or_default() += 1;
        }
        let dedup_count = self.complaints.values().filter(|c| c.dedup_key.is_some()).count();
        if dedup_count != self.dedup_index.len() {
            problems.push("dedup index out of sync with complaints".into());
        }
        for (key, source) in &self.sources {
            let stored = per_source.get(key).copied().unwrap_or(0);
            if source.item_count != stored {
                problems.push(format!("source {key} counts {} but stores {stored}", source.item_count));
            }
        }
        if per_source.keys().any(|k| !self.sources.contains_key(k)) {
            problems.push("complaint references an unregistered source".into());
        }

        let mut live_keys = HashSet::new();
        let mut seen_members = HashSet::new();
        for category in self.categories.values() {
            if !self.runs.contains_key(&category.run_id) {
                problems.push(format!("category {} references unknown run", category.id));
            }
            if category.is_live() && !live_keys.insert(category.key.clone()) {
                problems.push(format!("two live categories named {:?}", category.name));
            }
            if category.name.trim().is_empty() || category.key != category.name.to_lowercase() {
                problems.push(format!("category {} name is not normalized", category.id));
            }
            for member in &category.member_complaint_ids {
                if !self.complaints.contains_key(member) {
                    problems.push(format!("category {} lists unknown complaint {member}", category.id));
                }
                if !seen_members.insert(member.clone()) {
                    problems.push(format!("complaint {member} sits in two categories"));
                }
                if self.assignments.get(member) != Some(&category.id) {
                    problems.push(format!("assignment of {member} disagrees with category {}", category.id));
                }
            }
        }
        if seen_members.len() != self.assignments.len() {
            problems.push("assignment index out of sync with categories".into());
        }

        for s in self.solutions.values() {
            if s.body.trim().is_empty() {
                problems.push(format!("solution {} has an empty body", s.id));
            }
            if !self.categories.contains_key(&s.category_id) {
                problems.push(format!("solution {} targets unknown category", s.id));
            }
            let consistent = match s.origin {
                Origin::Ai => s.disclaimer_required && s.run_id.as_ref().is_some_and(|r| self.runs.contains_key(r)),
                Origin::Human => !s.disclaimer_required && s.author_handle.is_some(),
            };
            if !consistent {
                problems.push(format!("solution {} origin metadata is inconsistent", s.id));
            }
        }
        for (category_id, decision) in &self.finals {
            match self.solutions.get(&decision.solution_id) {
                Some(s) if &s.category_id == category_id => {}
                _ => problems.push(format!("final solution of {category_id} does not resolve")),
            }
        }
        for (category_id, doc) in &self.documents {
            let len = doc.char_len();
            for a in &doc.annotations {
                if a.start > a.end || (!a.orphaned && a.end > len) || (a.orphaned && a.end <= len) {
                    problems.push(format!("annotation {} on {category_id} has a stale anchor", a.id));
                }
            }
        }
        for (category_id, thread) in &self.chats {
            if !self.categories.contains_key(category_id) {
                problems.push(format!("chat for unknown category {category_id}"));
            }
            let ordered = thread
                .windows(2)
                .all(|w| (w[0].created_at, &w[0].id) < (w[1].created_at, &w[1].id));
            if !ordered {
                problems.push(format!("chat of {category_id} is not in (created_at, id) order"));
            }
        }
        for tasks in self.timings.values() {
            for t in tasks.values() {
                if t.stopped_at.is_some_and(|stop| stop < t.started_at) {
                    problems.push(format!("task {} of {} stops before it starts", t.task_index, t.session_id));
                }
            }
        }
        for run in self.runs.values() {
            if run.status == RunStatus::Running {
                problems.push(format!("run {} committed while still running", run.id));
            }
        }
        problems
    }

    pub fn ensure_invariants(&self) -> Result<()> {
        let problems = self.check_invariants();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Internal(problems.join("; ")))
        }
    }
}

