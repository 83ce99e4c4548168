//! The command side: validate, append, apply.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::Value;

use crate::analytics::{self, Page, PostView, ZoomInView, ZoomOutView};
use crate::clock::{Clock, SystemClock, Timestamp};
use crate::collaboration::{
    self, ChatMessage, FinalView, Origin, SharedDocument, Solution, SolutionView, DEFAULT_DISCLAIMER,
};
use crate::error::{Error, Result};
use crate::eval::{self, TaskTiming};
use crate::ids::{CategoryId, ComplaintId, IdGen, RunId, SolutionId};
use crate::ingestion::{self, Complaint, DataSource, IngestReport, SourceKind, MANUAL_SOURCE_NAME};
use crate::pipeline::parse::first_sentence;
use crate::pipeline::{LlmProvider, Pipeline, PipelineConfig, PipelineOutcome, PipelineRun, RunStatus};
use crate::state::{CommittedCategory, Event, PipelineCommit, State};
use crate::store::{self, EventLog, EventRecord, LOG_FILE};

/// State plus the log that backs it. Every mutation goes through
/// [`Workspace::commit`], which refuses events the state would not accept
/// before anything reaches the log.
pub struct Workspace {
    state: State,
    log: EventLog,
    data_dir: Option<PathBuf>,
    clock: Arc<dyn Clock>,
    ids: IdGen,
    disclaimer: String,
}

/// Inputs of a pipeline run, captured so the run itself can proceed without
/// holding the workspace.
#[derive(Clone, Debug)]
pub struct RunRequest {
    pub run_id: RunId,
    pub complaints: Vec<Complaint>,
}

impl Workspace {
    pub fn in_memory() -> Self {
        Self::in_memory_with(Arc::new(SystemClock), IdGen::new())
    }

    pub fn in_memory_with(clock: Arc<dyn Clock>, ids: IdGen) -> Self {
        Workspace {
            state: State::default(),
            log: EventLog::in_memory(),
            data_dir: None,
            clock,
            ids,
            disclaimer: DEFAULT_DISCLAIMER.to_owned(),
        }
    }

    pub fn open(dir: &Path) -> Result<Self> {
        Self::open_with(dir, Arc::new(SystemClock), IdGen::new())
    }

    /// Restore from `dir` (snapshot plus log tail) and keep appending there.
    pub fn open_with(dir: &Path, clock: Arc<dyn Clock>, ids: IdGen) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let state = store::restore(dir)?;
        let log = EventLog::open_append(&dir.join(LOG_FILE), state.last_sequence_no)?;
        tracing::info!(dir = %dir.display(), sequence_no = state.last_sequence_no, "workspace restored");
        Ok(Workspace {
            state,
            log,
            data_dir: Some(dir.to_owned()),
            clock,
            ids,
            disclaimer: DEFAULT_DISCLAIMER.to_owned(),
        })
    }

    pub fn with_disclaimer(mut self, text: impl Into<String>) -> Self {
        self.disclaimer = text.into();
        self
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn state_hash(&self) -> String {
        self.state.hash()
    }

    pub fn disclaimer(&self) -> &str {
        &self.disclaimer
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.data_dir.as_deref()
    }

    /// Records appended by an in-memory workspace.
    pub fn memory_log(&self) -> &[EventRecord] {
        self.log.memory_records()
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    fn next_id(&self) -> String {
        self.ids.next(self.clock.now())
    }

    /// Validate, append durably, then apply.
    pub fn commit(&mut self, event: Event) -> Result<EventRecord> {
        self.state.check(&event).map_err(Error::conflict)?;
        let record = self.log.append(&event, self.clock.now())?;
        self.state.mutate(&event);
        self.state.last_sequence_no = record.sequence_no;
        Ok(record)
    }

    pub fn snapshot(&self) -> Result<PathBuf> {
        let dir = self
            .data_dir
            .as_deref()
            .ok_or_else(|| Error::invalid("an in-memory workspace has no data directory to snapshot into"))?;
        store::write_snapshot(dir, &self.state)
    }

    // ---- ingestion ----

    pub fn ingest(&mut self, kind: SourceKind, source_name: &str, records: &[Value]) -> Result<IngestReport> {
        if kind == SourceKind::Manual {
            return Err(Error::invalid("manual issues are added one at a time"));
        }
        let source_name = source_name.trim();
        if source_name.is_empty() {
            return Err(Error::invalid("source name must not be empty"));
        }
        let screened = ingestion::screen_batch(kind, records);
        let (admitted, mut report) =
            ingestion::admit(screened, |key| self.state.has_dedup_key(kind, source_name, key));
        let at = self.clock.now();
        let complaints: Vec<Complaint> = admitted
            .into_iter()
            .map(|c| Complaint {
                id: ComplaintId(self.next_id()),
                source_kind: kind,
                source_name: source_name.to_owned(),
                external_id: c.external_id,
                author_handle: c.author_handle,
                body: c.body,
                star_rating: c.star_rating,
                created_at: c.created_at.unwrap_or(at),
                ingested_at: at,
                dedup_key: Some(c.dedup_key),
            })
            .collect();
        report.accepted_ids = complaints.iter().map(|c| c.id.clone()).collect();
        self.commit(Event::ComplaintsIngested {
            source_kind: kind,
            source_name: source_name.to_owned(),
            at,
            complaints,
        })?;
        tracing::info!(
            kind = kind.as_str(),
            source = source_name,
            accepted = report.accepted,
            filtered = report.filtered,
            rejected = report.rejected_count(),
            "ingested"
        );
        Ok(report)
    }

    pub fn ingest_subreddit_posts(&mut self, subreddit: &str, records: &[Value]) -> Result<IngestReport> {
        self.ingest(SourceKind::Subreddit, subreddit, records)
    }

    pub fn ingest_app_reviews(&mut self, app: &str, records: &[Value]) -> Result<IngestReport> {
        self.ingest(SourceKind::AppStoreReview, app, records)
    }

    pub fn add_manual_issue(&mut self, author_handle: Option<&str>, body: &str) -> Result<Complaint> {
        let body = ingestion::normalize_body(body);
        if body.is_empty() {
            return Err(Error::invalid("issue body must not be empty"));
        }
        let at = self.clock.now();
        let complaint = Complaint {
            id: ComplaintId(self.next_id()),
            source_kind: SourceKind::Manual,
            source_name: MANUAL_SOURCE_NAME.to_owned(),
            external_id: None,
            author_handle: author_handle.map(str::trim).filter(|h| !h.is_empty()).map(str::to_owned),
            body,
            star_rating: None,
            created_at: at,
            ingested_at: at,
            dedup_key: None,
        };
        self.commit(Event::ManualIssueAdded {
            complaint: complaint.clone(),
        })?;
        Ok(complaint)
    }

    /// By kind, then name.
    pub fn list_data_sources(&self) -> Vec<DataSource> {
        let mut sources: Vec<DataSource> = self.state.sources.values().cloned().collect();
        sources.sort_by(|a, b| (a.source_kind, &a.source_name).cmp(&(b.source_kind, &b.source_name)));
        sources
    }

    pub fn list_unassigned(&self, page: usize, page_size: usize) -> Result<Page<PostView>> {
        analytics::unassigned(&self.state, page, page_size)
    }

    // ---- pipeline ----

    pub fn new_run_id(&self) -> RunId {
        RunId(self.next_id())
    }

    /// Every stored complaint, in id (= ingestion) order.
    pub fn corpus(&self) -> Vec<Complaint> {
        self.state.complaints.values().cloned().collect()
    }

    pub fn prepare_run(&self) -> Result<RunRequest> {
        let complaints = self.corpus();
        if complaints.is_empty() {
            return Err(Error::invalid("there are no complaints to categorize"));
        }
        Ok(RunRequest {
            run_id: self.new_run_id(),
            complaints,
        })
    }

    /// Run synchronously against the current corpus and commit the result.
    pub fn run_pipeline(&mut self, provider: &dyn LlmProvider, config: &PipelineConfig) -> Result<PipelineRun> {
        let request = self.prepare_run()?;
        let outcome = Pipeline::new(provider, config).run(request.run_id, &request.complaints, self.clock.as_ref())?;
        self.commit_pipeline(outcome)
    }

    /// Replace the categorization with the outcome's. A failed run is
    /// recorded but leaves categories untouched.
    pub fn commit_pipeline(&mut self, outcome: PipelineOutcome) -> Result<PipelineRun> {
        let PipelineOutcome { run, categories, .. } = outcome;
        if run.status == RunStatus::Failed {
            tracing::warn!(run = %run.id, "pipeline run failed");
            self.commit(Event::PipelineFailed { run: run.clone() })?;
            return Ok(run);
        }
        let at = run.finished_at.unwrap_or_else(|| self.clock.now());
        let finalized: HashSet<&SolutionId> = self.state.finals.values().map(|f| &f.solution_id).collect();
        let mut committed = Vec::with_capacity(categories.len());
        let mut superseded = Vec::new();
        let mut ai_solutions = Vec::new();
        for result in categories {
            let existing = self.state.category_by_key(&result.key);
            let id = existing.map_or_else(|| CategoryId(self.next_id()), |c| c.id.clone());
            let summary = result.summary.or_else(|| existing.and_then(|c| c.summary.clone()));
            let description = summary.as_deref().map(first_sentence).unwrap_or_default();
            if !result.solutions.is_empty() {
                superseded.extend(
                    self.state
                        .solutions
                        .values()
                        .filter(|s| {
                            s.category_id == id
                                && s.origin == Origin::Ai
                                && s.voter_handles.is_empty()
                                && !finalized.contains(&s.id)
                        })
                        .map(|s| s.id.clone()),
                );
                for body in result.solutions {
                    ai_solutions.push(Solution::ai(SolutionId(self.next_id()), id.clone(), run.id.clone(), body, at));
                }
            }
            committed.push(CommittedCategory {
                id,
                name: result.name,
                key: result.key,
                description,
                summary,
                members: result.members,
            });
        }
        tracing::info!(run = %run.id, categories = committed.len(), status = ?run.status, "pipeline committed");
        self.commit(Event::PipelineCommitted(Box::new(PipelineCommit {
            run: run.clone(),
            categories: committed,
            superseded_solutions: superseded,
            ai_solutions,
        })))?;
        Ok(run)
    }

    pub fn run(&self, id: &RunId) -> Result<&PipelineRun> {
        self.state.runs.get(id).ok_or_else(|| Error::not_found("run", id))
    }

    /// Category name and members for an on-demand solutions request.
    pub fn solutions_request(&self, category_id: &CategoryId) -> Result<(RunId, String, Vec<Complaint>)> {
        let category = self.state.category(category_id)?;
        let members = self.state.members_of(category_id);
        if members.is_empty() {
            return Err(Error::invalid(format!("category {category_id} has no complaints")));
        }
        Ok((self.new_run_id(), category.name.clone(), members))
    }

    pub fn generate_ai_solutions(
        &mut self,
        category_id: &CategoryId,
        provider: &dyn LlmProvider,
        config: &PipelineConfig,
    ) -> Result<Vec<SolutionView>> {
        let (run_id, name, members) = self.solutions_request(category_id)?;
        let started_at = self.clock.now();
        let outcome = Pipeline::new(provider, config).solutions(&name, &members)?;
        self.commit_ai_solutions(category_id, run_id, started_at, provider.id(), outcome)
    }

    pub fn commit_ai_solutions(
        &mut self,
        category_id: &CategoryId,
        run_id: RunId,
        started_at: Timestamp,
        provider_id: String,
        outcome: crate::pipeline::SolutionsOutcome,
    ) -> Result<Vec<SolutionView>> {
        let at = self.clock.now();
        let mut run = PipelineRun {
            id: run_id.clone(),
            started_at,
            finished_at: Some(at),
            provider_id,
            chunk_count: 1,
            requests: outcome.requests,
            status: RunStatus::Succeeded,
            notes: Vec::new(),
        };
        match outcome.items {
            Err(error) => {
                run.status = RunStatus::Failed;
                run.notes.push(error.clone());
                self.commit(Event::PipelineFailed { run })?;
                Err(Error::Provider(error))
            }
            Ok(items) => {
                let solutions: Vec<Solution> = items
                    .into_iter()
                    .map(|body| Solution::ai(SolutionId(self.next_id()), category_id.clone(), run_id.clone(), body, at))
                    .collect();
                let views = solutions.iter().map(|s| SolutionView::new(s, &self.disclaimer)).collect();
                self.commit(Event::AiSolutionsGenerated { run, solutions })?;
                Ok(views)
            }
        }
    }

    // ---- analytics ----

    pub fn zoom_out(&self) -> ZoomOutView {
        analytics::zoom_out(&self.state)
    }

    pub fn zoom_in(&self, category_id: &CategoryId, page: usize, page_size: usize) -> Result<ZoomInView> {
        analytics::zoom_in(&self.state, category_id, page, page_size)
    }

    /// Returns the upvote count after the call; repeat votes change nothing.
    pub fn upvote_problem(&mut self, category_id: &CategoryId, voter_handle: &str) -> Result<u64> {
        if let Some(event) = analytics::upvote_problem(&self.state, category_id, voter_handle)? {
            self.commit(event)?;
        }
        Ok(self.state.category(category_id)?.upvote_count())
    }

    // ---- collaboration ----

    pub fn chat_thread(&self, category_id: &CategoryId) -> Result<Vec<ChatMessage>> {
        collaboration::chat_thread(&self.state, category_id)
    }

    pub fn post_chat_message(&mut self, category_id: &CategoryId, author: &str, body: &str) -> Result<ChatMessage> {
        let id = self.next_id().into();
        let event = collaboration::post_chat_message(&self.state, id, category_id, author, body, self.clock.now())?;
        let Event::ChatMessagePosted { message } = &event else {
            unreachable!()
        };
        let message = message.clone();
        self.commit(event)?;
        Ok(message)
    }

    pub fn document(&self, category_id: &CategoryId) -> Result<SharedDocument> {
        collaboration::document(&self.state, category_id)
    }

    pub fn edit_document(&mut self, category_id: &CategoryId, base_version: u64, body: &str) -> Result<SharedDocument> {
        let event = collaboration::edit_document(&self.state, category_id, base_version, body, self.clock.now())?;
        self.commit(event)?;
        self.document(category_id)
    }

    pub fn annotate_document(
        &mut self,
        category_id: &CategoryId,
        author: &str,
        range: (usize, usize),
        note: &str,
    ) -> Result<SharedDocument> {
        let id = self.next_id().into();
        let event =
            collaboration::annotate_document(&self.state, id, category_id, author, range, note, self.clock.now())?;
        self.commit(event)?;
        self.document(category_id)
    }

    pub fn propose_solution(&mut self, category_id: &CategoryId, author: &str, body: &str) -> Result<SolutionView> {
        let id = SolutionId(self.next_id());
        let event = collaboration::propose_solution(&self.state, id.clone(), category_id, author, body, self.clock.now())?;
        self.commit(event)?;
        Ok(SolutionView::new(&self.state.solutions[&id], &self.disclaimer))
    }

    pub fn list_solutions(&self, category_id: &CategoryId) -> Result<Vec<SolutionView>> {
        collaboration::list_solutions(&self.state, category_id, &self.disclaimer)
    }

    /// Vote on a solution of `category_id`; returns the view after the vote.
    pub fn vote_solution(
        &mut self,
        category_id: &CategoryId,
        solution_id: &SolutionId,
        voter_handle: &str,
    ) -> Result<SolutionView> {
        self.state.category(category_id)?;
        match self.state.solutions.get(solution_id) {
            Some(s) if &s.category_id == category_id => {}
            _ => return Err(Error::not_found("solution", solution_id)),
        }
        if let Some(event) = collaboration::vote_solution(&self.state, solution_id, voter_handle)? {
            self.commit(event)?;
        }
        Ok(SolutionView::new(&self.state.solutions[solution_id], &self.disclaimer))
    }

    pub fn finalize_solution(
        &mut self,
        category_id: &CategoryId,
        solution_id: &SolutionId,
        decided_by: &[String],
        replace: bool,
    ) -> Result<FinalView> {
        let event = collaboration::finalize_solution(
            &self.state,
            category_id,
            solution_id,
            decided_by,
            replace,
            self.clock.now(),
        )?;
        self.commit(event)?;
        self.final_view(category_id)?
            .ok_or_else(|| Error::Internal("final solution vanished after commit".into()))
    }

    pub fn final_view(&self, category_id: &CategoryId) -> Result<Option<FinalView>> {
        collaboration::final_view(&self.state, category_id, &self.disclaimer)
    }

    // ---- eval ----

    pub fn start_task(&mut self, session_id: &str, task_index: u8) -> Result<TaskTiming> {
        let event = eval::start_task(&self.state, session_id, task_index, self.clock.now())?;
        self.commit_timing(event)
    }

    pub fn stop_task(&mut self, session_id: &str, task_index: u8) -> Result<TaskTiming> {
        let event = eval::stop_task(&self.state, session_id, task_index, self.clock.now())?;
        self.commit_timing(event)
    }

    fn commit_timing(&mut self, event: Event) -> Result<TaskTiming> {
        let (session, index) = match &event {
            Event::TaskStarted {
                session_id, task_index, ..
            }
            | Event::TaskStopped {
                session_id, task_index, ..
            } => (session_id.clone(), *task_index),
            _ => unreachable!(),
        };
        self.commit(event)?;
        self.state
            .timing(&session, index)
            .cloned()
            .ok_or_else(|| Error::Internal("timing vanished after commit".into()))
    }
}
