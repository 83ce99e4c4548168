//! Categorize, summarize and suggest solutions through a provider-agnostic
//! chat-completion interface.

pub mod mock;
pub mod parse;
pub mod prompts;
pub mod provider;
pub mod recorded;
mod runner;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::error::{Error, Result};
use crate::ids::{ComplaintId, RunId};

pub use mock::MockProvider;
pub use parse::CategoryName;
pub use prompts::{PromptKind, PromptTemplate};
pub use provider::{LlmProvider, ProviderError, RetryPolicy};
pub use recorded::{FixtureEntry, FixtureFile, RecordedProvider};
pub use runner::{
    CategoryDraft, CategoryResult, Categorization, Pipeline, PipelineOutcome, SolutionsOutcome, SummaryOutcome,
};

pub const DEFAULT_CHUNK_BUDGET: usize = 50;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Max complaints (or partial summaries) embedded in one request.
    pub chunk_budget: usize,
    /// Max provider requests in flight within a run.
    pub parallelism: usize,
    pub retry: RetryPolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            chunk_budget: DEFAULT_CHUNK_BUDGET,
            parallelism: 4,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Succeeded,
    Failed,
    Partial,
}

/// One logical request; `attempts` counts retries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub kind: PromptKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub attempts: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub id: RunId,
    pub started_at: Timestamp,
    pub finished_at: Option<Timestamp>,
    pub provider_id: String,
    pub chunk_count: usize,
    pub requests: Vec<RequestRecord>,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl PipelineRun {
    /// Copy without the (potentially large) request log.
    pub fn header(&self) -> PipelineRun {
        PipelineRun {
            requests: Vec::new(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryAssignment {
    pub complaint_id: ComplaintId,
    pub category_name: String,
    pub run_id: RunId,
}

/// Global "one run at a time" gate.
#[derive(Debug, Default)]
pub struct RunLock {
    busy: AtomicBool,
}

impl RunLock {
    pub fn new() -> Arc<Self> {
        Arc::new(RunLock::default())
    }

    pub fn try_acquire(self: &Arc<Self>) -> Result<RunGuard> {
        self.busy
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .map_err(|_| Error::AlreadyRunning)?;
        Ok(RunGuard { lock: Arc::clone(self) })
    }

    pub fn is_running(&self) -> bool {
        self.busy.load(Ordering::Acquire)
    }
}

/// Releases the [`RunLock`] on drop.
#[derive(Debug)]
pub struct RunGuard {
    lock: Arc<RunLock>,
}

impl Drop for RunGuard {
    fn drop(&mut self) {
        self.lock.busy.store(false, Ordering::Release);
    }
}
