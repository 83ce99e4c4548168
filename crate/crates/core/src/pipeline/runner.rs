use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::parse::{parse_category_map, parse_numbered_list, CategoryName};
use super::prompts::{PromptKind, PromptTemplate};
use super::provider::{complete_with_retry, LlmProvider};
use super::{CategoryAssignment, PipelineConfig, PipelineRun, RequestRecord, RunStatus};
use crate::clock::Clock;
use crate::error::{Error, Result};
use crate::ids::{ComplaintId, RunId};
use crate::ingestion::Complaint;
use crate::par::Executor;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryDraft {
    pub name: String,
    pub key: String,
    pub members: Vec<ComplaintId>,
}

#[derive(Clone, Debug)]
pub struct Categorization {
    /// In order of first appearance across chunks.
    pub categories: Vec<CategoryDraft>,
    pub unassigned: Vec<ComplaintId>,
    pub requests: Vec<RequestRecord>,
    pub chunk_count: usize,
    pub status: RunStatus,
    pub notes: Vec<String>,
}

impl Categorization {
    pub fn category_names(&self) -> Vec<String> {
        self.categories.iter().map(|c| c.name.clone()).collect()
    }

    pub fn assignments(&self, run_id: &RunId) -> Vec<CategoryAssignment> {
        self.categories
            .iter()
            .flat_map(|c| {
                c.members.iter().map(|id| CategoryAssignment {
                    complaint_id: id.clone(),
                    category_name: c.name.clone(),
                    run_id: run_id.clone(),
                })
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct SummaryOutcome {
    pub summary: Option<String>,
    pub requests: Vec<RequestRecord>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SolutionsOutcome {
    pub items: std::result::Result<Vec<String>, String>,
    pub requests: Vec<RequestRecord>,
}

/// Everything a run derived, before it is committed to the store.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryResult {
    pub name: String,
    pub key: String,
    pub members: Vec<ComplaintId>,
    pub summary: Option<String>,
    /// Empty when generation failed for this category.
    pub solutions: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub run: PipelineRun,
    pub categories: Vec<CategoryResult>,
    pub unassigned: Vec<ComplaintId>,
}

/// One provider plus configuration. Requests within a call fan out over a
/// bounded executor; recorded requests always come back in a fixed order.
pub struct Pipeline<'a> {
    provider: &'a dyn LlmProvider,
    config: PipelineConfig,
    exec: Executor,
}

impl<'a> Pipeline<'a> {
    pub fn new(provider: &'a dyn LlmProvider, config: &PipelineConfig) -> Self {
        Pipeline {
            provider,
            config: config.clone(),
            exec: Executor::new(config.parallelism),
        }
    }

    fn budget(&self) -> usize {
        self.config.chunk_budget.max(1)
    }

    fn request(&self, kind: PromptKind, category: Option<&str>, prompt: String) -> RequestRecord {
        let attempted = complete_with_retry(self.provider, &prompt, &self.config.retry);
        let (response, error) = match attempted.result {
            Ok(text) => (Some(text), None),
            Err(e) => (None, Some(e.to_string())),
        };
        RequestRecord {
            kind,
            category: category.map(str::to_owned),
            prompt,
            response,
            error,
            attempts: attempted.attempts,
        }
    }

    pub fn categorize(&self, complaints: &[Complaint]) -> Result<Categorization> {
        if complaints.is_empty() {
            return Err(Error::invalid("no complaints to categorize"));
        }
        let template = PromptTemplate::for_kind(PromptKind::Categorize);
        let chunks: Vec<&[Complaint]> = complaints.chunks(self.budget()).collect();
        let requests = self.exec.map(&chunks, |chunk| {
            let bodies: Vec<String> = chunk.iter().map(|c| c.body.clone()).collect();
            self.request(PromptKind::Categorize, None, template.render(None, &bodies))
        });
        let all_ids = || complaints.iter().map(|c| c.id.clone()).collect::<Vec<_>>();

        if let Some(failed) = requests.iter().position(|r| r.response.is_none()) {
            let reason = requests[failed].error.clone().unwrap_or_default();
            return Ok(Categorization {
                categories: Vec::new(),
                unassigned: all_ids(),
                chunk_count: chunks.len(),
                requests,
                status: RunStatus::Failed,
                notes: vec![format!("categorize chunk {} failed after retries: {reason}", failed + 1)],
            });
        }

        let position: HashMap<&ComplaintId, usize> =
            complaints.iter().enumerate().map(|(i, c)| (&c.id, i)).collect();
        let mut categories: Vec<CategoryDraft> = Vec::new();
        let mut by_key: HashMap<String, usize> = HashMap::new();
        let mut assigned = vec![false; complaints.len()];
        let mut status = RunStatus::Succeeded;
        let mut notes = Vec::new();

        for (chunk_no, (chunk, record)) in chunks.iter().zip(&requests).enumerate() {
            let response = record.response.as_deref().unwrap_or_default();
            let groups = match parse_category_map(response) {
                Ok(groups) => groups,
                Err(why) => {
                    status = RunStatus::Partial;
                    notes.push(format!("categorize chunk {} unparseable: {why}", chunk_no + 1));
                    continue;
                }
            };
            let offset = chunk_no * self.budget();
            for (raw_name, indices) in groups {
                let Some(name) = CategoryName::normalize(&raw_name) else { continue };
                if name.is_non_problem() {
                    continue;
                }
                for idx in indices {
                    if idx == 0 || idx > chunk.len() || assigned[offset + idx - 1] {
                        continue;
                    }
                    assigned[offset + idx - 1] = true;
                    let slot = *by_key.entry(name.key.clone()).or_insert_with(|| {
                        categories.push(CategoryDraft {
                            name: name.display.clone(),
                            key: name.key.clone(),
                            members: Vec::new(),
                        });
                        categories.len() - 1
                    });
                    categories[slot].members.push(chunk[idx - 1].id.clone());
                }
            }
        }
        for category in &mut categories {
            category.members.sort_by_key(|id| position[id]);
        }
        let unassigned = complaints
            .iter()
            .zip(&assigned)
            .filter(|(_, &a)| !a)
            .map(|(c, _)| c.id.clone())
            .collect();
        Ok(Categorization {
            categories,
            unassigned,
            requests,
            chunk_count: chunks.len(),
            status,
            notes,
        })
    }

    /// Summaries over budget are produced chunk-wise and then merged by
    /// summarizing the partial summaries, repeating until one request suffices.
    pub fn summarize(&self, category: &str, members: &[Complaint]) -> Result<SummaryOutcome> {
        if members.is_empty() {
            return Err(Error::invalid(format!("category {category:?} has no complaints to summarize")));
        }
        let template = PromptTemplate::for_kind(PromptKind::Summarize);
        let mut texts: Vec<String> = members.iter().map(|c| c.body.clone()).collect();
        let mut requests = Vec::new();
        loop {
            let chunks: Vec<&[String]> = texts.chunks(self.budget()).collect();
            let round = self.exec.map(&chunks, |chunk| {
                self.request(PromptKind::Summarize, Some(category), template.render(Some(category), chunk))
            });
            let answers: Vec<Option<String>> = round
                .iter()
                .map(|r| r.response.as_deref().map(str::trim).filter(|s| !s.is_empty()).map(str::to_owned))
                .collect();
            let failure = round
                .iter()
                .zip(&answers)
                .find(|(_, a)| a.is_none())
                .map(|(r, _)| r.error.clone().unwrap_or_else(|| "empty summary".into()));
            requests.extend(round);
            if let Some(error) = failure {
                return Ok(SummaryOutcome {
                    summary: None,
                    requests,
                    error: Some(error),
                });
            }
            let mut answers: Vec<String> = answers.into_iter().flatten().collect();
            if answers.len() == 1 {
                return Ok(SummaryOutcome {
                    summary: answers.pop(),
                    requests,
                    error: None,
                });
            }
            texts = answers;
        }
    }

    /// One request carrying every member complaint.
    pub fn solutions(&self, category: &str, members: &[Complaint]) -> Result<SolutionsOutcome> {
        if members.is_empty() {
            return Err(Error::invalid(format!("category {category:?} has no complaints")));
        }
        let template = PromptTemplate::for_kind(PromptKind::Solutions);
        let bodies: Vec<String> = members.iter().map(|c| c.body.clone()).collect();
        let record = self.request(PromptKind::Solutions, Some(category), template.render(Some(category), &bodies));
        let items = match &record.response {
            None => Err(record.error.clone().unwrap_or_default()),
            Some(text) => {
                let items = parse_numbered_list(text);
                if items.is_empty() {
                    Err("response contains no numbered list items".to_owned())
                } else {
                    Ok(items)
                }
            }
        };
        Ok(SolutionsOutcome {
            items,
            requests: vec![record],
        })
    }

    /// Categorize, then summarize and draft solutions for every category.
    pub fn run(&self, run_id: RunId, complaints: &[Complaint], clock: &dyn Clock) -> Result<PipelineOutcome> {
        let started_at = clock.now();
        let categorization = self.categorize(complaints)?;
        let mut run = PipelineRun {
            id: run_id,
            started_at,
            finished_at: None,
            provider_id: self.provider.id(),
            chunk_count: categorization.chunk_count,
            requests: categorization.requests.clone(),
            status: categorization.status,
            notes: categorization.notes.clone(),
        };
        if categorization.status == RunStatus::Failed {
            run.finished_at = Some(clock.now());
            return Ok(PipelineOutcome {
                run,
                categories: Vec::new(),
                unassigned: categorization.unassigned,
            });
        }

        let by_id: HashMap<&ComplaintId, &Complaint> = complaints.iter().map(|c| (&c.id, c)).collect();
        let per_category = self.exec.map(&categorization.categories, |draft| {
            let members: Vec<Complaint> = draft.members.iter().map(|id| by_id[id].clone()).collect();
            let summary = self.summarize(&draft.name, &members);
            let solutions = self.solutions(&draft.name, &members);
            (summary, solutions)
        });

        let mut categories = Vec::with_capacity(per_category.len());
        for (draft, (summary, solutions)) in categorization.categories.iter().zip(per_category) {
            let summary = summary?;
            let solutions = solutions?;
            run.requests.extend(summary.requests);
            run.requests.extend(solutions.requests);
            if let Some(error) = &summary.error {
                run.status = RunStatus::Partial;
                run.notes.push(format!("summary for {:?} failed: {error}", draft.name));
            }
            let items = match solutions.items {
                Ok(items) => items,
                Err(error) => {
                    run.status = RunStatus::Partial;
                    run.notes.push(format!("solutions for {:?} failed: {error}", draft.name));
                    Vec::new()
                }
            };
            categories.push(CategoryResult {
                name: draft.name.clone(),
                key: draft.key.clone(),
                members: draft.members.clone(),
                summary: summary.summary,
                solutions: items,
            });
        }
        run.finished_at = Some(clock.now());
        Ok(PipelineOutcome {
            run,
            categories,
            unassigned: categorization.unassigned,
        })
    }
}
