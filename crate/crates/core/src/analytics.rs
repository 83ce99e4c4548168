//! Problem categories and the two zoom levels over them.

use std::cmp::Reverse;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::error::{Error, Result};
use crate::ids::{CategoryId, ComplaintId, RunId};
use crate::ingestion::{Complaint, SourceKind};
use crate::state::{Event, State};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemCategory {
    pub id: CategoryId,
    /// Display name; unique among live categories by `key`.
    pub name: String,
    pub key: String,
    pub description: String,
    pub summary: Option<String>,
    pub member_complaint_ids: Vec<ComplaintId>,
    pub voter_handles: BTreeSet<String>,
    pub run_id: RunId,
    pub created_at: Timestamp,
}

impl ProblemCategory {
    pub fn upvote_count(&self) -> u64 {
        self.voter_handles.len() as u64
    }

    /// Live categories have members and show up in views.
    pub fn is_live(&self) -> bool {
        !self.member_complaint_ids.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoomOutBar {
    pub category_id: CategoryId,
    pub name: String,
    pub complaint_count: u64,
    pub upvote_count: u64,
    pub description: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoomOutView {
    pub bars: Vec<ZoomOutBar>,
    pub total_categorized: u64,
    pub total_unassigned: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostView {
    pub id: ComplaintId,
    pub source_kind: SourceKind,
    pub source_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author_handle: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub star_rating: Option<u8>,
    pub body: String,
    pub created_at: Timestamp,
}

impl From<&Complaint> for PostView {
    fn from(c: &Complaint) -> Self {
        PostView {
            id: c.id.clone(),
            source_kind: c.source_kind,
            source_name: c.source_name.clone(),
            author_handle: c.author_handle.clone(),
            star_rating: c.star_rating,
            body: c.body.clone(),
            created_at: c.created_at,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page<T> {
    pub items: Vec<T>,
    /// 1-based.
    pub page: usize,
    pub page_size: usize,
    pub total_items: usize,
    pub total_pages: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoomInView {
    pub category_id: CategoryId,
    pub name: String,
    pub description: String,
    pub summary: Option<String>,
    pub upvote_count: u64,
    pub posts: Page<PostView>,
}

pub fn zoom_out(state: &State) -> ZoomOutView {
    let mut bars: Vec<ZoomOutBar> = state
        .categories
        .values()
        .filter(|c| c.is_live())
        .map(|c| ZoomOutBar {
            category_id: c.id.clone(),
            name: c.name.clone(),
            complaint_count: c.member_complaint_ids.len() as u64,
            upvote_count: c.upvote_count(),
            description: c.description.clone(),
        })
        .collect();
    bars.sort_by(|a, b| {
        b.complaint_count
            .cmp(&a.complaint_count)
            .then_with(|| a.name.cmp(&b.name))
    });
    let total_categorized: u64 = bars.iter().map(|b| b.complaint_count).sum();
    ZoomOutView {
        total_unassigned: state.complaints.len() as u64 - total_categorized,
        total_categorized,
        bars,
    }
}

/// Newest first, then by id.
fn post_order(a: &&Complaint, b: &&Complaint) -> std::cmp::Ordering {
    Reverse(a.created_at).cmp(&Reverse(b.created_at)).then_with(|| a.id.cmp(&b.id))
}

pub fn paginate<T: Clone>(items: &[T], page: usize, page_size: usize) -> Result<Page<T>> {
    if page == 0 || page_size == 0 {
        return Err(Error::invalid("page and page_size start at 1"));
    }
    let total_pages = items.len().div_ceil(page_size);
    let start = (page - 1).saturating_mul(page_size).min(items.len());
    let end = start.saturating_add(page_size).min(items.len());
    Ok(Page {
        items: items[start..end].to_vec(),
        page,
        page_size,
        total_items: items.len(),
        total_pages,
    })
}

pub fn zoom_in(state: &State, category_id: &CategoryId, page: usize, page_size: usize) -> Result<ZoomInView> {
    let category = state.category(category_id)?;
    let mut members: Vec<&Complaint> = category
        .member_complaint_ids
        .iter()
        .filter_map(|id| state.complaints.get(id))
        .collect();
    members.sort_by(post_order);
    let posts: Vec<PostView> = members.into_iter().map(PostView::from).collect();
    Ok(ZoomInView {
        category_id: category.id.clone(),
        name: category.name.clone(),
        description: category.description.clone(),
        summary: category.summary.clone(),
        upvote_count: category.upvote_count(),
        posts: paginate(&posts, page, page_size)?,
    })
}

/// Complaints no live category holds, newest first.
pub fn unassigned(state: &State, page: usize, page_size: usize) -> Result<Page<PostView>> {
    let mut rest: Vec<&Complaint> = state
        .complaints
        .values()
        .filter(|c| !state.assignments.contains_key(&c.id))
        .collect();
    rest.sort_by(post_order);
    let posts: Vec<PostView> = rest.into_iter().map(PostView::from).collect();
    paginate(&posts, page, page_size)
}

pub(crate) fn normalize_handle(handle: &str) -> Result<String> {
    let handle = handle.trim();
    if handle.is_empty() {
        Err(Error::invalid("handle must not be empty"))
    } else {
        Ok(handle.to_owned())
    }
}

/// `Ok(None)` when the voter already voted; the count stays as it is.
pub fn upvote_problem(state: &State, category_id: &CategoryId, voter_handle: &str) -> Result<Option<Event>> {
    let category = state.category(category_id)?;
    let voter_handle = normalize_handle(voter_handle)?;
    if category.voter_handles.contains(&voter_handle) {
        return Ok(None);
    }
    Ok(Some(Event::ProblemUpvoted {
        category_id: category_id.clone(),
        voter_handle,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pagination_arithmetic() {
        let items: Vec<u32> = (0..25).collect();
        let sizes: Vec<usize> = (1..=4)
            .map(|p| paginate(&items, p, 10).unwrap().items.len())
            .collect();
        assert_eq!(sizes, vec![10, 10, 5, 0]);
        assert_eq!(paginate(&items, 1, 10).unwrap().total_pages, 3);
        assert!(paginate(&items, 0, 10).is_err());
        assert!(paginate(&items, 1, 0).is_err());
        assert_eq!(paginate::<u32>(&[], 1, 10).unwrap().total_pages, 0);
    }
}
