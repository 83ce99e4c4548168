//! Complaint collection from subreddit dumps, app-store review dumps and
//! manual entry.
//!
//! Raw dumps are newline-delimited JSON with the fields
//! `{external_id?, author?, body, rating?, created_at?}`. Screening a batch is
//! a pure per-record step (run in parallel), admission against the store's
//! dedup keys happens afterwards in input order.

use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

use crate::clock::Timestamp;
use crate::ids::ComplaintId;
use crate::par;

/// Name under which manually entered issues are listed as a data source.
pub const MANUAL_SOURCE_NAME: &str = "manual";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Subreddit,
    AppStoreReview,
    Manual,
}

impl SourceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SourceKind::Subreddit => "subreddit",
            SourceKind::AppStoreReview => "app_store_review",
            SourceKind::Manual => "manual",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "subreddit" => Some(SourceKind::Subreddit),
            "app_store_review" | "app-store-review" | "review" => Some(SourceKind::AppStoreReview),
            "manual" => Some(SourceKind::Manual),
            _ => None,
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Complaint {
    pub id: ComplaintId,
    pub source_kind: SourceKind,
    pub source_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author_handle: Option<String>,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub star_rating: Option<u8>,
    pub created_at: Timestamp,
    pub ingested_at: Timestamp,
    /// Source-scoped dedup key; absent for manual entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dedup_key: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSource {
    pub id: String,
    pub source_kind: SourceKind,
    pub source_name: String,
    pub item_count: u64,
    pub last_ingest_at: Option<Timestamp>,
}

impl DataSource {
    pub fn key(kind: SourceKind, name: &str) -> String {
        format!("{}:{}", kind.as_str(), name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", content = "detail", rename_all = "snake_case")]
pub enum RejectReason {
    Malformed(String),
    EmptyBody,
    InvalidRating(String),
    Duplicate,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::Malformed(why) => write!(f, "malformed record: {why}"),
            RejectReason::EmptyBody => f.write_str("empty body"),
            RejectReason::InvalidRating(why) => write!(f, "invalid rating: {why}"),
            RejectReason::Duplicate => f.write_str("duplicate"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub index: usize,
    pub reason: RejectReason,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub input_count: usize,
    pub accepted: usize,
    /// Reviews rated 4 or 5; dropped without being an error.
    pub filtered: usize,
    pub rejected: Vec<Rejection>,
    pub accepted_ids: Vec<ComplaintId>,
}

impl IngestReport {
    pub fn rejected_count(&self) -> usize {
        self.rejected.len()
    }
}

/// A record that passed screening and may still be a duplicate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub index: usize,
    pub external_id: Option<String>,
    pub author_handle: Option<String>,
    pub body: String,
    pub star_rating: Option<u8>,
    pub created_at: Option<Timestamp>,
    pub dedup_key: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Screened {
    Candidate(Candidate),
    Filtered,
    Rejected(RejectReason),
}

/// Trim plus NFC; the text is otherwise kept verbatim.
pub fn normalize_body(raw: &str) -> String {
    raw.nfc().collect::<String>().trim().to_owned()
}

fn optional_text(obj: &serde_json::Map<String, Value>, field: &str) -> Result<Option<String>, RejectReason> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => {
            let s = s.trim();
            Ok((!s.is_empty()).then(|| s.to_owned()))
        }
        Some(Value::Number(n)) => Ok(Some(n.to_string())),
        Some(_) => Err(RejectReason::Malformed(format!("field `{field}` must be a string"))),
    }
}

fn parse_created_at(value: Option<&Value>) -> Result<Option<Timestamp>, RejectReason> {
    match value {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Timestamp::parse_rfc3339(s)
            .map(Some)
            .ok_or_else(|| RejectReason::Malformed(format!("created_at `{s}` is not RFC 3339"))),
        Some(Value::Number(n)) => n
            .as_i64()
            .map(|secs| Some(Timestamp::from_millis(secs.saturating_mul(1000))))
            .ok_or_else(|| RejectReason::Malformed("created_at must be integer epoch seconds".into())),
        Some(_) => Err(RejectReason::Malformed("created_at has an unsupported type".into())),
    }
}

fn parse_rating(value: Option<&Value>) -> Result<u8, RejectReason> {
    let value = match value {
        None | Some(Value::Null) => return Err(RejectReason::InvalidRating("missing".into())),
        Some(v) => v,
    };
    let rating = value
        .as_i64()
        .ok_or_else(|| RejectReason::InvalidRating(format!("{value} is not an integer")))?;
    if (1..=5).contains(&rating) {
        Ok(rating as u8)
    } else {
        Err(RejectReason::InvalidRating(format!("{rating} is outside 1..5")))
    }
}

fn fingerprint(author: Option<&str>, body: &str, created_at: Option<Timestamp>) -> String {
    let mut hasher = Sha256::new();
    hasher.update(author.unwrap_or("").as_bytes());
    hasher.update([0u8]);
    hasher.update(body.as_bytes());
    hasher.update([0u8]);
    if let Some(ts) = created_at {
        hasher.update(ts.millis().to_be_bytes());
    }
    format!("sha256:{}", hex::encode(hasher.finalize()))
}

/// Screen one raw record. Manual entries never go through here.
pub fn screen_record(kind: SourceKind, index: usize, record: &Value) -> Screened {
    let obj = match record.as_object() {
        Some(obj) => obj,
        None => return Screened::Rejected(RejectReason::Malformed("expected a JSON object".into())),
    };
    let raw_body = match obj.get("body") {
        Some(Value::String(s)) => s,
        Some(_) => return Screened::Rejected(RejectReason::Malformed("field `body` must be a string".into())),
        None => return Screened::Rejected(RejectReason::Malformed("missing field `body`".into())),
    };
    let star_rating = if kind == SourceKind::AppStoreReview {
        match parse_rating(obj.get("rating")) {
            Ok(r) if r >= 4 => return Screened::Filtered,
            Ok(r) => Some(r),
            Err(reason) => return Screened::Rejected(reason),
        }
    } else {
        None
    };
    let body = normalize_body(raw_body);
    if body.is_empty() {
        return Screened::Rejected(RejectReason::EmptyBody);
    }
    let fields = (|| {
        let external_id = optional_text(obj, "external_id")?;
        let author_handle = optional_text(obj, "author")?;
        let created_at = parse_created_at(obj.get("created_at"))?;
        Ok::<_, RejectReason>((external_id, author_handle, created_at))
    })();
    let (external_id, author_handle, created_at) = match fields {
        Ok(f) => f,
        Err(reason) => return Screened::Rejected(reason),
    };
    let dedup_key = match &external_id {
        Some(ext) => format!("ext:{ext}"),
        None => fingerprint(author_handle.as_deref(), &body, created_at),
    };
    Screened::Candidate(Candidate {
        index,
        external_id,
        author_handle,
        body,
        star_rating,
        created_at,
        dedup_key,
    })
}

pub fn screen_batch(kind: SourceKind, records: &[Value]) -> Vec<Screened> {
    let indexed: Vec<(usize, &Value)> = records.iter().enumerate().collect();
    par::map(&indexed, |(i, record)| screen_record(kind, *i, record))
}

/// Admit screened records in input order. `exists` answers whether a dedup
/// key is already stored for this source; keys repeated inside the batch are
/// rejected after their first occurrence.
pub fn admit(
    screened: Vec<Screened>,
    exists: impl Fn(&str) -> bool,
) -> (Vec<Candidate>, IngestReport) {
    let mut report = IngestReport {
        input_count: screened.len(),
        ..IngestReport::default()
    };
    let mut seen = HashSet::new();
    let mut admitted = Vec::new();
    for (index, item) in screened.into_iter().enumerate() {
        match item {
            Screened::Filtered => report.filtered += 1,
            Screened::Rejected(reason) => report.rejected.push(Rejection { index, reason }),
            Screened::Candidate(c) => {
                if exists(&c.dedup_key) || !seen.insert(c.dedup_key.clone()) {
                    report.rejected.push(Rejection {
                        index,
                        reason: RejectReason::Duplicate,
                    });
                } else {
                    report.accepted += 1;
                    admitted.push(c);
                }
            }
        }
    }
    (admitted, report)
}

/// Read a newline-delimited JSON dump. Blank lines are skipped; lines that do
/// not parse are kept as raw strings so screening rejects them individually.
pub fn read_dump(reader: impl BufRead) -> std::io::Result<Vec<Value>> {
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).unwrap_or(Value::String(line)));
    }
    Ok(records)
}
