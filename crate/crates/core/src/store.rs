//! File persistence: a JSONL event log plus an optional JSON snapshot.
//!
//! Log line: `{"sequence_no":N,"kind":"...","payload":{...},"recorded_at":"..."}`.
//! Sequence numbers start at 1 and are gapless. A snapshot stores the state
//! as of some `sequence_no`; opening a data directory loads the snapshot (if
//! any) and replays the events after it.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::clock::Timestamp;
use crate::error::{Error, Result};
use crate::state::{Event, State};

pub const LOG_FILE: &str = "events.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub sequence_no: u64,
    pub kind: String,
    pub payload: Value,
    pub recorded_at: Timestamp,
}

impl EventRecord {
    pub fn new(sequence_no: u64, event: &Event, recorded_at: Timestamp) -> Result<Self> {
        let mut tagged = serde_json::to_value(event)?;
        let payload = tagged
            .get_mut("payload")
            .map(Value::take)
            .unwrap_or(Value::Null);
        Ok(EventRecord {
            sequence_no,
            kind: event.kind().to_owned(),
            payload,
            recorded_at,
        })
    }

    pub fn event(&self) -> std::result::Result<Event, serde_json::Error> {
        serde_json::from_value(serde_json::json!({
            "kind": self.kind,
            "payload": self.payload,
        }))
    }
}

fn corrupt(sequence_no: u64, last_valid: u64, reason: impl Into<String>) -> Error {
    Error::CorruptLog {
        sequence_no,
        last_valid,
        reason: reason.into(),
    }
}

/// Parse a whole log. Stops at the first bad record and reports the
/// sequence number it should have had plus the last good one.
pub fn parse_log(bytes: &[u8]) -> Result<Vec<(EventRecord, Event)>> {
    let mut out = Vec::new();
    let mut last_valid = 0u64;
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let valid = &bytes[..e.valid_up_to()];
        let good_lines = valid.iter().filter(|b| **b == b'\n').count() as u64;
        corrupt(good_lines + 1, good_lines, "log is not valid UTF-8")
    })?;
    let ends_with_newline = text.ends_with('\n');
    let lines: Vec<&str> = text.split_terminator('\n').collect();
    for (i, line) in lines.iter().enumerate() {
        let expected = last_valid + 1;
        if line.trim().is_empty() {
            return Err(corrupt(expected, last_valid, "blank line in log"));
        }
        let is_last = i + 1 == lines.len();
        let record: EventRecord = serde_json::from_str(line).map_err(|e| {
            let reason = if is_last && !ends_with_newline {
                format!("truncated final record: {e}")
            } else {
                format!("unreadable record: {e}")
            };
            corrupt(expected, last_valid, reason)
        })?;
        if record.sequence_no != expected {
            return Err(corrupt(
                expected,
                last_valid,
                format!("found sequence_no {} where {expected} was expected", record.sequence_no),
            ));
        }
        if is_last && !ends_with_newline {
            return Err(corrupt(expected, last_valid, "truncated final record: missing newline"));
        }
        let event = record
            .event()
            .map_err(|e| corrupt(expected, last_valid, format!("payload does not decode: {e}")))?;
        last_valid = record.sequence_no;
        out.push((record, event));
    }
    Ok(out)
}

/// Fold parsed events onto `state`, skipping those at or below its sequence_no.
pub fn replay(state: &mut State, records: &[(EventRecord, Event)]) -> Result<()> {
    for (record, event) in records {
        if record.sequence_no <= state.last_sequence_no {
            continue;
        }
        state
            .apply(event)
            .map_err(|reason| corrupt(record.sequence_no, state.last_sequence_no, reason))?;
        state.last_sequence_no = record.sequence_no;
    }
    Ok(())
}

pub fn replay_bytes(bytes: &[u8]) -> Result<State> {
    let mut state = State::default();
    replay(&mut state, &parse_log(bytes)?)?;
    Ok(state)
}

/// Append-only event sink. Without a file it keeps records in memory.
pub struct EventLog {
    next_seq: u64,
    sink: Sink,
}

enum Sink {
    Memory(Vec<EventRecord>),
    File { path: PathBuf, writer: BufWriter<File> },
}

impl EventLog {
    pub fn in_memory() -> Self {
        EventLog {
            next_seq: 1,
            sink: Sink::Memory(Vec::new()),
        }
    }

    /// Open for appending after `last_sequence_no` records.
    pub fn open_append(path: &Path, last_sequence_no: u64) -> Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(EventLog {
            next_seq: last_sequence_no + 1,
            sink: Sink::File {
                path: path.to_owned(),
                writer: BufWriter::new(file),
            },
        })
    }

    pub fn next_sequence_no(&self) -> u64 {
        self.next_seq
    }

    pub fn path(&self) -> Option<&Path> {
        match &self.sink {
            Sink::File { path, .. } => Some(path),
            Sink::Memory(_) => None,
        }
    }

    /// Records held in memory (empty for file-backed logs).
    pub fn memory_records(&self) -> &[EventRecord] {
        match &self.sink {
            Sink::Memory(records) => records,
            Sink::File { .. } => &[],
        }
    }

    /// Durably append one event; the record is on disk when this returns.
    pub fn append(&mut self, event: &Event, at: Timestamp) -> Result<EventRecord> {
        let record = EventRecord::new(self.next_seq, event, at)?;
        match &mut self.sink {
            Sink::Memory(records) => records.push(record.clone()),
            Sink::File { writer, .. } => {
                let mut line = serde_json::to_vec(&record)?;
                line.push(b'\n');
                writer.write_all(&line)?;
                writer.flush()?;
                writer.get_ref().sync_data()?;
            }
        }
        self.next_seq += 1;
        Ok(record)
    }
}

#[derive(Serialize, Deserialize)]
struct SnapshotDoc {
    sequence_no: u64,
    state_hash: String,
    state: State,
}

pub fn write_snapshot(dir: &Path, state: &State) -> Result<PathBuf> {
    let doc = SnapshotDoc {
        sequence_no: state.last_sequence_no,
        state_hash: state.hash(),
        state: state.clone(),
    };
    let final_path = dir.join(SNAPSHOT_FILE);
    let tmp_path = dir.join(format!("{SNAPSHOT_FILE}.tmp"));
    {
        let mut writer = BufWriter::new(File::create(&tmp_path)?);
        serde_json::to_writer(&mut writer, &doc)?;
        writer.flush()?;
        writer.get_ref().sync_all()?;
    }
    fs::rename(&tmp_path, &final_path)?;
    Ok(final_path)
}

/// `Ok(None)` when no snapshot exists.
pub fn read_snapshot(dir: &Path) -> Result<Option<State>> {
    let path = dir.join(SNAPSHOT_FILE);
    let text = match fs::read_to_string(&path) {
        Ok(text) => text,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let doc: SnapshotDoc = serde_json::from_str(&text)
        .map_err(|e| Error::Internal(format!("snapshot {} is unreadable: {e}", path.display())))?;
    if doc.state.last_sequence_no != doc.sequence_no || doc.state.hash() != doc.state_hash {
        return Err(Error::Internal(format!("snapshot {} fails its integrity check", path.display())));
    }
    Ok(Some(doc.state))
}

/// Rebuild state from `dir`: snapshot (if present) plus the log tail.
pub fn restore(dir: &Path) -> Result<State> {
    let log_path = dir.join(LOG_FILE);
    let bytes = match fs::read(&log_path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let records = parse_log(&bytes)?;
    let last_logged = records.last().map_or(0, |(r, _)| r.sequence_no);
    let mut state = match read_snapshot(dir)? {
        Some(snap) if snap.last_sequence_no > last_logged => {
            return Err(Error::Internal(format!(
                "snapshot is at sequence_no {} but the log ends at {last_logged}",
                snap.last_sequence_no
            )))
        }
        Some(snap) => snap,
        None => State::default(),
    };
    replay(&mut state, &records)?;
    Ok(state)
}
