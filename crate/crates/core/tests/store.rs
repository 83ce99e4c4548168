mod common;

use std::fs;
use std::sync::Arc;

use common::ops::random_session;
use common::{clock, workspace};
use crowdsense::store::{self, replay_bytes, EventRecord, LOG_FILE};
use crowdsense::{Error, IdGen, Workspace};

fn jsonl(records: &[EventRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        out.extend(serde_json::to_vec(r).unwrap());
        out.push(b'\n');
    }
    out
}

fn boundaries(bytes: &[u8]) -> Vec<usize> {
    std::iter::once(0)
        .chain(bytes.iter().enumerate().filter(|(_, b)| **b == b'\n').map(|(i, _)| i + 1))
        .collect()
}

#[test]
fn reopen_restores_identical_state() {
    let dir = tempfile::tempdir().unwrap();
    let hash = {
        let mut ws = Workspace::open_with(dir.path(), clock(), IdGen::seeded(1)).unwrap();
        random_session(&mut ws, 77, 60);
        ws.state_hash()
    };
    let ws = Workspace::open(dir.path()).unwrap();
    assert_eq!(ws.state_hash(), hash);
    assert!(ws.state().check_invariants().is_empty());
}

#[test]
fn snapshot_then_more_events_then_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let hash = {
        let mut ws = Workspace::open_with(dir.path(), clock(), IdGen::seeded(2)).unwrap();
        random_session(&mut ws, 5, 40);
        ws.snapshot().unwrap();
        random_session(&mut ws, 6, 40);
        ws.state_hash()
    };
    let reopened = Workspace::open(dir.path()).unwrap();
    assert_eq!(reopened.state_hash(), hash);
    let full = replay_bytes(&fs::read(dir.path().join(LOG_FILE)).unwrap()).unwrap();
    assert_eq!(full.hash(), hash);
}

#[test]
fn every_record_boundary_replays_cleanly() {
    let mut kinds = std::collections::BTreeSet::new();
    for seed in 0..20 {
        let (mut ws, _) = workspace(seed);
        random_session(&mut ws, seed, 40);
        kinds.extend(ws.memory_log().iter().map(|r| r.kind.clone()));
        let bytes = jsonl(ws.memory_log());
        let cuts = boundaries(&bytes);
        for (k, cut) in cuts.iter().enumerate() {
            let state = replay_bytes(&bytes[..*cut]).unwrap();
            assert_eq!(state.last_sequence_no, k as u64);
            let violations = state.check_invariants();
            assert!(violations.is_empty(), "seed {seed} prefix {k}: {violations:?}");
        }
        assert_eq!(replay_bytes(&bytes).unwrap().hash(), ws.state_hash());
    }
    // the sessions reach every command kind except failure-only ones
    assert!(kinds.len() >= 12, "{kinds:?}");
}

#[test]
fn torn_write_names_the_last_valid_record() {
    let (mut ws, _) = workspace(3);
    random_session(&mut ws, 3, 30);
    let bytes = jsonl(ws.memory_log());
    let cuts = boundaries(&bytes);
    assert!(cuts.len() > 3);
    for k in 1..cuts.len() - 1 {
        let torn = &bytes[..cuts[k] + (cuts[k + 1] - cuts[k]) / 2];
        match replay_bytes(torn) {
            Err(Error::CorruptLog {
                sequence_no,
                last_valid,
                ..
            }) => assert_eq!((sequence_no, last_valid), (k as u64 + 1, k as u64)),
            other => panic!("expected corrupt log, got {other:?}"),
        }
    }
}

#[test]
fn corrupt_log_refuses_to_open() {
    let dir = tempfile::tempdir().unwrap();
    {
        let mut ws = Workspace::open_with(dir.path(), clock(), IdGen::seeded(4)).unwrap();
        random_session(&mut ws, 4, 20);
    }
    let path = dir.path().join(LOG_FILE);
    let mut bytes = fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 3);
    fs::write(&path, bytes).unwrap();
    assert!(matches!(Workspace::open(dir.path()), Err(Error::CorruptLog { .. })));
}

#[test]
fn snapshot_needs_a_data_dir() {
    let ws = Workspace::in_memory_with(Arc::new(crowdsense::SystemClock), IdGen::new());
    assert!(ws.snapshot().is_err());
    assert!(store::read_snapshot(tempfile::tempdir().unwrap().path()).unwrap().is_none());
}

#[test]
fn log_lines_have_the_documented_shape() {
    let (mut ws, _) = workspace(1);
    ws.add_manual_issue(Some("w1"), "late payment").unwrap();
    let line: serde_json::Value = serde_json::from_slice(&jsonl(ws.memory_log())).unwrap();
    let keys: Vec<_> = line.as_object().unwrap().keys().cloned().collect();
    assert_eq!(keys, ["sequence_no", "kind", "payload", "recorded_at"]);
    assert_eq!(line["kind"], "manual_issue_added");
    assert_eq!(line["sequence_no"], 1);
}
