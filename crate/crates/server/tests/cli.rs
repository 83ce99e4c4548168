use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn crowdsense(data_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crowdsense"))
        .arg("--data-dir")
        .arg(data_dir)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn ingest_run_snapshot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let dump = fixtures().join("freelancers_posts.jsonl");
    let args = ["ingest", "--source-kind", "subreddit", "--source-name", "Freelancers", "--file", dump.to_str().unwrap()];
    let report = stdout_json(&crowdsense(dir.path(), &args));
    assert_eq!(report["accepted"], 10);
    // Re-ingesting the same dump is deduplicated.
    let again = stdout_json(&crowdsense(dir.path(), &args));
    assert_eq!(again["accepted"], 0);

    let run = stdout_json(&crowdsense(dir.path(), &["pipeline", "run", "--provider", "mock"]));
    assert_eq!(run["run"]["status"], "succeeded");
    assert!(run["request_count"].as_u64().unwrap() >= 2);
    assert!(!run["problems"]["bars"].as_array().unwrap().is_empty());

    let snap = crowdsense(dir.path(), &["snapshot"]);
    assert!(snap.status.success());
    let path = String::from_utf8(snap.stdout).unwrap();
    assert!(Path::new(path.trim()).exists());
}

#[test]
fn app_review_dump_applies_star_filter() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("reviews.jsonl");
    fs::write(
        &dump,
        "{\"rating\":1,\"body\":\"bad\"}\n{\"rating\":5,\"body\":\"great\"}\n{\"rating\":3,\"body\":\"meh\"}\n",
    )
    .unwrap();
    let data = dir.path().join("data");
    let out = crowdsense(
        &data,
        &["ingest", "--source-kind", "app-store-review", "--source-name", "Upwork", "--file", dump.to_str().unwrap()],
    );
    let report = stdout_json(&out);
    assert_eq!((report["accepted"].as_u64(), report["filtered"].as_u64()), (Some(2), Some(1)));
}

#[test]
fn corrupt_log_fails_with_sequence_number() {
    let dir = tempfile::tempdir().unwrap();
    let dump = fixtures().join("freelancers_posts.jsonl");
    let ingest = ["ingest", "--source-kind", "subreddit", "--source-name", "F", "--file", dump.to_str().unwrap()];
    stdout_json(&crowdsense(dir.path(), &ingest));
    stdout_json(&crowdsense(dir.path(), &["pipeline", "run", "--provider", "mock"]));

    let log = dir.path().join("events.jsonl");
    let mut text = fs::read_to_string(&log).unwrap();
    text.push_str("{\"sequence_no\": 3, \"kind\": \"Bogus\"}\n");
    fs::write(&log, text).unwrap();

    let out = crowdsense(dir.path(), &["snapshot"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("sequence_no 3"), "{stderr}");
}

#[test]
fn sus_score_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sus.csv");
    fs::write(&csv, "session,q1,q2,q3,q4,q5,q6,q7,q8,q9,q10\np1,5,1,5,1,5,1,5,1,5,1\np2,3,3,3,3,3,3,3,3,3,3\n").unwrap();
    let out = crowdsense(dir.path(), &["sus", "score", "--file", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines, ["p1\t100.0\tExcellent", "p2\t50.0\tPoor"]);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = crowdsense(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}
