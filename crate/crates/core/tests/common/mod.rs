#![allow(dead_code)]

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::sync::Arc;

use crowdsense::ingestion::read_dump;
use crowdsense::pipeline::RecordedProvider;
use crowdsense::{IdGen, ManualClock, Workspace};
use serde_json::Value;

pub const APPENDIX_CATEGORIES: [&str; 5] = ["Platform Policy", "Usability", "Payment", "Poor Customer Support", "Scam"];

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn load_dump(rel: &str) -> Vec<Value> {
    read_dump(BufReader::new(File::open(fixture(rel)).unwrap())).unwrap()
}

pub fn appendix_provider() -> RecordedProvider {
    RecordedProvider::from_path(&fixture("appendix/responses.json")).unwrap()
}

pub fn clock() -> Arc<ManualClock> {
    Arc::new(ManualClock::at_millis(1_700_000_000_000))
}

pub fn workspace(seed: u64) -> (Workspace, Arc<ManualClock>) {
    let clock = clock();
    (Workspace::in_memory_with(clock.clone(), IdGen::seeded(seed)), clock)
}

pub fn post(body: &str) -> Value {
    serde_json::json!({ "body": body })
}

const FRAGMENTS: &[&str] = &[
    "the platform fee ate half my earnings",
    "my withdraw request has been pending for days",
    "a client tried to scam me with a fake check",
    "this looks like fraud and nobody cares",
    "the app keeps crashing on startup",
    "login fails with a vague error",
    "found a bug in the proposal editor",
    "support never answers my ticket",
    "the new connects policy is unfair",
    "I just wanted to say hello to everyone",
    "had a great week with two new clients",
];

/// Deterministic synthetic complaint bodies drawn from a fixed phrase pool.
pub fn synthetic_bodies(n: usize, seed: u64) -> Vec<String> {
    let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|i| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let phrase = FRAGMENTS[(x >> 33) as usize % FRAGMENTS.len()];
            format!("#{i}: {phrase}")
        })
        .collect()
}

/// Workspace holding `bodies` as one subreddit ingest.
pub fn workspace_with(bodies: &[String], seed: u64) -> (Workspace, Arc<ManualClock>) {
    let (mut ws, clock) = workspace(seed);
    let records: Vec<Value> = bodies.iter().map(|b| post(b)).collect();
    let report = ws.ingest_subreddit_posts("Freelancers", &records).unwrap();
    assert_eq!(report.accepted, bodies.len());
    (ws, clock)
}

pub fn appendix_workspace() -> Workspace {
    let (mut ws, _) = workspace(11);
    let records = load_dump("appendix/complaints.jsonl");
    ws.ingest_subreddit_posts("Freelancers", &records).unwrap();
    ws
}

pub mod ops {
    use crowdsense::pipeline::{MockProvider, PipelineConfig, RetryPolicy};
    use crowdsense::{CategoryId, SolutionId, Workspace};
    use rand::rngs::StdRng;
    use rand::seq::IndexedRandom;
    use rand::{Rng, SeedableRng};
    use serde_json::json;

    const VOTERS: &[&str] = &["ana", "bo", "chen", "dee", "eli"];
    const WORDS: &[&str] = &[
        "fee", "withdraw", "scam", "crash", "login", "support", "policy", "connects", "late", "client", "great",
    ];

    fn sentence(rng: &mut StdRng) -> String {
        (0..rng.random_range(2..7))
            .map(|_| *WORDS.choose(rng).unwrap())
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn category(ws: &Workspace, rng: &mut StdRng) -> Option<CategoryId> {
        let ids: Vec<_> = ws.state().categories.keys().cloned().collect();
        ids.choose(rng).cloned()
    }

    fn solution(ws: &Workspace, rng: &mut StdRng) -> Option<(CategoryId, SolutionId)> {
        let ids: Vec<_> = ws
            .state()
            .solutions
            .values()
            .map(|s| (s.category_id.clone(), s.id.clone()))
            .collect();
        ids.choose(rng).cloned()
    }

    /// Apply `n` random commands; rejected commands are expected and ignored.
    pub fn random_session(ws: &mut Workspace, seed: u64, n: usize) {
        let mut rng = StdRng::seed_from_u64(seed);
        let cfg = PipelineConfig {
            chunk_budget: 7,
            parallelism: 2,
            retry: RetryPolicy::immediate(1),
        };
        for _ in 0..n {
            let _ = match rng.random_range(0..13u8) {
                0 => {
                    let posts: Vec<_> = (0..rng.random_range(1..6))
                        .map(|_| json!({"external_id": format!("p{}", rng.random_range(0..40)), "body": sentence(&mut rng)}))
                        .collect();
                    ws.ingest_subreddit_posts("Freelancers", &posts).map(drop)
                }
                1 => {
                    let reviews: Vec<_> = (0..rng.random_range(1..6))
                        .map(|_| json!({"rating": rng.random_range(0..7), "body": sentence(&mut rng)}))
                        .collect();
                    ws.ingest_app_reviews("Upwork", &reviews).map(drop)
                }
                2 => ws.add_manual_issue(Some("w"), &sentence(&mut rng)).map(drop),
                3 => ws.run_pipeline(&MockProvider, &cfg).map(drop),
                4 => match category(ws, &mut rng) {
                    Some(c) => ws.upvote_problem(&c, VOTERS.choose(&mut rng).unwrap()).map(drop),
                    None => Ok(()),
                },
                5 => match category(ws, &mut rng) {
                    Some(c) => ws.post_chat_message(&c, VOTERS.choose(&mut rng).unwrap(), &sentence(&mut rng)).map(drop),
                    None => Ok(()),
                },
                6 => match category(ws, &mut rng) {
                    Some(c) => {
                        let version = ws.document(&c).unwrap().version;
                        let base = if rng.random_bool(0.8) { version } else { version + 1 };
                        let body = if rng.random_bool(0.3) { String::new() } else { sentence(&mut rng) };
                        ws.edit_document(&c, base, &body).map(drop)
                    }
                    None => Ok(()),
                },
                7 => match category(ws, &mut rng) {
                    Some(c) => {
                        let len = ws.document(&c).unwrap().char_len();
                        let start = rng.random_range(0..=len);
                        let end = rng.random_range(start..=len + 1);
                        ws.annotate_document(&c, "ana", (start, end), "see this").map(drop)
                    }
                    None => Ok(()),
                },
                8 => match category(ws, &mut rng) {
                    Some(c) => ws.propose_solution(&c, VOTERS.choose(&mut rng).unwrap(), &sentence(&mut rng)).map(drop),
                    None => Ok(()),
                },
                9 => match solution(ws, &mut rng) {
                    Some((c, s)) => ws.vote_solution(&c, &s, VOTERS.choose(&mut rng).unwrap()).map(drop),
                    None => Ok(()),
                },
                10 => match solution(ws, &mut rng) {
                    Some((c, s)) => ws
                        .finalize_solution(&c, &s, &["ana".to_string()], rng.random_bool(0.5))
                        .map(drop),
                    None => Ok(()),
                },
                11 => ws.start_task("s1", rng.random_range(0..8)).map(drop),
                _ => ws.stop_task("s1", rng.random_range(0..8)).map(drop),
            };
        }
    }
}
