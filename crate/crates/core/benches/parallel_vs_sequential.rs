use std::hint::black_box;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use crowdsense::ingestion::{screen_batch, screen_record, SourceKind};
use crowdsense::par;
use crowdsense::pipeline::{LlmProvider, MockProvider, Pipeline, PipelineConfig, ProviderError, RetryPolicy};
use crowdsense::{IdGen, ManualClock, Workspace};
use serde_json::{json, Value};

/// Mock answers behind a fixed network-like delay.
struct SlowMock(Duration);

impl LlmProvider for SlowMock {
    fn id(&self) -> String {
        "slow-mock".into()
    }

    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        thread::sleep(self.0);
        MockProvider.complete(prompt)
    }
}

const PHRASES: &[&str] = &[
    "the fee on every withdraw is brutal",
    "client was a scam and vanished",
    "app crash when I open messages",
    "support ignored my ticket for weeks",
    "new connects policy hurts beginners",
    "just saying hi",
];

fn reviews(n: usize) -> Vec<Value> {
    (0..n)
        .map(|i| {
            json!({
                "external_id": format!("r{i}"),
                "rating": i % 5 + 1,
                "body": format!("  {} (#{i})  ", PHRASES[i % PHRASES.len()]),
                "created_at": "2024-03-01T10:00:00Z",
            })
        })
        .collect()
}

fn screening(c: &mut Criterion) {
    let records = reviews(20_000);
    let mut group = c.benchmark_group("screen_reviews");
    group.throughput(Throughput::Elements(records.len() as u64));
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(screen_batch(SourceKind::AppStoreReview, &records)))
    });
    group.bench_function("sequential", |b| {
        let indexed: Vec<(usize, &Value)> = records.iter().enumerate().collect();
        b.iter(|| {
            black_box(par::map_sequential(&indexed, |(i, r)| {
                screen_record(SourceKind::AppStoreReview, *i, r)
            }))
        })
    });
    group.finish();
}

fn pipeline(c: &mut Criterion) {
    let mut ws = Workspace::in_memory_with(Arc::new(ManualClock::at_millis(0)), IdGen::seeded(1));
    let posts: Vec<Value> = (0..300)
        .map(|i| json!({ "body": format!("{} #{i}", PHRASES[i % PHRASES.len()]) }))
        .collect();
    ws.ingest_subreddit_posts("bench", &posts).unwrap();
    let corpus = ws.corpus();
    let clock = ManualClock::at_millis(0);
    let provider = SlowMock(Duration::from_millis(2));

    let mut group = c.benchmark_group("pipeline_run");
    group.sample_size(10);
    for parallelism in [1usize, 4, 8] {
        let cfg = PipelineConfig {
            chunk_budget: 20,
            parallelism,
            retry: RetryPolicy::immediate(1),
        };
        group.bench_with_input(BenchmarkId::from_parameter(parallelism), &cfg, |b, cfg| {
            let pipeline = Pipeline::new(&provider, cfg);
            b.iter(|| black_box(pipeline.run("bench".into(), &corpus, &clock).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, screening, pipeline);
criterion_main!(benches);
