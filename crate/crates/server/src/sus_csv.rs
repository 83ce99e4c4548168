//! `sus score`: one composite score and rating per CSV row.

use std::io::Read;

use anyhow::{bail, Context};
use crowdsense::eval::{sus_adjectival, sus_composite, Adjectival};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRow {
    pub label: String,
    pub score: f64,
    pub rating: Adjectival,
}

/// Rows hold 10 answers, optionally preceded by a session id column. A
/// first row that is not numeric is treated as a header.
pub fn score_csv(input: impl Read) -> anyhow::Result<Vec<ScoredRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("row {}", i + 1))?;
        let fields: Vec<&str> = record.iter().filter(|f| !f.is_empty()).collect();
        if fields.is_empty() {
            continue;
        }
        let (label, answers) = match fields.len() {
            10 => (format!("row {}", i + 1), &fields[..]),
            11 => (fields[0].to_owned(), &fields[1..]),
            n => bail!("row {}: expected 10 answers (optionally after a session id), got {n} fields", i + 1),
        };
        let parsed: Result<Vec<u8>, _> = answers.iter().map(|a| a.parse::<u8>()).collect();
        let answers = match parsed {
            Ok(a) => a,
            Err(_) if i == 0 => continue,
            Err(e) => bail!("row {}: {e}", i + 1),
        };
        let score = sus_composite(&answers).with_context(|| format!("row {}", i + 1))?;
        out.push(ScoredRow {
            label,
            score,
            rating: sus_adjectival(score)?,
        });
    }
    Ok(out)
}
