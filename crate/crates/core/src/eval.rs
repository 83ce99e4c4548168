//! Task timing and System Usability Scale scoring.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::error::{Error, Result};
use crate::state::{Event, State};

pub const TASK_INDEX_RANGE: std::ops::RangeInclusive<u8> = 1..=6;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskTiming {
    pub session_id: String,
    pub task_index: u8,
    pub started_at: Timestamp,
    pub stopped_at: Option<Timestamp>,
}

impl TaskTiming {
    pub fn duration_seconds(&self) -> Option<f64> {
        self.stopped_at.map(|stop| stop.seconds_since(self.started_at))
    }
}

fn check_task(session_id: &str, task_index: u8) -> Result<String> {
    let session = session_id.trim();
    if session.is_empty() {
        return Err(Error::invalid("session id must not be empty"));
    }
    if !TASK_INDEX_RANGE.contains(&task_index) {
        return Err(Error::invalid(format!("task index {task_index} is outside 1..6")));
    }
    Ok(session.to_owned())
}

pub fn start_task(state: &State, session_id: &str, task_index: u8, now: Timestamp) -> Result<Event> {
    let session_id = check_task(session_id, task_index)?;
    if state.timing(&session_id, task_index).is_some() {
        return Err(Error::conflict(format!("task {task_index} of session {session_id} was already started")));
    }
    Ok(Event::TaskStarted {
        session_id,
        task_index,
        at: now,
    })
}

pub fn stop_task(state: &State, session_id: &str, task_index: u8, now: Timestamp) -> Result<Event> {
    let session_id = check_task(session_id, task_index)?;
    let timing = state
        .timing(&session_id, task_index)
        .ok_or_else(|| Error::invalid(format!("task {task_index} of session {session_id} was never started")))?;
    if timing.stopped_at.is_some() {
        return Err(Error::conflict(format!("task {task_index} of session {session_id} was already stopped")));
    }
    Ok(Event::TaskStopped {
        session_id,
        task_index,
        // never before the start, even if the wall clock stepped back
        at: now.max(timing.started_at),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SusResponse {
    pub session_id: String,
    pub answers: [u8; 10],
}

impl SusResponse {
    pub fn new(session_id: impl Into<String>, answers: &[u8]) -> Result<Self> {
        Ok(SusResponse {
            session_id: session_id.into(),
            answers: validate_answers(answers)?,
        })
    }

    pub fn score(&self) -> f64 {
        composite(&self.answers)
    }
}

fn validate_answers(answers: &[u8]) -> Result<[u8; 10]> {
    let answers: [u8; 10] = answers
        .try_into()
        .map_err(|_| Error::invalid(format!("SUS needs exactly 10 answers, got {}", answers.len())))?;
    if let Some((i, a)) = answers.iter().enumerate().find(|(_, a)| !(1..=5).contains(*a)) {
        return Err(Error::invalid(format!("answer {} is {a}, expected 1..5", i + 1)));
    }
    Ok(answers)
}

fn composite(answers: &[u8; 10]) -> f64 {
    // items are 1-based: odd items are positively worded, even items negatively
    let raw: u32 = answers
        .iter()
        .enumerate()
        .map(|(i, &a)| if i % 2 == 0 { u32::from(a) - 1 } else { 5 - u32::from(a) })
        .sum();
    f64::from(raw) * 2.5
}

/// Composite SUS score in `[0, 100]`.
pub fn sus_composite(answers: &[u8]) -> Result<f64> {
    Ok(composite(&validate_answers(answers)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Adjectival {
    Excellent,
    Good,
    Okay,
    Awful,
    Poor,
}

impl fmt::Display for Adjectival {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Adjectival::Excellent => "Excellent",
            Adjectival::Good => "Good",
            Adjectival::Okay => "Okay",
            Adjectival::Awful => "Awful",
            Adjectival::Poor => "Poor",
        };
        f.write_str(s)
    }
}

/// Bands: >80.3 Excellent, (68, 80.3] Good, exactly 68 Okay, [51, 68) Awful,
/// <51 Poor.
pub fn sus_adjectival(score: f64) -> Result<Adjectival> {
    if !(0.0..=100.0).contains(&score) {
        return Err(Error::invalid(format!("SUS score {score} is outside 0..100")));
    }
    Ok(if score > 80.3 {
        Adjectival::Excellent
    } else if score > 68.0 {
        Adjectival::Good
    } else if score == 68.0 {
        Adjectival::Okay
    } else if score >= 51.0 {
        Adjectival::Awful
    } else {
        Adjectival::Poor
    })
}
