mod common;

use std::time::Duration;

use common::workspace;
use crowdsense::eval::{sus_adjectival, sus_composite, Adjectival, SusResponse};
use crowdsense::Error;

#[test]
fn task_timing_roundtrip() {
    let (mut ws, clock) = workspace(1);
    let started = ws.start_task("p01", 2).unwrap();
    assert!(started.stopped_at.is_none());
    clock.advance(Duration::from_millis(83_500));
    let stopped = ws.stop_task("p01", 2).unwrap();
    assert_eq!(stopped.duration_seconds(), Some(83.5));
}

#[test]
fn task_timing_errors() {
    let (mut ws, _) = workspace(1);
    assert!(matches!(ws.stop_task("p01", 1), Err(Error::InvalidRequest(_))));
    assert!(matches!(ws.start_task("p01", 7), Err(Error::InvalidRequest(_))));
    assert!(matches!(ws.start_task("p01", 0), Err(Error::InvalidRequest(_))));
    ws.start_task("p01", 1).unwrap();
    assert!(matches!(ws.start_task("p01", 1), Err(Error::Conflict { .. })));
    ws.stop_task("p01", 1).unwrap();
    assert!(matches!(ws.stop_task("p01", 1), Err(Error::Conflict { .. })));
    // other sessions are independent
    ws.start_task("p02", 1).unwrap();
}

#[test]
fn sus_values() {
    assert_eq!(sus_composite(&[3; 10]).unwrap(), 50.0);
    assert_eq!(sus_adjectival(86.0).unwrap(), Adjectival::Excellent);
    assert_eq!(sus_adjectival(14.0).unwrap(), Adjectival::Poor);
    assert_eq!(sus_adjectival(68.0).unwrap(), Adjectival::Okay);
    let r = SusResponse::new("p01", &[4, 2, 4, 2, 4, 2, 4, 2, 4, 2]).unwrap();
    assert_eq!(r.score(), 75.0);
    assert!(SusResponse::new("p01", &[4, 2]).is_err());
}
