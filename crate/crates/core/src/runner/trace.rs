//! Trace files: a human-readable text form and line-delimited JSON records.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{RunTrace, StepRecord, StopReason};

/// One line of a records-format trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceLine {
    Step(StepRecord),
    Stop(StopReason),
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    let parts: Vec<String> = items.iter().map(ToString::to_string).collect();
    format!("{{{}}}", parts.join(", "))
}

pub fn record_to_text(rec: &StepRecord) -> String {
    let mut tags = Vec::new();
    if let Some(a) = &rec.agent {
        tags.push(format!("agent {a}"));
    }
    if let Some(c) = rec.choice {
        tags.push(format!("choice {}/{}", c.index, c.of));
    }
    if rec.bottom {
        tags.push("bottom".to_string());
    } else if !rec.conflicts.is_empty() {
        tags.push("inconsistent".to_string());
    }
    let mut out = format!("step {}", rec.step);
    if !tags.is_empty() {
        let _ = write!(out, " [{}]", tags.join(", "));
    }
    let _ = writeln!(out, ": {}", join(&rec.updates));
    if !rec.mirrors.is_empty() {
        let _ = writeln!(out, "  mirrors: {}", join(&rec.mirrors));
    }
    for c in &rec.conflicts {
        let _ = writeln!(out, "  conflict: {c}");
    }
    for (l, v) in &rec.oracle {
        let _ = writeln!(out, "  oracle: {l} = {v}");
    }
    out
}

fn stop_to_text(stop: &StopReason) -> String {
    match stop {
        StopReason::Fixpoint { step } => format!("fixpoint at step {step}"),
        StopReason::StepLimit { steps } => format!("step limit {steps}"),
        StopReason::Aborted { step, error } => format!("aborted at step {step}: {error}"),
    }
}

/// Text form: one block per step, the stop reason, then the final state.
pub fn trace_to_text(trace: &RunTrace) -> String {
    let mut out = String::new();
    for rec in &trace.records {
        out.push_str(&record_to_text(rec));
    }
    let _ = writeln!(out, "stop: {}", stop_to_text(&trace.stop));
    out.push_str("final:\n");
    for line in trace.final_state().to_text().lines() {
        let _ = writeln!(out, "  {line}");
    }
    out
}

/// Records form: one JSON object per line.
pub fn trace_to_records(trace: &RunTrace) -> String {
    let mut out = String::new();
    let lines = trace
        .records
        .iter()
        .cloned()
        .map(TraceLine::Step)
        .chain(std::iter::once(TraceLine::Stop(trace.stop.clone())));
    for line in lines {
        out.push_str(&serde_json::to_string(&line).expect("trace records serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_records(text: &str) -> Result<Vec<TraceLine>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
