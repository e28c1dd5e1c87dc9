//! Run certificates: a finite partially ordered run in a line-based text form.
//!
//! ```text
//! initial ring3.east          # optional reference to the initial state file
//! move x1 agent 0             # move id and the agent that makes it
//! move x2 agent 1
//! edge x1 x2                  # covering pair: x1 < x2
//! updates x2: Fork(1) := up; Mode(1) := eat
//! mirrors x2: g(@0) := k      # static-table writes of a duplication
//! sigma {}                    # state after the initial segment {}
//!   Mode(0) = think
//! end
//! sigma x1,x2                 # state after the segment {x1, x2}
//!   ...
//! end
//! ```
//!
//! `updates` lines record the update set a nondeterministic move fired.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::state::{parse_fact, parse_state, Element, LoadOptions, State, Update, UpdateSet};
use crate::vocabulary::Vocabulary;

pub type MoveId = String;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("certificate line {line}: {message}")]
pub struct CertError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PartialRun {
    /// Move ids in declaration order.
    pub moves: Vec<MoveId>,
    pub agent: BTreeMap<MoveId, Element>,
    /// Covering pairs `(x, y)` meaning `x < y`.
    pub edges: BTreeSet<(MoveId, MoveId)>,
    pub recorded: BTreeMap<MoveId, UpdateSet>,
    pub sigma: BTreeMap<BTreeSet<MoveId>, State>,
    pub initial_ref: Option<String>,
}

impl PartialRun {
    pub fn add_move(&mut self, id: &str, agent: Element) {
        self.moves.push(id.to_string());
        self.agent.insert(id.to_string(), agent);
    }

    pub fn add_edge(&mut self, x: &str, y: &str) {
        self.edges.insert((x.to_string(), y.to_string()));
    }
}

fn segment_key(ids: &BTreeSet<MoveId>) -> String {
    if ids.is_empty() {
        "{}".to_string()
    } else {
        ids.iter().cloned().collect::<Vec<_>>().join(",")
    }
}

fn updates_line(kind: &str, id: &str, us: &[&Update]) -> String {
    let parts: Vec<String> = us.iter().map(|u| u.to_string()).collect();
    format!("{kind} {id}: {}\n", parts.join("; "))
}

pub fn certificate_to_text(pr: &PartialRun) -> String {
    let mut out = String::new();
    if let Some(r) = &pr.initial_ref {
        let _ = writeln!(out, "initial {r}");
    }
    for m in &pr.moves {
        let _ = writeln!(out, "move {m} agent {}", pr.agent[m]);
    }
    for (x, y) in &pr.edges {
        let _ = writeln!(out, "edge {x} {y}");
    }
    for m in &pr.moves {
        if let Some(s) = pr.recorded.get(m) {
            out.push_str(&updates_line("updates", m, &s.iter().collect::<Vec<_>>()));
            let mirrors: Vec<_> = s.mirrors().collect();
            if !mirrors.is_empty() {
                out.push_str(&updates_line("mirrors", m, &mirrors));
            }
        }
    }
    let mut keys: Vec<_> = pr.sigma.keys().collect();
    keys.sort_by_key(|k| (k.len(), (*k).clone()));
    for k in keys {
        let _ = writeln!(out, "sigma {}", segment_key(k));
        for line in pr.sigma[k].to_text().lines() {
            let _ = writeln!(out, "  {line}");
        }
        out.push_str("end\n");
    }
    out
}

fn parse_updates(text: &str, line: usize) -> Result<Vec<Update>, CertError> {
    let opts = LoadOptions {
        allow_reserve_literals: true,
    };
    text.split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (l, r) = p.split_once(":=").ok_or_else(|| CertError {
                line,
                message: format!("expected `location := value`, found `{p}`"),
            })?;
            let (loc, value) = parse_fact(&format!("{} = {}", l.trim(), r.trim()), line, opts)
                .map_err(|e| CertError {
                    line,
                    message: e.message,
                })?;
            Ok(Update::new(loc, value))
        })
        .collect()
}

/// Parses a certificate whose states are over `vocab`.
pub fn parse_certificate(text: &str, vocab: Arc<Vocabulary>) -> Result<PartialRun, CertError> {
    let mut pr = PartialRun::default();
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    while i < lines.len() {
        let line = i + 1;
        let body = lines[i].split('#').next().unwrap_or("").trim();
        i += 1;
        if body.is_empty() {
            continue;
        }
        let err = |message: String| CertError { line, message };
        let known = |pr: &PartialRun, id: &str| {
            if pr.agent.contains_key(id) {
                Ok(())
            } else {
                Err(err(format!("unknown move `{id}`")))
            }
        };
        let words: Vec<&str> = body.split_whitespace().collect();
        match words[0] {
            "initial" => {
                let [_, path] = words.as_slice() else {
                    return Err(err("expected `initial <path>`".into()));
                };
                pr.initial_ref = Some(path.to_string());
            }
            "move" => {
                let [_, id, "agent", a] = words.as_slice() else {
                    return Err(err("expected `move <id> agent <element>`".into()));
                };
                if pr.agent.contains_key(*id) {
                    return Err(err(format!("duplicate move `{id}`")));
                }
                let e = Element::parse_literal(a)
                    .ok_or_else(|| err(format!("`{a}` is not an element literal")))?;
                pr.add_move(id, e);
            }
            "edge" => {
                let [_, x, y] = words.as_slice() else {
                    return Err(err("expected `edge <id> <id>`".into()));
                };
                known(&pr, x)?;
                known(&pr, y)?;
                pr.add_edge(x, y);
            }
            "updates" | "mirrors" => {
                let rest = body[words[0].len()..].trim();
                let (id, list) = rest
                    .split_once(':')
                    .ok_or_else(|| err(format!("expected `{} <id>: ...`", words[0])))?;
                let id = id.trim();
                known(&pr, id)?;
                let us = parse_updates(list, line)?;
                let set = pr.recorded.entry(id.to_string()).or_default();
                for u in us {
                    if words[0] == "updates" {
                        set.insert(u);
                    } else {
                        set.insert_mirror(u);
                    }
                }
            }
            "sigma" => {
                let key = body["sigma".len()..].trim();
                let mut ids = BTreeSet::new();
                if key != "{}" {
                    for id in key.split(',').map(str::trim) {
                        known(&pr, id)?;
                        ids.insert(id.to_string());
                    }
                }
                if pr.sigma.contains_key(&ids) {
                    return Err(err(format!("duplicate sigma for `{key}`")));
                }
                let mut facts = String::new();
                let mut closed = false;
                while i < lines.len() {
                    let t = lines[i].trim();
                    i += 1;
                    if t == "end" {
                        closed = true;
                        break;
                    }
                    facts.push_str(t);
                    facts.push('\n');
                }
                if !closed {
                    return Err(err("sigma block is missing `end`".into()));
                }
                let opts = LoadOptions {
                    allow_reserve_literals: true,
                };
                let s = parse_state(&facts, vocab.clone(), opts).map_err(|e| CertError {
                    line: line + e.line,
                    message: e.message,
                })?;
                pr.sigma.insert(ids, s);
            }
            other => return Err(err(format!("unknown directive `{other}`"))),
        }
    }
    Ok(pr)
}
