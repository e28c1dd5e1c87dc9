//! Sequential runs: single steps, traces, replay and bounded reachability.
//!
//! External functions are never stored in the state. Each step resolves them
//! through an [`Oracle`] whose answers are memoized for that step only.

mod explore;
mod oracle;
mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use explore::{
    enumerate_reachable, explore, program_successors, Assertion, ExploreConfig, Exploration, Reached,
};
pub use oracle::{Oracle, OracleScriptError, StepSel};
pub use trace::{parse_records, trace_to_records, trace_to_text, TraceLine};

use crate::evaluator::{AllocOrder, Env, EvalError, Evaluator, Externals};
use crate::state::{
    Branch, Choice, Chooser, Conflict, Element, Location, ScriptedChooser, State, StateError,
    Update, UpdateSet,
};
use crate::syntax::{fun_of, Program, Rule};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("oracle failure: {0}")]
    Oracle(String),
    #[error(transparent)]
    Eval(EvalError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("schedule error: {0}")]
    Schedule(String),
}

impl From<EvalError> for RunError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::External { query, reason } => RunError::Oracle(format!("{query}: {reason}")),
            other => RunError::Eval(other),
        }
    }
}

/// Which family semantics resolves `choose`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FamilyMode {
    /// Direct induction; ⊥ never arises.
    #[default]
    Direct,
    /// Global choice functions; a chosen ⊥ member fires as a no-op.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepConfig {
    pub family: FamilyMode,
    pub alloc: AllocOrder,
    pub family_budget: usize,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            family: FamilyMode::Direct,
            alloc: AllocOrder::Canonical,
            family_budget: 1 << 16,
        }
    }
}

/// The update set picked for one move, before firing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    /// `None` when the family was empty or a ⊥ member was chosen.
    pub set: Option<UpdateSet>,
    pub choice: Option<Choice>,
    pub bottom: bool,
}

/// Computes the update set of `rule` at `view`, resolving choices with `chooser`.
pub fn select(
    rule: &Rule,
    view: &State,
    externals: &mut dyn Externals,
    chooser: &mut dyn Chooser,
    cfg: &StepConfig,
) -> Result<Selection, RunError> {
    let mut ev = Evaluator::new(view, externals)
        .with_alloc_order(cfg.alloc)
        .with_family_budget(cfg.family_budget);
    select_in(&mut ev, rule, chooser, cfg.family)
}

/// As [`select`], with a caller-configured evaluator.
pub fn select_in(
    ev: &mut Evaluator<'_>,
    rule: &Rule,
    chooser: &mut dyn Chooser,
    mode: FamilyMode,
) -> Result<Selection, RunError> {
    if !rule.contains_choose() {
        return Ok(Selection {
            set: Some(ev.updates(rule, &Env::new())?),
            choice: None,
            bottom: false,
        });
    }
    let family = match mode {
        FamilyMode::Direct => ev.nupdates(rule, &Env::new())?,
        FamilyMode::Global => ev.nupdates_global(rule, &Env::new())?,
    };
    if family.is_empty() {
        return Ok(Selection {
            set: None,
            choice: None,
            bottom: false,
        });
    }
    let of = family.len();
    let index = chooser.choose(of).min(of - 1);
    let choice = Some(Choice { index, of });
    Ok(match family.member(index).expect("index within family") {
        Branch::Set(s) => Selection {
            set: Some(s.clone()),
            choice,
            bottom: false,
        },
        Branch::Bottom => Selection {
            set: None,
            choice,
            bottom: true,
        },
    })
}

/// Everything needed to reproduce one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<Element>,
    pub updates: Vec<Update>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mirrors: Vec<Update>,
    /// False when the set was inconsistent and nothing changed.
    pub fired: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conflicts: Vec<Conflict>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub oracle: Vec<(Location, Element)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice: Option<Choice>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub bottom: bool,
}

impl StepRecord {
    pub fn update_set(&self) -> UpdateSet {
        let mut s = UpdateSet::new();
        for u in &self.updates {
            s.insert(u.clone());
        }
        for u in &self.mirrors {
            s.insert_mirror(u.clone());
        }
        s
    }

    /// True when the step had a single possible outcome.
    pub fn is_deterministic(&self) -> bool {
        self.choice.map_or(true, |c| c.of == 1) && self.oracle.is_empty()
    }
}

/// Fires a selection against `state` and builds its record.
pub fn fire_selection(
    state: &State,
    sel: Selection,
    step: usize,
    oracle: Vec<(Location, Element)>,
) -> Result<(State, StepRecord), RunError> {
    let (next, fired, conflicts, set) = match sel.set {
        Some(set) => {
            let f = state.fire_update_set(&set)?;
            (f.state, f.fired, f.conflicts, set)
        }
        None => (state.clone(), false, Vec::new(), UpdateSet::new()),
    };
    let record = StepRecord {
        step,
        agent: None,
        updates: set.iter().cloned().collect(),
        mirrors: set.mirrors().cloned().collect(),
        fired,
        conflicts,
        oracle,
        choice: sel.choice,
        bottom: sel.bottom,
    };
    Ok((next, record))
}

/// Fires `program` once at `state`.
pub fn step(
    program: &Program,
    state: &State,
    oracle: &mut Oracle,
    chooser: &mut dyn Chooser,
    index: usize,
    cfg: &StepConfig,
) -> Result<(State, StepRecord), RunError> {
    oracle.begin_step(index);
    let sel = select(&program.rule, state, oracle, chooser, cfg)?;
    fire_selection(state, sel, index, oracle.take_transcript())
}

/// Re-fires a recorded step without evaluating the program.
pub fn apply_record(state: &State, record: &StepRecord) -> Result<State, StateError> {
    if !record.fired {
        return Ok(state.clone());
    }
    Ok(state.fire_update_set(&record.update_set())?.state)
}

/// Why a run ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum StopReason {
    /// A deterministic step without externals left the state unchanged.
    Fixpoint { step: usize },
    StepLimit { steps: usize },
    Aborted { step: usize, error: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunTrace {
    /// `states[0]` is the initial state; `states[i + 1]` follows `records[i]`.
    pub states: Vec<State>,
    pub records: Vec<StepRecord>,
    pub stop: StopReason,
    /// The error behind an `Aborted` stop.
    pub error: Option<RunError>,
}

impl RunTrace {
    pub fn final_state(&self) -> &State {
        self.states.last().expect("traces start with a state")
    }
}

/// True when `program` mentions an external function.
pub fn uses_externals(program: &Program) -> bool {
    fun_of(&program.rule)
        .iter()
        .any(|n| program.vocab.get(n).is_some_and(|f| f.is_external()))
}

/// Runs `program` for at most `max_steps` steps.
pub fn run(
    program: &Program,
    initial: &State,
    oracle: &mut Oracle,
    chooser: &mut dyn Chooser,
    max_steps: usize,
    cfg: &StepConfig,
) -> RunTrace {
    let pure = !uses_externals(program);
    let mut trace = RunTrace {
        states: vec![initial.clone()],
        records: Vec::new(),
        stop: StopReason::StepLimit { steps: max_steps },
        error: None,
    };
    for i in 0..max_steps {
        let current = trace.final_state().clone();
        match step(program, &current, oracle, chooser, i, cfg) {
            Ok((next, rec)) => {
                let fixed = pure && rec.is_deterministic() && next == current;
                trace.states.push(next);
                trace.records.push(rec);
                if fixed {
                    trace.stop = StopReason::Fixpoint { step: i + 1 };
                    break;
                }
            }
            Err(e) => {
                trace.stop = StopReason::Aborted {
                    step: i,
                    error: e.to_string(),
                };
                trace.error = Some(e);
                break;
            }
        }
    }
    trace
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("step {step}: recomputed record differs from the recorded one")]
    Mismatch { step: usize },
    #[error("trace has {recorded} step(s) but the replay produced {replayed}")]
    Length { recorded: usize, replayed: usize },
}

/// Re-executes `program` from `initial`, feeding back the recorded choices
/// and oracle answers, and checks that every record is reproduced exactly.
pub fn replay(
    program: &Program,
    initial: &State,
    records: &[StepRecord],
    cfg: &StepConfig,
) -> Result<Vec<State>, ReplayError> {
    let mut states = vec![initial.clone()];
    for rec in records {
        let answers = rec
            .oracle
            .iter()
            .map(|(l, v)| ((StepSel::At(rec.step), l.clone()), v.clone()))
            .collect();
        let mut oracle = Oracle::scripted(answers, true);
        let mut chooser = ScriptedChooser::new(rec.choice.map(|c| c.index));
        let current = states.last().expect("nonempty");
        let (next, got) = step(program, current, &mut oracle, &mut chooser, rec.step, cfg)?;
        if &got != rec {
            return Err(ReplayError::Mismatch { step: rec.step });
        }
        states.push(next);
    }
    Ok(states)
}
