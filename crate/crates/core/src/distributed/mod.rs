//! Distributed ealgebras: agents, views, moves and runs.
//!
//! Every element `a` with `Mod(a) = ν` for a module name `ν` is an agent.
//! It moves by firing its module's program at its view of the global state,
//! which is the global state restricted to the names the program uses and
//! expanded with `Self = a`.

mod certificate;
mod check;
mod generate;

use std::collections::BTreeMap;

use thiserror::Error;

pub use certificate::{parse_certificate, certificate_to_text, CertError, MoveId, PartialRun};
pub use check::{
    check_partial_run, corollary_one, corollary_two, holds_on_linearizations, initial_segments, linearizations,
    Linearization, Linearizations, Verdict, Violation,
};
pub use generate::{generate_partial_run, mutate, GeneratorConfig, Mutation, MUTATIONS};

use crate::evaluator::{Allocator, Evaluator, Externals, ReadLog, UndefExternals};
use crate::runner::{
    fire_selection, select_in, Assertion, ExploreConfig, Exploration, Oracle, RunError, RunTrace,
    Selection, StepConfig, StepRecord, StopReason,
};
use crate::state::{Chooser, Element, Location, State, StateError, UpdateSet};
use crate::syntax::{DistributedSpec, Program};
use crate::vocabulary::{Symbol, MOD, SELF};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DistError {
    #[error("{0} is not an agent in this state")]
    NotAnAgent(Element),
    #[error("state vocabulary does not match the distributed program: {0}")]
    Vocabulary(String),
    #[error("initial-state condition fails: {0}")]
    Initial(String),
    #[error("agent {0} runs a program with choose; quasi-sequential steps need deterministic agents")]
    Nondeterministic(Element),
    #[error(transparent)]
    Run(#[from] RunError),
}

impl From<StateError> for DistError {
    fn from(e: StateError) -> Self {
        DistError::Run(RunError::State(e))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Agent {
    pub element: Element,
    pub module: Symbol,
}

impl Agent {
    pub fn program<'a>(&self, dp: &'a DistributedSpec) -> &'a Program {
        &dp.modules[&self.module]
    }
}

/// All agents of `state`, in element order.
pub fn agents_of(dp: &DistributedSpec, state: &State) -> Vec<Agent> {
    state
        .facts_of(MOD)
        .filter_map(|(loc, v)| match v {
            Element::Named(name) if dp.modules.contains_key(name) => Some(Agent {
                element: loc.args[0].clone(),
                module: name.clone(),
            }),
            _ => None,
        })
        .collect()
}

pub fn agent_at(dp: &DistributedSpec, state: &State, a: &Element) -> Result<Agent, DistError> {
    let modv = state.read(&Location::new(MOD, vec![a.clone()]))?;
    match modv {
        Element::Named(name) if dp.modules.contains_key(&name) => Ok(Agent {
            element: a.clone(),
            module: name,
        }),
        _ => Err(DistError::NotAnAgent(a.clone())),
    }
}

/// Checks that `state` is a legal initial state: shared vocabulary, reserve
/// proviso, no reserve-origin elements, and the declared initial guard.
pub fn validate_initial(dp: &DistributedSpec, state: &State) -> Result<(), DistError> {
    if state.vocabulary().as_ref() != dp.vocab.as_ref() {
        return Err(DistError::Vocabulary(
            "load the state over the program's shared vocabulary".into(),
        ));
    }
    state.audit_proviso()?;
    if let Some(e) = state.reserve_origin_elements().into_iter().next() {
        return Err(DistError::Initial(format!("mentions reserve-origin element {e}")));
    }
    if let Some(g) = &dp.initial {
        let mut ext = UndefExternals;
        let holds = Evaluator::new(state, &mut ext)
            .eval_guard(&crate::evaluator::Env::new(), g)
            .map_err(RunError::from)?;
        if !holds {
            return Err(DistError::Initial(format!(
                "guard `{}` is false",
                crate::syntax::guard_to_string(g)
            )));
        }
    }
    Ok(())
}

/// The agent's local state: restricted to its program's names, with `Self = a`.
pub fn view(dp: &DistributedSpec, state: &State, agent: &Agent) -> Result<State, DistError> {
    let program = agent.program(dp);
    let sub = program.vocab.without(SELF);
    let reduced = state.reduct(&sub)?;
    let mut extra = BTreeMap::new();
    extra.insert(SELF.to_string(), agent.element.clone());
    Ok(reduced.expand(&extra)?)
}

/// Outcome of computing one agent's move, before firing.
#[derive(Debug, Clone)]
pub struct MoveResult {
    pub selection: Selection,
    pub reads: ReadLog,
    pub alloc: Allocator,
}

/// Computes the update set of `agent` at `state`.
pub fn compute_move(
    dp: &DistributedSpec,
    state: &State,
    agent: &Agent,
    externals: &mut dyn Externals,
    chooser: &mut dyn Chooser,
    cfg: &StepConfig,
    alloc: Allocator,
) -> Result<MoveResult, DistError> {
    let v = view(dp, state, agent)?;
    let mut ev = Evaluator::new(&v, externals)
        .with_allocator(alloc)
        .with_family_budget(cfg.family_budget)
        .with_read_log();
    let selection = select_in(&mut ev, &agent.program(dp).rule, chooser, cfg.family)?;
    let mut reads = ev.take_reads();
    reads.locations.insert(Location::new(MOD, vec![agent.element.clone()]));
    reads.locations.remove(&Location::nullary(SELF));
    Ok(MoveResult {
        selection,
        reads,
        alloc: ev.into_allocator(),
    })
}

/// One move of `a` at `state`: the successor and the fired update set.
pub fn agent_move(
    dp: &DistributedSpec,
    state: &State,
    a: &Element,
    chooser: &mut dyn Chooser,
    cfg: &StepConfig,
) -> Result<(State, UpdateSet), DistError> {
    let agent = agent_at(dp, state, a)?;
    let m = compute_move(dp, state, &agent, &mut UndefExternals, chooser, cfg, Allocator::new(cfg.alloc))?;
    let set = m.selection.set.clone().unwrap_or_default();
    let (next, _) = fire_selection(state, m.selection, 0, Vec::new())?;
    Ok((next, set))
}

/// How a sequential run picks the next agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Schedule {
    /// Exactly these agents, in order.
    Explicit(Vec<Element>),
    /// A uniformly random enabled agent at each stage, drawn from the chooser.
    Random,
}

/// True when some update set the agent could fire is nonempty.
fn enabled(
    dp: &DistributedSpec,
    state: &State,
    agent: &Agent,
    oracle: &mut Oracle,
    cfg: &StepConfig,
) -> Result<bool, DistError> {
    let v = view(dp, state, agent)?;
    let mut ev = Evaluator::new(&v, oracle)
        .with_alloc_order(cfg.alloc)
        .with_family_budget(cfg.family_budget);
    let rule = &agent.program(dp).rule;
    let env = crate::evaluator::Env::new();
    let family = if rule.contains_choose() {
        match cfg.family {
            crate::runner::FamilyMode::Direct => ev.nupdates(rule, &env),
            crate::runner::FamilyMode::Global => ev.nupdates_global(rule, &env),
        }
    } else {
        ev.updates(rule, &env).map(crate::state::UpdateFamily::singleton)
    }
    .map_err(RunError::from)?;
    Ok(family.sets.iter().any(|s| !s.is_empty()))
}

/// A sequential run: every stage fires one move of one agent.
pub fn sequential_run(
    dp: &DistributedSpec,
    initial: &State,
    schedule: &Schedule,
    oracle: &mut Oracle,
    chooser: &mut dyn Chooser,
    max_steps: usize,
    cfg: &StepConfig,
) -> RunTrace {
    let limit = match schedule {
        Schedule::Explicit(picks) => picks.len().min(max_steps),
        Schedule::Random => max_steps,
    };
    let mut trace = RunTrace {
        states: vec![initial.clone()],
        records: Vec::new(),
        stop: StopReason::StepLimit { steps: limit },
        error: None,
    };
    for i in 0..limit {
        let current = trace.final_state().clone();
        oracle.begin_step(i);
        let outcome = (|| -> Result<Option<(State, StepRecord)>, DistError> {
            let agent = match schedule {
                Schedule::Explicit(picks) => agent_at(dp, &current, &picks[i]).map_err(|_| {
                    RunError::Schedule(format!("step {i}: {} is not an agent", picks[i]))
                })?,
                Schedule::Random => {
                    let mut live = Vec::new();
                    for a in agents_of(dp, &current) {
                        if enabled(dp, &current, &a, oracle, cfg)? {
                            live.push(a);
                        }
                    }
                    if live.is_empty() {
                        return Ok(None);
                    }
                    let k = chooser.choose(live.len()).min(live.len() - 1);
                    live.swap_remove(k)
                }
            };
            let m = compute_move(dp, &current, &agent, oracle, chooser, cfg, Allocator::new(cfg.alloc))?;
            let (next, mut rec) = fire_selection(&current, m.selection, i, oracle.take_transcript())?;
            rec.agent = Some(agent.element);
            Ok(Some((next, rec)))
        })();
        match outcome {
            Ok(Some((next, rec))) => {
                trace.states.push(next);
                trace.records.push(rec);
            }
            Ok(None) => {
                trace.stop = StopReason::Fixpoint { step: i };
                break;
            }
            Err(e) => {
                let e = match e {
                    DistError::Run(r) => r,
                    other => RunError::Schedule(other.to_string()),
                };
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

/// Fires the union of the update sets of `agents`, all computed at `state`.
pub fn quasi_sequential_step(
    dp: &DistributedSpec,
    state: &State,
    agents: &[Element],
    cfg: &StepConfig,
) -> Result<(State, StepRecord), DistError> {
    let mut union = UpdateSet::new();
    let mut used = std::collections::BTreeSet::new();
    for a in agents {
        let agent = agent_at(dp, state, a)?;
        if agent.program(dp).rule.contains_choose() {
            return Err(DistError::Nondeterministic(a.clone()));
        }
        let mut alloc = Allocator::new(cfg.alloc);
        alloc.exclude(used.iter().copied());
        let m = compute_move(dp, state, &agent, &mut UndefExternals, &mut crate::state::FirstChooser, cfg, alloc)?;
        used.extend(m.alloc.used().iter().copied());
        if let Some(s) = m.selection.set {
            union.extend(s);
        }
    }
    let sel = Selection {
        set: Some(union),
        choice: None,
        bottom: false,
    };
    Ok(fire_selection(state, sel, 0, Vec::new())?)
}

/// Successors of `state` under every move of every agent.
pub fn interleaving_successors(
    dp: &DistributedSpec,
    state: &State,
    cfg: &StepConfig,
) -> Result<Vec<(String, State)>, DistError> {
    let mut out = Vec::new();
    for agent in agents_of(dp, state) {
        let v = view(dp, state, &agent)?;
        let mut ext = UndefExternals;
        let mut ev = Evaluator::new(&v, &mut ext)
            .with_alloc_order(cfg.alloc)
            .with_family_budget(cfg.family_budget);
        let rule = &agent.program(dp).rule;
        let env = crate::evaluator::Env::new();
        let family = match cfg.family {
            crate::runner::FamilyMode::Direct => ev.nupdates(rule, &env),
            crate::runner::FamilyMode::Global => ev.nupdates_global(rule, &env),
        }
        .map_err(RunError::from)?;
        let of = family.len();
        for (i, member) in family.members().enumerate() {
            let next = match member {
                crate::state::Branch::Set(s) => state.fire_update_set(s)?.state,
                crate::state::Branch::Bottom => state.clone(),
            };
            let label = if of > 1 {
                format!("{} choice {i}/{of}", agent.element)
            } else {
                agent.element.to_string()
            };
            out.push((label, next));
        }
    }
    Ok(out)
}

/// Exhaustive search over sequential interleavings of agent moves.
pub fn enumerate_interleavings(
    dp: &DistributedSpec,
    initial: &State,
    cfg: &ExploreConfig,
    assertion: Option<&Assertion>,
) -> Result<Exploration, DistError> {
    crate::runner::explore(
        initial,
        cfg,
        |s| interleaving_successors(dp, s, &cfg.step),
        |s| match assertion {
            None => Ok(true),
            Some(a) => a.holds(s).map_err(DistError::from),
        },
    )
}

#[cfg(test)]
mod tests;
