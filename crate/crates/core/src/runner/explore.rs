//! Bounded breadth-first reachability with isomorphism deduplication.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{FamilyMode, RunError, StepConfig};
use crate::evaluator::{EvalError, Env, Evaluator, UndefExternals};
use crate::state::{shape_key, Element, Location, State, StateError};
use crate::syntax::{parse_guard, Guard, ParseError, Program, RuleOptions};
use crate::vocabulary::Vocabulary;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExploreConfig {
    pub depth: usize,
    /// Distinct states (up to isomorphism) kept before the search gives up.
    pub max_states: usize,
    pub step: StepConfig,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        Self {
            depth: 6,
            max_states: 100_000,
            step: StepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reached {
    pub state: State,
    pub depth: usize,
    /// Predecessor node and the label of the transition taken from it.
    pub parent: Option<(usize, String)>,
}

#[derive(Debug, Clone, Default)]
pub struct Exploration {
    pub nodes: Vec<Reached>,
    /// Nodes at which the safety check failed, in discovery order.
    pub violations: Vec<usize>,
    /// The state budget ran out before the depth bound was reached.
    pub partial: bool,
}

impl Exploration {
    pub fn states(&self) -> impl Iterator<Item = &State> {
        self.nodes.iter().map(|n| &n.state)
    }

    /// Transition labels and states from the initial state to `node`.
    pub fn witness(&self, node: usize) -> Vec<(Option<&str>, &State)> {
        let mut path = Vec::new();
        let mut cur = Some(node);
        while let Some(i) = cur {
            let n = &self.nodes[i];
            path.push((n.parent.as_ref().map(|(_, l)| l.as_str()), &n.state));
            cur = n.parent.as_ref().map(|(p, _)| *p);
        }
        path.reverse();
        path
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }
}

type ShapeKey = Vec<(Location, Element)>;

/// Explores from `initial`, expanding states up to `cfg.depth` steps away.
/// `check` runs once on every newly discovered state.
pub fn explore<E>(
    initial: &State,
    cfg: &ExploreConfig,
    mut successors: impl FnMut(&State) -> Result<Vec<(String, State)>, E>,
    mut check: impl FnMut(&State) -> Result<bool, E>,
) -> Result<Exploration, E> {
    let mut out = Exploration::default();
    let mut index: BTreeMap<ShapeKey, Vec<usize>> = BTreeMap::new();
    let mut find_or_add =
        |out: &mut Exploration, state: State, depth: usize, parent: Option<(usize, String)>| {
            let bucket = index.entry(shape_key(&state)).or_default();
            if bucket.iter().any(|&i| out.nodes[i].state.isomorphic(&state)) {
                return None;
            }
            let id = out.nodes.len();
            bucket.push(id);
            out.nodes.push(Reached {
                state,
                depth,
                parent,
            });
            Some(id)
        };
    find_or_add(&mut out, initial.clone(), 0, None);
    if !check(initial)? {
        out.violations.push(0);
    }
    let mut frontier = vec![0usize];
    for depth in 1..=cfg.depth {
        let mut next = Vec::new();
        for &node in &frontier {
            let state = out.nodes[node].state.clone();
            for (label, succ) in successors(&state)? {
                if out.nodes.len() >= cfg.max_states {
                    out.partial = true;
                    return Ok(out);
                }
                if let Some(id) = find_or_add(&mut out, succ, depth, Some((node, label))) {
                    if !check(&out.nodes[id].state)? {
                        out.violations.push(id);
                    }
                    next.push(id);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(out)
}

/// Every successor of `state` under some resolution of the program's family.
/// External functions read as `undef`.
pub fn program_successors(
    program: &Program,
    state: &State,
    cfg: &StepConfig,
) -> Result<Vec<(String, State)>, RunError> {
    let mut ext = UndefExternals;
    let mut ev = Evaluator::new(state, &mut ext)
        .with_alloc_order(cfg.alloc)
        .with_family_budget(cfg.family_budget);
    let family = match cfg.family {
        FamilyMode::Direct => ev.nupdates(&program.rule, &Env::new())?,
        FamilyMode::Global => ev.nupdates_global(&program.rule, &Env::new())?,
    };
    let of = family.len();
    let mut out = Vec::new();
    for (i, member) in family.members().enumerate() {
        let label = format!("choice {i}/{of}");
        let next = match member {
            crate::state::Branch::Set(s) => state.fire_update_set(s)?.state,
            crate::state::Branch::Bottom => state.clone(),
        };
        out.push((label, next));
    }
    if out.is_empty() {
        out.push(("empty family".to_string(), state.clone()));
    }
    Ok(out)
}

/// Reachable states of `program` within `cfg.depth` steps, checking `assertion`.
pub fn enumerate_reachable(
    program: &Program,
    initial: &State,
    cfg: &ExploreConfig,
    assertion: Option<&Assertion>,
) -> Result<Exploration, RunError> {
    explore(
        initial,
        cfg,
        |s| program_successors(program, s, &cfg.step),
        |s| match assertion {
            None => Ok(true),
            Some(a) => a.holds(s),
        },
    )
}

/// A closed guard checked on every explored state.
#[derive(Debug, Clone)]
pub struct Assertion {
    pub guard: Guard,
    pub text: String,
    vocab: Arc<Vocabulary>,
}

impl Assertion {
    /// Parses `text` over `vocab`; unknown nullary names become fresh constants.
    pub fn parse(text: &str, vocab: &Vocabulary) -> Result<Self, ParseError> {
        let (guard, vocab) = parse_guard(text, vocab, &RuleOptions::default())?;
        Ok(Self {
            guard,
            text: text.to_string(),
            vocab: Arc::new(vocab),
        })
    }

    pub fn holds(&self, state: &State) -> Result<bool, RunError> {
        let wide = if state.vocabulary().as_ref() == self.vocab.as_ref() {
            state.clone()
        } else {
            state.widen(self.vocab.clone()).map_err(|e: StateError| RunError::State(e))?
        };
        let mut ext = UndefExternals;
        Evaluator::new(&wide, &mut ext)
            .eval_guard(&Env::new(), &self.guard)
            .map_err(|e: EvalError| RunError::from(e))
    }
}
