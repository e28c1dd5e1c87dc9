//! Certificate generation from sequential runs, and single-fault mutations.
//!
//! A sequential run is turned into a partial order by keeping only the
//! dependencies between its moves: same agent, or one move writing what the
//! other reads or writes. Reserve allocation counts as a read and a write of
//! one pseudo-location, so importing moves stay ordered and every
//! linearization draws the same reserve elements.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{agents_of, compute_move, DistError, PartialRun};
use crate::evaluator::{Allocator, ReadLog, UndefExternals};
use crate::runner::StepConfig;
use crate::state::{Element, Location, SeededChooser, State, Update, UpdateSet};
use crate::syntax::DistributedSpec;
use crate::vocabulary::{MOD, RESERVE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub moves: usize,
    pub seed: u64,
    pub step: StepConfig,
}

struct Footprint {
    reads: ReadLog,
    writes: BTreeSet<Location>,
    allocates: bool,
}

impl Footprint {
    fn touches_write(&self, writes: &BTreeSet<Location>) -> bool {
        writes.iter().any(|w| {
            self.reads.locations.contains(w)
                || self.writes.contains(w)
                || (w.args.len() == 1 && self.reads.extents.contains(&w.fname))
        })
    }

    fn depends(&self, other: &Footprint) -> bool {
        let reserve = (self.allocates && (other.allocates || other.reads.reserve))
            || (other.allocates && self.reads.reserve);
        reserve || self.touches_write(&other.writes) || other.touches_write(&self.writes)
    }
}

/// Runs `cfg.moves` random agent moves from `initial` and certifies the run.
///
/// Stores `σ` on the empty segment, on the down-set of every move, and on the
/// whole run. Moves of nondeterministic agents carry their update sets.
pub fn generate_partial_run(
    dp: &DistributedSpec,
    initial: &State,
    cfg: &GeneratorConfig,
) -> Result<PartialRun, DistError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut chooser = SeededChooser::new(cfg.seed.wrapping_add(1));
    let mut pr = PartialRun::default();
    let mut state = initial.clone();
    let mut sets = Vec::new();
    let mut prints = Vec::new();
    for i in 0..cfg.moves {
        let agents = agents_of(dp, &state);
        if agents.is_empty() {
            break;
        }
        let agent = agents[rng.gen_range(0..agents.len())].clone();
        let m = compute_move(
            dp,
            &state,
            &agent,
            &mut UndefExternals,
            &mut chooser,
            &cfg.step,
            Allocator::new(cfg.step.alloc),
        )?;
        let set = m.selection.set.unwrap_or_default();
        let writes = set
            .iter()
            .chain(set.mirrors())
            .filter(|u| u.location.fname.as_ref() != RESERVE)
            .map(|u| u.location.clone())
            .collect();
        let allocates = set.iter().any(|u| u.location.fname.as_ref() == RESERVE);
        prints.push(Footprint {
            reads: m.reads,
            writes,
            allocates,
        });
        let id = format!("x{}", i + 1);
        pr.add_move(&id, agent.element.clone());
        if agent.program(dp).rule.contains_choose() {
            pr.recorded.insert(id, set.clone());
        }
        state = state.fire_update_set(&set)?.state;
        sets.push(set);
    }
    let n = sets.len();
    let mut below = vec![BTreeSet::new(); n];
    for j in 0..n {
        for i in 0..j {
            let same_agent = pr.agent[&pr.moves[i]] == pr.agent[&pr.moves[j]];
            if same_agent || prints[i].depends(&prints[j]) {
                let inherited: Vec<usize> = below[i].iter().copied().collect();
                below[j].insert(i);
                below[j].extend(inherited);
            }
        }
    }
    for j in 0..n {
        for &i in &below[j] {
            let covered = below[j].iter().any(|&k| below[k].contains(&i));
            if !covered {
                pr.add_edge(&pr.moves[i].clone(), &pr.moves[j].clone());
            }
        }
    }
    let fire_down = |members: &BTreeSet<usize>| -> Result<State, DistError> {
        let mut s = initial.clone();
        for &k in members {
            s = s.fire_update_set(&sets[k])?.state;
        }
        Ok(s)
    };
    pr.sigma.insert(BTreeSet::new(), initial.clone());
    for j in 0..n {
        let mut members = below[j].clone();
        members.insert(j);
        let key = members.iter().map(|&k| pr.moves[k].clone()).collect();
        let s = fire_down(&members)?;
        pr.sigma.insert(key, s);
    }
    if n > 0 {
        pr.sigma.insert(pr.moves.iter().cloned().collect(), state);
    }
    Ok(pr)
}

/// Single faults injected into valid certificates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Mutation {
    CorruptSigma,
    CorruptInitialFact,
    DropInitial,
    ReserveInInitial,
    UnorderedAgentMoves,
    Cycle,
    SelfLoop,
    NonAgentLabel,
    SwapAgent,
    BogusRecordedUpdates,
}

pub const MUTATIONS: [Mutation; 10] = [
    Mutation::CorruptSigma,
    Mutation::CorruptInitialFact,
    Mutation::DropInitial,
    Mutation::ReserveInInitial,
    Mutation::UnorderedAgentMoves,
    Mutation::Cycle,
    Mutation::SelfLoop,
    Mutation::NonAgentLabel,
    Mutation::SwapAgent,
    Mutation::BogusRecordedUpdates,
];

impl Mutation {
    pub fn name(self) -> &'static str {
        match self {
            Mutation::CorruptSigma => "corrupt-sigma",
            Mutation::CorruptInitialFact => "corrupt-initial-fact",
            Mutation::DropInitial => "drop-initial",
            Mutation::ReserveInInitial => "reserve-in-initial",
            Mutation::UnorderedAgentMoves => "unordered-agent-moves",
            Mutation::Cycle => "cycle",
            Mutation::SelfLoop => "self-loop",
            Mutation::NonAgentLabel => "non-agent-label",
            Mutation::SwapAgent => "swap-agent",
            Mutation::BogusRecordedUpdates => "bogus-recorded-updates",
        }
    }

    /// Conditions the checker may legitimately report for this fault.
    pub fn expected(self) -> &'static [&'static str] {
        match self {
            Mutation::CorruptSigma | Mutation::CorruptInitialFact | Mutation::NonAgentLabel => &["4"],
            Mutation::DropInitial | Mutation::ReserveInInitial => &["3"],
            Mutation::UnorderedAgentMoves => &["2"],
            Mutation::Cycle | Mutation::SelfLoop => &["1"],
            // A recorded set is checked against the new agent's alternatives.
            Mutation::SwapAgent => &["2", "4", "4*"],
            Mutation::BogusRecordedUpdates => &["4*"],
        }
    }
}

fn ghost() -> Element {
    Element::named("ghost")
}

/// Applies `m` to a copy of `pr`; `None` when the run is too small for it.
pub fn mutate(dp: &DistributedSpec, pr: &PartialRun, m: Mutation) -> Option<PartialRun> {
    let mut out = pr.clone();
    let first = pr.moves.first()?.clone();
    match m {
        Mutation::CorruptSigma => {
            let key = pr.sigma.keys().filter(|k| !k.is_empty()).max_by_key(|k| k.len())?.clone();
            let s = out.sigma.get_mut(&key)?;
            let (loc, value) = s
                .facts()
                .find(|(l, _)| l.fname.as_ref() != MOD)
                .or_else(|| s.facts().next())
                .map(|(l, v)| (l.clone(), v.clone()))?;
            let f = s.vocabulary().get(&loc.fname)?.clone();
            let new = if f.is_relation {
                Element::bool(value != Element::True)
            } else {
                Element::named("corrupted")
            };
            s.assign(loc, new).ok()?;
        }
        Mutation::CorruptInitialFact => {
            if pr.sigma.len() < 2 {
                return None;
            }
            let s = out.sigma.get_mut(&BTreeSet::new())?;
            s.assign(Location::new(MOD, vec![ghost()]), Element::named("nobody"))
                .ok()?;
        }
        Mutation::DropInitial => {
            out.sigma.remove(&BTreeSet::new())?;
            out.initial_ref = None;
        }
        Mutation::ReserveInInitial => {
            let s = out.sigma.get_mut(&BTreeSet::new())?;
            let (mut next, e) = s.reserve_withdraw();
            next.assign(Location::new(MOD, vec![e]), Element::named("nobody"))
                .ok()?;
            *s = next;
        }
        Mutation::UnorderedAgentMoves => {
            let id = "xdup".to_string();
            out.add_move(&id, pr.agent[&first].clone());
        }
        Mutation::Cycle => {
            let (x, y) = match pr.edges.iter().next() {
                Some(e) => e.clone(),
                None => {
                    let second = pr.moves.get(1)?.clone();
                    out.add_edge(&first, &second);
                    (first, second)
                }
            };
            out.add_edge(&y, &x);
        }
        Mutation::SelfLoop => out.add_edge(&first, &first),
        Mutation::NonAgentLabel => {
            out.agent.insert(first, ghost());
        }
        Mutation::SwapAgent => {
            let init = pr.sigma.get(&BTreeSet::new())?;
            let agents: Vec<Element> = agents_of(dp, init).into_iter().map(|a| a.element).collect();
            let mv = pr.moves.iter().find(|mv| changes_state(pr, mv))?;
            let current = &pr.agent[mv];
            let other = pr
                .moves
                .iter()
                .map(|x| &pr.agent[x])
                .chain(agents.iter())
                .find(|a| *a != current)?
                .clone();
            out.agent.insert(mv.clone(), other);
        }
        Mutation::BogusRecordedUpdates => {
            let set = recorded_or_replayed(pr, &first)?;
            let mut bogus = set;
            bogus.insert(Update::new(
                Location::new(MOD, vec![ghost()]),
                Element::named("bogus"),
            ));
            out.recorded.insert(first, bogus);
        }
    }
    Some(out)
}

/// True when σ changes across `mv` on its own down-set.
fn changes_state(pr: &PartialRun, mv: &str) -> bool {
    let Some((with, without)) = down_pair(pr, mv) else {
        return false;
    };
    match (pr.sigma.get(&with), pr.sigma.get(&without)) {
        (Some(a), Some(b)) => !a.isomorphic(b),
        _ => false,
    }
}

/// The down-set of `mv` as stored, with and without `mv` itself.
fn down_pair(pr: &PartialRun, mv: &str) -> Option<(BTreeSet<String>, BTreeSet<String>)> {
    let with = pr.sigma.keys().filter(|k| k.contains(mv)).min_by_key(|k| k.len())?.clone();
    let mut without = with.clone();
    without.remove(mv);
    Some((with, without))
}

/// The update set of `mv`: recorded, or the fact difference across its down-set.
fn recorded_or_replayed(pr: &PartialRun, mv: &str) -> Option<UpdateSet> {
    if let Some(s) = pr.recorded.get(mv) {
        return Some(s.clone());
    }
    let (with, without) = down_pair(pr, mv)?;
    let (after, before) = (pr.sigma.get(&with)?, pr.sigma.get(&without)?);
    let before_facts: BTreeMap<&Location, &Element> = before.facts().collect();
    let mut set = UpdateSet::new();
    for (l, v) in after.facts() {
        if before_facts.get(l) != Some(&v) {
            set.insert(Update::new(l.clone(), v.clone()));
        }
    }
    Some(set)
}
