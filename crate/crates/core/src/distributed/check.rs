//! Verification of partially ordered runs and their linearizations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{agent_at, validate_initial, view, DistError, MoveId, PartialRun};
use crate::evaluator::{Env, Evaluator, UndefExternals};
use crate::runner::RunError;
use crate::state::{Element, State, Update, UpdateSet};
use crate::syntax::DistributedSpec;

/// The first condition a certificate breaks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Some down-set is not finite: the order has a cycle.
    DownSet { cycle: Vec<MoveId> },
    /// Two moves of one agent are incomparable.
    AgentOrder { agent: Element, x: MoveId, y: MoveId },
    /// `σ(∅)` is missing or not an initial state.
    Initial { reason: String },
    NotAnAgent {
        segment: Vec<MoveId>,
        mv: MoveId,
        agent: Element,
    },
    /// Firing `mv` at `σ(segment − {mv})` does not give `σ(segment)`.
    Coherence {
        segment: Vec<MoveId>,
        mv: MoveId,
        detail: String,
    },
    /// The recorded update set is not among the agent's alternatives.
    NotAMove {
        segment: Vec<MoveId>,
        mv: MoveId,
        detail: String,
    },
}

impl Violation {
    pub fn condition(&self) -> &'static str {
        match self {
            Violation::DownSet { .. } => "1",
            Violation::AgentOrder { .. } => "2",
            Violation::Initial { .. } => "3",
            Violation::NotAnAgent { .. } | Violation::Coherence { .. } => "4",
            Violation::NotAMove { .. } => "4*",
        }
    }
}

fn seg(ids: &[MoveId]) -> String {
    format!("{{{}}}", ids.join(","))
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "condition {}: ", self.condition())?;
        match self {
            Violation::DownSet { cycle } => {
                write!(f, "down-sets are not finite; cycle {}", cycle.join(" < "))
            }
            Violation::AgentOrder { agent, x, y } => {
                write!(f, "moves {x} and {y} of agent {agent} are incomparable")
            }
            Violation::Initial { reason } => write!(f, "sigma({{}}) is not initial: {reason}"),
            Violation::NotAnAgent { segment, mv, agent } => write!(
                f,
                "in segment {}, {agent} (the agent of {mv}) is not an agent",
                seg(segment)
            ),
            Violation::Coherence {
                segment,
                mv,
                detail,
            } => write!(f, "segment {}, maximal move {mv}: {detail}", seg(segment)),
            Violation::NotAMove {
                segment,
                mv,
                detail,
            } => write!(f, "segment {}, move {mv}: {detail}", seg(segment)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Valid { segments: usize },
    Invalid(Violation),
    /// Enumeration stopped at the budget; nothing was found wrong so far.
    Incomplete { reason: String },
    /// The certificate is structurally unusable (e.g. sigma on a non-segment).
    Malformed(String),
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid { .. })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Valid { segments } => write!(f, "valid ({segments} initial segments checked)"),
            Verdict::Invalid(v) => write!(f, "invalid: {v}"),
            Verdict::Incomplete { reason } => write!(f, "incomplete: {reason}"),
            Verdict::Malformed(m) => write!(f, "malformed: {m}"),
        }
    }
}

/// Why a single move could not be fired.
enum MoveFailure {
    NotAnAgent,
    NotAMove(String),
    Run(DistError),
}

impl From<DistError> for MoveFailure {
    fn from(e: DistError) -> Self {
        MoveFailure::Run(e)
    }
}

fn rename(set: &UpdateSet, map: &BTreeMap<Element, Element>) -> UpdateSet {
    let r = |e: &Element| map.get(e).cloned().unwrap_or_else(|| e.clone());
    let ru = |u: &Update| {
        let mut u = u.clone();
        u.location.args = u.location.args.iter().map(r).collect();
        u.value = r(&u.value);
        u
    };
    let mut out = UpdateSet::new();
    for u in set.iter() {
        out.insert(ru(u));
    }
    for u in set.mirrors() {
        out.insert_mirror(ru(u));
    }
    out
}

fn fresh_in(set: &UpdateSet, state: &State) -> Vec<Element> {
    let mut out = BTreeSet::new();
    for u in set.iter().chain(set.mirrors()) {
        for e in u.location.args.iter().chain(std::iter::once(&u.value)) {
            if state.is_in_reserve(e) {
                out.insert(e.clone());
            }
        }
    }
    out.into_iter().collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Equality up to a renaming of elements still in the reserve of `state`.
fn same_up_to_fresh(a: &UpdateSet, b: &UpdateSet, state: &State) -> bool {
    if a == b {
        return true;
    }
    let (fa, fb) = (fresh_in(a, state), fresh_in(b, state));
    if fa.len() != fb.len() || fa.is_empty() || fa.len() > 6 {
        return false;
    }
    permutations(fa.len()).into_iter().any(|p| {
        let map: BTreeMap<_, _> = fa.iter().cloned().zip(p.iter().map(|&i| fb[i].clone())).collect();
        rename(a, &map) == *b
    })
}

fn fire_move(
    dp: &DistributedSpec,
    pr: &PartialRun,
    state: &State,
    mv: &str,
) -> Result<State, MoveFailure> {
    let a = &pr.agent[mv];
    let agent = agent_at(dp, state, a).map_err(|_| MoveFailure::NotAnAgent)?;
    let v = view(dp, state, &agent)?;
    let rule = &agent.program(dp).rule;
    let mut ext = UndefExternals;
    let mut ev = Evaluator::new(&v, &mut ext);
    let set = match pr.recorded.get(mv) {
        Some(rec) => {
            let family = ev.nupdates(rule, &Env::new()).map_err(|e| DistError::Run(e.into()))?;
            if !family.sets.iter().any(|b| same_up_to_fresh(rec, b, state)) {
                return Err(MoveFailure::NotAMove(format!(
                    "recorded update set is not one of the {} alternative(s) of {a}",
                    family.len()
                )));
            }
            rec.clone()
        }
        None if rule.contains_choose() => {
            return Err(MoveFailure::NotAMove(format!(
                "{a} is nondeterministic but no update set is recorded"
            )))
        }
        None => ev.updates(rule, &Env::new()).map_err(|e| DistError::Run(e.into()))?,
    };
    Ok(state.fire_update_set(&set).map_err(DistError::from)?.state)
}

/// First line where the fact listings of two states differ.
fn first_difference(expected: &State, got: &State) -> String {
    let (a, b) = (expected.to_text(), got.to_text());
    let la: BTreeSet<&str> = a.lines().collect();
    let lb: BTreeSet<&str> = b.lines().collect();
    if let Some(x) = la.difference(&lb).next() {
        return format!("sigma has `{x}`, firing does not");
    }
    if let Some(x) = lb.difference(&la).next() {
        return format!("firing yields `{x}`, sigma does not");
    }
    "states differ in their reserve elements".to_string()
}

const MAX_MOVES: usize = 64;
const SEGMENT_BUDGET: usize = 1 << 16;

/// Order structure of a certificate, with moves indexed by declaration order.
struct Order {
    ids: Vec<MoveId>,
    index: BTreeMap<MoveId, usize>,
    /// `below[y]` has bit `x` set iff `x < y`.
    below: Vec<u64>,
}

impl Order {
    fn build(pr: &PartialRun) -> Result<Order, Verdict> {
        if pr.moves.len() > MAX_MOVES {
            return Err(Verdict::Malformed(format!(
                "{} moves; the checker handles at most {MAX_MOVES}",
                pr.moves.len()
            )));
        }
        let ids = pr.moves.clone();
        let index: BTreeMap<_, _> = ids.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        let n = ids.len();
        let mut succ = vec![Vec::new(); n];
        for (x, y) in &pr.edges {
            let (Some(&i), Some(&j)) = (index.get(x), index.get(y)) else {
                return Err(Verdict::Malformed(format!("edge {x} {y} names an unknown move")));
            };
            succ[i].push(j);
        }
        if let Some(cycle) = find_cycle(&succ) {
            return Err(Verdict::Invalid(Violation::DownSet {
                cycle: cycle.into_iter().map(|i| ids[i].clone()).collect(),
            }));
        }
        let mut below = vec![0u64; n];
        for y in topo_order(&succ) {
            for &z in &succ[y] {
                below[z] |= below[y] | (1 << y);
            }
        }
        Ok(Order { ids, index, below })
    }

    fn mask(&self, set: &BTreeSet<MoveId>) -> Option<u64> {
        set.iter()
            .try_fold(0u64, |m, id| self.index.get(id).map(|&i| m | (1 << i)))
    }

    fn names(&self, mask: u64) -> Vec<MoveId> {
        (0..self.ids.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| self.ids[i].clone())
            .collect()
    }

    fn is_segment(&self, mask: u64) -> bool {
        (0..self.ids.len()).all(|i| mask & (1 << i) == 0 || self.below[i] & !mask == 0)
    }

    fn maximal(&self, mask: u64) -> Vec<usize> {
        (0..self.ids.len())
            .filter(|&i| mask & (1 << i) != 0)
            .filter(|&i| (0..self.ids.len()).all(|j| mask & (1 << j) == 0 || self.below[j] & (1 << i) == 0))
            .collect()
    }

    /// All initial segments contained in `within`, smallest first.
    fn segments(&self, within: u64) -> Result<Vec<u64>, String> {
        let mut seen = BTreeSet::from([0u64]);
        let mut layer = vec![0u64];
        let mut out = vec![0u64];
        while !layer.is_empty() {
            let mut next = Vec::new();
            for &x in &layer {
                for i in 0..self.ids.len() {
                    let bit = 1u64 << i;
                    if within & bit != 0 && x & bit == 0 && self.below[i] & !x == 0 {
                        let y = x | bit;
                        if seen.insert(y) {
                            if seen.len() > SEGMENT_BUDGET {
                                return Err(format!("more than {SEGMENT_BUDGET} initial segments"));
                            }
                            next.push(y);
                            out.push(y);
                        }
                    }
                }
            }
            layer = next;
        }
        Ok(out)
    }
}

fn find_cycle(succ: &[Vec<usize>]) -> Option<Vec<usize>> {
    fn dfs(v: usize, succ: &[Vec<usize>], color: &mut [u8], stack: &mut Vec<usize>) -> Option<Vec<usize>> {
        color[v] = 1;
        stack.push(v);
        for &w in &succ[v] {
            if color[w] == 1 {
                let start = stack.iter().position(|&x| x == w).expect("on stack");
                let mut cycle = stack[start..].to_vec();
                cycle.push(w);
                return Some(cycle);
            }
            if color[w] == 0 {
                if let Some(c) = dfs(w, succ, color, stack) {
                    return Some(c);
                }
            }
        }
        stack.pop();
        color[v] = 2;
        None
    }
    let mut color = vec![0u8; succ.len()];
    for v in 0..succ.len() {
        if color[v] == 0 {
            if let Some(c) = dfs(v, succ, &mut color, &mut Vec::new()) {
                return Some(c);
            }
        }
    }
    None
}

fn topo_order(succ: &[Vec<usize>]) -> Vec<usize> {
    let mut indeg = vec![0usize; succ.len()];
    for s in succ {
        for &w in s {
            indeg[w] += 1;
        }
    }
    let mut ready: Vec<usize> = (0..succ.len()).filter(|&v| indeg[v] == 0).collect();
    let mut out = Vec::new();
    while let Some(v) = ready.pop() {
        out.push(v);
        for &w in &succ[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                ready.push(w);
            }
        }
    }
    out
}

/// σ on every initial segment, recomputed and cross-checked.
struct Analysis {
    order: Order,
    sigma: BTreeMap<u64, State>,
}

fn analyse(dp: &DistributedSpec, pr: &PartialRun) -> Result<Analysis, Verdict> {
    let order = Order::build(pr)?;
    let n = order.ids.len();
    for x in 0..n {
        for y in x + 1..n {
            let (mx, my) = (&order.ids[x], &order.ids[y]);
            if pr.agent[mx] == pr.agent[my]
                && order.below[x] & (1 << y) == 0
                && order.below[y] & (1 << x) == 0
            {
                return Err(Verdict::Invalid(Violation::AgentOrder {
                    agent: pr.agent[mx].clone(),
                    x: mx.clone(),
                    y: my.clone(),
                }));
            }
        }
    }
    let mut stored = BTreeMap::new();
    for (k, s) in &pr.sigma {
        let mask = order
            .mask(k)
            .ok_or_else(|| Verdict::Malformed("sigma names an unknown move".into()))?;
        if !order.is_segment(mask) {
            return Err(Verdict::Malformed(format!(
                "sigma given on {}, which is not an initial segment",
                seg(&order.names(mask))
            )));
        }
        stored.insert(mask, s.clone());
    }
    let Some(init) = stored.get(&0) else {
        return Err(Verdict::Invalid(Violation::Initial {
            reason: "no state is given for the empty segment".into(),
        }));
    };
    if let Err(e) = validate_initial(dp, init) {
        return Err(Verdict::Invalid(Violation::Initial {
            reason: e.to_string(),
        }));
    }
    let segments = order
        .segments(u64::MAX)
        .map_err(|reason| Verdict::Incomplete { reason })?;
    let mut sigma = BTreeMap::from([(0u64, init.clone())]);
    for &x in segments.iter().skip(1) {
        let names = order.names(x);
        for m in order.maximal(x) {
            let y = x & !(1 << m);
            let mv = order.ids[m].clone();
            let from = &sigma[&y];
            let got = match fire_move(dp, pr, from, &mv) {
                Ok(s) => s,
                Err(MoveFailure::NotAnAgent) => {
                    return Err(Verdict::Invalid(Violation::NotAnAgent {
                        segment: names,
                        mv: mv.clone(),
                        agent: pr.agent[&mv].clone(),
                    }))
                }
                Err(MoveFailure::NotAMove(detail)) => {
                    return Err(Verdict::Invalid(Violation::NotAMove {
                        segment: names,
                        mv,
                        detail,
                    }))
                }
                Err(MoveFailure::Run(e)) => {
                    return Err(Verdict::Invalid(Violation::Coherence {
                        segment: names,
                        mv,
                        detail: format!("firing failed: {e}"),
                    }))
                }
            };
            match sigma.get(&x).or_else(|| stored.get(&x)) {
                Some(expected) if !expected.isomorphic(&got) => {
                    return Err(Verdict::Invalid(Violation::Coherence {
                        segment: names,
                        mv,
                        detail: first_difference(expected, &got),
                    }))
                }
                Some(expected) => {
                    let e = expected.clone();
                    sigma.insert(x, e);
                }
                None => {
                    sigma.insert(x, got);
                }
            }
        }
    }
    Ok(Analysis { order, sigma })
}

/// Checks conditions 1 to 4 (4* for moves with recorded update sets).
pub fn check_partial_run(dp: &DistributedSpec, pr: &PartialRun) -> Verdict {
    match analyse(dp, pr) {
        Ok(a) => Verdict::Valid {
            segments: a.sigma.len(),
        },
        Err(v) => v,
    }
}

/// All initial segments of a valid run with their states, smallest first.
pub fn initial_segments(
    dp: &DistributedSpec,
    pr: &PartialRun,
) -> Result<Vec<(BTreeSet<MoveId>, State)>, Verdict> {
    let a = analyse(dp, pr)?;
    let mut out: Vec<_> = a
        .sigma
        .iter()
        .map(|(&m, s)| (a.order.names(m).into_iter().collect::<BTreeSet<_>>(), s.clone()))
        .collect();
    out.sort_by_key(|(k, _)| k.len());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Linearization {
    pub order: Vec<MoveId>,
    /// `states[0]` is `σ(∅)`; `states[i + 1]` follows `order[i]`.
    pub states: Vec<State>,
}

#[derive(Debug, Clone, Default)]
pub struct Linearizations {
    pub items: Vec<Linearization>,
    /// The budget stopped enumeration early; corollary checks are skipped.
    pub partial: bool,
}

/// Every linear order of `segment` compatible with the run's order, fired
/// sequentially from `σ(∅)`.
pub fn linearizations(
    dp: &DistributedSpec,
    pr: &PartialRun,
    segment: &BTreeSet<MoveId>,
    budget: usize,
) -> Result<Linearizations, Verdict> {
    let order = Order::build(pr)?;
    let mask = order
        .mask(segment)
        .ok_or_else(|| Verdict::Malformed("segment names an unknown move".into()))?;
    if !order.is_segment(mask) {
        return Err(Verdict::Malformed(format!(
            "{} is not an initial segment",
            seg(&order.names(mask))
        )));
    }
    let init = pr
        .sigma
        .get(&BTreeSet::new())
        .ok_or_else(|| Verdict::Invalid(Violation::Initial {
            reason: "no state is given for the empty segment".into(),
        }))?
        .clone();
    let mut out = Linearizations::default();
    let mut prefix = Vec::new();
    let mut states = vec![init];
    extend(dp, pr, &order, mask, 0, &mut prefix, &mut states, &mut out, budget)?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn extend(
    dp: &DistributedSpec,
    pr: &PartialRun,
    order: &Order,
    target: u64,
    done: u64,
    prefix: &mut Vec<usize>,
    states: &mut Vec<State>,
    out: &mut Linearizations,
    budget: usize,
) -> Result<(), Verdict> {
    if out.partial {
        return Ok(());
    }
    if done == target {
        if out.items.len() >= budget {
            out.partial = true;
            return Ok(());
        }
        out.items.push(Linearization {
            order: prefix.iter().map(|&i| order.ids[i].clone()).collect(),
            states: states.clone(),
        });
        return Ok(());
    }
    for i in 0..order.ids.len() {
        let bit = 1u64 << i;
        if target & bit == 0 || done & bit != 0 || order.below[i] & !done != 0 {
            continue;
        }
        let mv = &order.ids[i];
        let next = fire_move(dp, pr, states.last().expect("nonempty"), mv).map_err(|f| {
            let detail = match f {
                MoveFailure::NotAnAgent => format!("{} is not an agent", pr.agent[mv]),
                MoveFailure::NotAMove(d) => d,
                MoveFailure::Run(e) => e.to_string(),
            };
            Verdict::Invalid(Violation::Coherence {
                segment: order.names(done | bit),
                mv: mv.clone(),
                detail,
            })
        })?;
        prefix.push(i);
        states.push(next);
        extend(dp, pr, order, target, done | bit, prefix, states, out, budget)?;
        prefix.pop();
        states.pop();
    }
    Ok(())
}

/// All linearizations end in the same state. `None` when enumeration was partial.
pub fn corollary_one(lins: &Linearizations) -> Option<bool> {
    if lins.partial {
        return None;
    }
    let finals: Vec<&State> = lins.items.iter().filter_map(|l| l.states.last()).collect();
    Some(finals.windows(2).all(|w| w[0].isomorphic(w[1])))
}

/// The states visited by the linearizations of `segment` are exactly the
/// states of the initial segments inside it. A predicate then holds at every
/// reachable state of the run iff it holds at every state of every
/// linearization. `None` when enumeration was partial.
pub fn corollary_two(
    dp: &DistributedSpec,
    pr: &PartialRun,
    segment: &BTreeSet<MoveId>,
    lins: &Linearizations,
) -> Result<Option<bool>, Verdict> {
    if lins.partial {
        return Ok(None);
    }
    let reach: Vec<State> = initial_segments(dp, pr)?
        .into_iter()
        .filter(|(k, _)| k.is_subset(segment))
        .map(|(_, s)| s)
        .collect();
    let visited: Vec<&State> = lins.items.iter().flat_map(|l| l.states.iter()).collect();
    let covered = visited.iter().all(|v| reach.iter().any(|r| r.isomorphic(v)));
    let complete = reach.iter().all(|r| visited.iter().any(|v| v.isomorphic(r)));
    Ok(Some(covered && complete))
}

/// Holds iff `pred` is true at every state of every linearization.
pub fn holds_on_linearizations(lins: &Linearizations, pred: impl Fn(&State) -> bool) -> bool {
    lins.items.iter().all(|l| l.states.iter().all(&pred))
}

impl From<RunError> for MoveFailure {
    fn from(e: RunError) -> Self {
        MoveFailure::Run(DistError::Run(e))
    }
}
