//! Term and guard evaluation, and the update-set semantics of rules.
//!
//! Three entry points cover the rule semantics:
//! - [`Evaluator::updates`] for choice-free rules (a single update set);
//! - [`Evaluator::nupdates`], the family defined by direct induction;
//! - [`Evaluator::nupdates_global`], the family obtained by enumerating
//!   global choice functions, where ⊥ marks contradictory members.
//!
//! Imports draw reserve elements through an [`Allocator`] keyed by the
//! import variable and the values of the enclosing explicit declarations.

mod normal;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use normal::normalize_guarded;

use crate::state::{Element, Location, State, Update, UpdateFamily, UpdateSet};
use crate::syntax::{Guard, Quantifier, Range, Rule, Term};
use crate::vocabulary::{FunctionName, Interpretation, Symbol, RESERVE};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("unknown function name `{0}`")]
    UnknownName(String),
    #[error("`{fname}` expects {expected} argument(s), got {got}")]
    Arity {
        fname: String,
        expected: usize,
        got: usize,
    },
    #[error("guard `{guard}` evaluated to non-Boolean {value}")]
    NonBoolean { guard: String, value: String },
    #[error("rule contains choose; use the family semantics")]
    Nondeterministic,
    #[error("rule is not basic (binders or quantified guards present)")]
    NotBasic,
    #[error("cannot duplicate {0}")]
    Duplicate(String),
    #[error("external query {query} failed: {reason}")]
    External { query: String, reason: String },
    #[error("update family exceeds the budget of {0} members")]
    FamilyTooLarge(usize),
    #[error("update of `{0}`, which is not updatable")]
    IllegalSubject(String),
}

pub type EvalResult<T> = Result<T, EvalError>;

/// Source of values for external functions during one step.
pub trait Externals {
    fn query(&mut self, f: &FunctionName, args: &[Element]) -> Result<Element, String>;
}

/// Answers every external query with `undef`.
#[derive(Debug, Clone, Copy, Default)]
pub struct UndefExternals;

impl Externals for UndefExternals {
    fn query(&mut self, _f: &FunctionName, _args: &[Element]) -> Result<Element, String> {
        Ok(Element::Undef)
    }
}

/// Variable bindings plus the values of enclosing explicit declarations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Env {
    vars: Vec<(Symbol, Element)>,
    decls: Vec<Element>,
}

impl Env {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&self, v: &Symbol, e: Element) -> Env {
        let mut next = self.clone();
        next.vars.push((v.clone(), e));
        next
    }

    /// Binds an explicitly declared variable; its value joins the allocator key.
    pub fn declare(&self, v: &Symbol, e: Element) -> Env {
        let mut next = self.bind(v, e.clone());
        next.decls.push(e);
        next
    }

    pub fn get(&self, v: &str) -> Option<&Element> {
        self.vars
            .iter()
            .rev()
            .find(|(k, _)| k.as_ref() == v)
            .map(|(_, e)| e)
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, Element)>) -> Env {
        let mut env = Env::new();
        for (k, e) in pairs {
            env = env.bind(&crate::vocabulary::sym(k), e);
        }
        env
    }
}

/// Order in which the allocator hands out reserve serials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AllocOrder {
    /// Lowest free serial first, in order of first use.
    #[default]
    Canonical,
    /// Pseudo-random free serials; results are isomorphic to the canonical ones.
    Seeded(u64),
}

pub type AllocKey = (Symbol, Vec<Element>);

/// Injective map from (variable, declared-value tuple) to reserve elements.
#[derive(Debug, Clone)]
pub struct Allocator {
    order: AllocOrder,
    rng: Option<ChaCha8Rng>,
    assigned: BTreeMap<AllocKey, Element>,
    used: BTreeSet<u64>,
}

impl Allocator {
    pub fn new(order: AllocOrder) -> Self {
        let rng = match order {
            AllocOrder::Canonical => None,
            AllocOrder::Seeded(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        Self {
            order,
            rng,
            assigned: BTreeMap::new(),
            used: BTreeSet::new(),
        }
    }

    pub fn order(&self) -> AllocOrder {
        self.order
    }

    pub fn assignments(&self) -> &BTreeMap<AllocKey, Element> {
        &self.assigned
    }

    /// Serials handed out so far, including excluded ones.
    pub fn used(&self) -> &BTreeSet<u64> {
        &self.used
    }

    /// Never hands out `serials`; used when several evaluations share one step.
    pub fn exclude(&mut self, serials: impl IntoIterator<Item = u64>) {
        self.used.extend(serials);
    }

    fn get(&mut self, state: &State, key: AllocKey) -> Element {
        if let Some(e) = self.assigned.get(&key) {
            return e.clone();
        }
        let skip = match &mut self.rng {
            None => 0,
            Some(rng) => rng.gen_range(0..16),
        };
        let serial = state
            .reserve()
            .free_serials()
            .filter(|s| !self.used.contains(s))
            .nth(skip)
            .expect("reserve is unbounded");
        self.used.insert(serial);
        let e = Element::Reserve(serial);
        self.assigned.insert(key, e.clone());
        e
    }
}

/// Locations and universes an evaluation looked at.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReadLog {
    pub locations: BTreeSet<Location>,
    /// Universes whose whole extent was enumerated.
    pub extents: BTreeSet<Symbol>,
    /// Reserve membership was tested or an element was allocated.
    pub reserve: bool,
}

const DEFAULT_FAMILY_BUDGET: usize = 1 << 16;

/// Key of a choice point in global-choice mode.
type ChoiceKey = (Symbol, Vec<Element>);

/// Control flow of the global-choice enumeration.
enum Flow {
    Need { key: ChoiceKey, range: Vec<Element> },
    Fail(EvalError),
}

impl From<EvalError> for Flow {
    fn from(e: EvalError) -> Self {
        Flow::Fail(e)
    }
}

/// `None` is ⊥.
type Branch = Option<UpdateSet>;

pub struct Evaluator<'a> {
    state: &'a State,
    externals: &'a mut dyn Externals,
    alloc: Allocator,
    reads: Option<ReadLog>,
    budget: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(state: &'a State, externals: &'a mut dyn Externals) -> Self {
        Self {
            state,
            externals,
            alloc: Allocator::new(AllocOrder::Canonical),
            reads: None,
            budget: DEFAULT_FAMILY_BUDGET,
        }
    }

    pub fn with_alloc_order(mut self, order: AllocOrder) -> Self {
        self.alloc = Allocator::new(order);
        self
    }

    pub fn with_allocator(mut self, alloc: Allocator) -> Self {
        self.alloc = alloc;
        self
    }

    pub fn with_read_log(mut self) -> Self {
        self.reads = Some(ReadLog::default());
        self
    }

    pub fn with_family_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn state(&self) -> &State {
        self.state
    }

    pub fn allocator(&self) -> &Allocator {
        &self.alloc
    }

    pub fn into_allocator(self) -> Allocator {
        self.alloc
    }

    pub fn take_reads(&mut self) -> ReadLog {
        self.reads.take().unwrap_or_default()
    }

    fn log_location(&mut self, f: &FunctionName, args: &[Element]) {
        if let Some(log) = &mut self.reads {
            log.locations.insert(Location {
                fname: f.name.clone(),
                args: args.to_vec(),
            });
        }
    }

    fn log_extent(&mut self, u: &Symbol) {
        if let Some(log) = &mut self.reads {
            log.extents.insert(u.clone());
        }
    }

    fn log_reserve(&mut self) {
        if let Some(log) = &mut self.reads {
            log.reserve = true;
        }
    }

    fn lookup(&self, name: &str) -> EvalResult<FunctionName> {
        self.state
            .vocabulary()
            .get(name)
            .cloned()
            .ok_or_else(|| EvalError::UnknownName(name.to_string()))
    }

    // ---- terms and guards ----

    pub fn eval_term(&mut self, env: &Env, t: &Term) -> EvalResult<Element> {
        match t {
            Term::Var(v) => env
                .get(v)
                .cloned()
                .ok_or_else(|| EvalError::Unbound(v.to_string())),
            Term::App(f, args) => {
                let fname = self.lookup(f)?;
                if fname.arity != args.len() {
                    return Err(EvalError::Arity {
                        fname: f.to_string(),
                        expected: fname.arity,
                        got: args.len(),
                    });
                }
                let vals = args
                    .iter()
                    .map(|a| self.eval_term(env, a))
                    .collect::<EvalResult<Vec<_>>>()?;
                self.apply(&fname, &vals)
            }
        }
    }

    fn apply(&mut self, f: &FunctionName, args: &[Element]) -> EvalResult<Element> {
        match &f.interp {
            Interpretation::External => {
                let v = self.externals.query(f, args).map_err(|reason| EvalError::External {
                    query: Location {
                        fname: f.name.clone(),
                        args: args.to_vec(),
                    }
                    .to_string(),
                    reason,
                })?;
                if f.is_relation && !v.is_boolean() {
                    return Err(EvalError::External {
                        query: f.name.to_string(),
                        reason: format!("relation answered with non-Boolean {v}"),
                    });
                }
                Ok(v)
            }
            Interpretation::Table => {
                self.log_location(f, args);
                Ok(self.state.apply(f, args))
            }
            Interpretation::Builtin(crate::vocabulary::Builtin::Reserve) => {
                self.log_reserve();
                Ok(self.state.apply(f, args))
            }
            Interpretation::Builtin(crate::vocabulary::Builtin::SelfName) => {
                self.log_location(f, args);
                Ok(self.state.apply(f, args))
            }
            Interpretation::Builtin(_) => Ok(self.state.apply(f, args)),
        }
    }

    pub fn eval_guard(&mut self, env: &Env, g: &Guard) -> EvalResult<bool> {
        match g {
            Guard::Atom(t) => {
                let v = self.eval_term(env, t)?;
                v.as_bool().ok_or_else(|| EvalError::NonBoolean {
                    guard: crate::syntax::term_to_string(t),
                    value: v.to_string(),
                })
            }
            Guard::Not(a) => Ok(!self.eval_guard(env, a)?),
            Guard::And(a, b) => {
                let x = self.eval_guard(env, a)?;
                let y = self.eval_guard(env, b)?;
                Ok(x && y)
            }
            Guard::Or(a, b) => {
                let x = self.eval_guard(env, a)?;
                let y = self.eval_guard(env, b)?;
                Ok(x || y)
            }
            Guard::Implies(a, b) => {
                let x = self.eval_guard(env, a)?;
                let y = self.eval_guard(env, b)?;
                Ok(!x || y)
            }
            Guard::Quant {
                kind,
                var,
                universe,
                body,
            } => {
                let extent = self.extent(universe);
                let mut result = matches!(kind, Quantifier::Forall);
                for a in extent {
                    let holds = self.eval_guard(&env.bind(var, a), body)?;
                    match kind {
                        Quantifier::Exists if holds => result = true,
                        Quantifier::Forall if !holds => result = false,
                        _ => {}
                    }
                }
                Ok(result)
            }
        }
    }

    pub fn extent(&mut self, universe: &Symbol) -> Vec<Element> {
        self.log_extent(universe);
        self.state.extent(universe)
    }

    fn range_of(&mut self, env: &Env, range: &Range) -> EvalResult<(Vec<Element>, bool)> {
        match range {
            Range::Universe(u) => Ok((self.extent(u), true)),
            Range::Singleton(t) => Ok((vec![self.eval_term(env, t)?], false)),
        }
    }

    fn update_of(
        &mut self,
        env: &Env,
        subject: &Symbol,
        args: &[Term],
        value: &Term,
    ) -> EvalResult<Update> {
        let f = self.lookup(subject)?;
        if !f.is_updatable() {
            return Err(EvalError::IllegalSubject(subject.to_string()));
        }
        let args = args
            .iter()
            .map(|a| self.eval_term(env, a))
            .collect::<EvalResult<Vec<_>>>()?;
        let value = self.eval_term(env, value)?;
        Ok(Update::new(
            Location {
                fname: subject.clone(),
                args,
            },
            value,
        ))
    }

    fn import_element(&mut self, env: &Env, var: &Symbol) -> (Element, Update) {
        self.log_reserve();
        let a = self.alloc.get(self.state, (var.clone(), env.decls.clone()));
        let withdraw = Update::new(Location::new(RESERVE, vec![a.clone()]), Element::False);
        (a, withdraw)
    }

    /// Reserve withdrawal plus the mirrored locations for `duplicate t as v`.
    fn duplication(&mut self, env: &Env, term: &Term, var: &Symbol) -> EvalResult<(Element, UpdateSet)> {
        let a = self.eval_term(env, term)?;
        match &a {
            Element::Undef => return Err(EvalError::Duplicate("undef".into())),
            Element::True | Element::False | Element::Int(_) => {
                return Err(EvalError::Duplicate(format!("background element {a}")))
            }
            e if self.state.is_in_reserve(e) => {
                return Err(EvalError::Duplicate(format!("reserve element {e}")))
            }
            _ => {}
        }
        let (copy, withdraw) = self.import_element(env, var);
        let mut set = UpdateSet::singleton(withdraw);
        let vocab = self.state.vocabulary().clone();
        for (loc, value) in self.state.facts() {
            let positions: Vec<usize> = loc
                .args
                .iter()
                .enumerate()
                .filter(|(_, x)| **x == a)
                .map(|(i, _)| i)
                .collect();
            if positions.is_empty() {
                continue;
            }
            let Some(f) = vocab.get(&loc.fname) else { continue };
            if !f.is_table() {
                continue;
            }
            for mask in 1u64..(1u64 << positions.len()) {
                let mut args = loc.args.clone();
                for (bit, &p) in positions.iter().enumerate() {
                    if mask & (1 << bit) != 0 {
                        args[p] = copy.clone();
                    }
                }
                let u = Update::new(
                    Location {
                        fname: loc.fname.clone(),
                        args,
                    },
                    value.clone(),
                );
                if f.is_updatable() {
                    set.insert(u);
                } else {
                    set.insert_mirror(u);
                }
            }
        }
        if let Some(log) = &mut self.reads {
            log.locations.extend(
                self.state
                    .facts()
                    .filter(|(l, _)| l.mentions(&a))
                    .map(|(l, _)| l.clone()),
            );
        }
        Ok((copy, set))
    }

    // ---- deterministic semantics ----

    /// The update set of a choice-free rule.
    pub fn updates(&mut self, r: &Rule, env: &Env) -> EvalResult<UpdateSet> {
        match r {
            Rule::Update {
                subject,
                args,
                value,
            } => Ok(UpdateSet::singleton(self.update_of(env, subject, args, value)?)),
            Rule::Block(rs) => {
                let mut out = UpdateSet::new();
                for x in rs {
                    out.extend(self.updates(x, env)?);
                }
                Ok(out)
            }
            Rule::Cond { clauses, otherwise } => {
                for (g, body) in clauses {
                    if self.eval_guard(env, g)? {
                        return self.updates(body, env);
                    }
                }
                match otherwise {
                    Some(o) => self.updates(o, env),
                    None => Ok(UpdateSet::new()),
                }
            }
            Rule::Import { var, body } => {
                let (a, withdraw) = self.import_element(env, var);
                let mut out = UpdateSet::singleton(withdraw);
                out.extend(self.updates(body, &env.bind(var, a))?);
                Ok(out)
            }
            Rule::Choose { .. } => Err(EvalError::Nondeterministic),
            Rule::Decl { var, range, body } => {
                let (values, _) = self.range_of(env, range)?;
                let mut out = UpdateSet::new();
                for a in values {
                    out.extend(self.updates(body, &env.declare(var, a))?);
                }
                Ok(out)
            }
            Rule::Duplicate { term, var, body } => {
                let (copy, mut out) = self.duplication(env, term, var)?;
                out.extend(self.updates(body, &env.bind(var, copy))?);
                Ok(out)
            }
            Rule::Sugar(_) => self.updates(&crate::syntax::desugar(r), env),
        }
    }

    // ---- direct induction ----

    fn product(&self, a: UpdateFamily, b: UpdateFamily) -> EvalResult<UpdateFamily> {
        let mut out = UpdateFamily::empty();
        for x in a.sets.iter() {
            for y in b.sets.iter() {
                out.insert(x.clone().union(y));
                if out.len() > self.budget {
                    return Err(EvalError::FamilyTooLarge(self.budget));
                }
            }
        }
        Ok(out)
    }

    fn extend_family(family: UpdateFamily, extra: &UpdateSet) -> UpdateFamily {
        let mut out = UpdateFamily::empty();
        for s in family.sets {
            out.insert(s.union(extra));
        }
        out
    }

    /// The family of a rule by direct induction; never contains ⊥.
    pub fn nupdates(&mut self, r: &Rule, env: &Env) -> EvalResult<UpdateFamily> {
        match r {
            Rule::Update { .. } => Ok(UpdateFamily::singleton(self.updates(r, env)?)),
            Rule::Block(rs) => {
                let mut acc = UpdateFamily::singleton(UpdateSet::new());
                for x in rs {
                    let f = self.nupdates(x, env)?;
                    acc = self.product(acc, f)?;
                }
                Ok(acc)
            }
            Rule::Cond { clauses, otherwise } => {
                for (g, body) in clauses {
                    if self.eval_guard(env, g)? {
                        return self.nupdates(body, env);
                    }
                }
                match otherwise {
                    Some(o) => self.nupdates(o, env),
                    None => Ok(UpdateFamily::singleton(UpdateSet::new())),
                }
            }
            Rule::Import { var, body } => {
                let (a, withdraw) = self.import_element(env, var);
                let f = self.nupdates(body, &env.bind(var, a))?;
                Ok(Self::extend_family(f, &UpdateSet::singleton(withdraw)))
            }
            Rule::Choose {
                var,
                universe,
                qualifier,
                body,
            } => {
                let mut out = UpdateFamily::empty();
                for a in self.extent(universe) {
                    let inner = env.bind(var, a);
                    if let Some(q) = qualifier {
                        if !self.eval_guard(&inner, q)? {
                            continue;
                        }
                    }
                    out.merge(self.nupdates(body, &inner)?);
                    if out.len() > self.budget {
                        return Err(EvalError::FamilyTooLarge(self.budget));
                    }
                }
                Ok(out)
            }
            Rule::Decl { var, range, body } => {
                let (values, _) = self.range_of(env, range)?;
                let mut acc = UpdateFamily::singleton(UpdateSet::new());
                for a in values {
                    let f = self.nupdates(body, &env.declare(var, a))?;
                    acc = self.product(acc, f)?;
                }
                Ok(acc)
            }
            Rule::Duplicate { term, var, body } => {
                let (copy, extra) = self.duplication(env, term, var)?;
                let f = self.nupdates(body, &env.bind(var, copy))?;
                Ok(Self::extend_family(f, &extra))
            }
            Rule::Sugar(_) => self.nupdates(&crate::syntax::desugar(r), env),
        }
    }

    // ---- global choice ----

    /// The family of `Updates(R, S, ξ)` over all global choice functions ξ.
    pub fn nupdates_global(&mut self, r: &Rule, env: &Env) -> EvalResult<UpdateFamily> {
        let mut out = UpdateFamily::empty();
        let mut stack: Vec<BTreeMap<ChoiceKey, Element>> = vec![BTreeMap::new()];
        while let Some(xi) = stack.pop() {
            match self.global(r, env, &xi) {
                Ok(Some(set)) => out.insert(set),
                Ok(None) => out.contains_bottom = true,
                Err(Flow::Fail(e)) => return Err(e),
                Err(Flow::Need { key, range }) => {
                    for a in range.into_iter().rev() {
                        let mut next = xi.clone();
                        next.insert(key.clone(), a);
                        stack.push(next);
                    }
                }
            }
            if out.len() > self.budget {
                return Err(EvalError::FamilyTooLarge(self.budget));
            }
        }
        Ok(out)
    }

    fn global(
        &mut self,
        r: &Rule,
        env: &Env,
        xi: &BTreeMap<ChoiceKey, Element>,
    ) -> Result<Branch, Flow> {
        match r {
            Rule::Update { .. } => Ok(Some(self.updates(r, env)?)),
            Rule::Block(rs) => {
                let mut out = UpdateSet::new();
                for x in rs {
                    match self.global(x, env, xi)? {
                        Some(s) => out.extend(s),
                        None => return Ok(None),
                    }
                }
                Ok(Some(out))
            }
            Rule::Cond { clauses, otherwise } => {
                for (g, body) in clauses {
                    if self.eval_guard(env, g)? {
                        return self.global(body, env, xi);
                    }
                }
                match otherwise {
                    Some(o) => self.global(o, env, xi),
                    None => Ok(Some(UpdateSet::new())),
                }
            }
            Rule::Import { var, body } => {
                let (a, withdraw) = self.import_element(env, var);
                Ok(self.global(body, &env.bind(var, a), xi)?.map(|mut s| {
                    s.insert(withdraw);
                    s
                }))
            }
            Rule::Choose {
                var,
                universe,
                qualifier,
                body,
            } => {
                let range = self.extent(universe);
                if range.is_empty() {
                    return Ok(None);
                }
                let key = (var.clone(), env.decls.clone());
                let Some(a) = xi.get(&key) else {
                    return Err(Flow::Need { key, range });
                };
                let inner = env.bind(var, a.clone());
                if let Some(q) = qualifier {
                    if !self.eval_guard(&inner, q)? {
                        return Ok(None);
                    }
                }
                self.global(body, &inner, xi)
            }
            Rule::Decl { var, range, body } => {
                let (values, _) = self.range_of(env, range)?;
                let mut out = UpdateSet::new();
                for a in values {
                    match self.global(body, &env.declare(var, a), xi)? {
                        Some(s) => out.extend(s),
                        None => return Ok(None),
                    }
                }
                Ok(Some(out))
            }
            Rule::Duplicate { term, var, body } => {
                let (copy, extra) = self.duplication(env, term, var)?;
                Ok(self
                    .global(body, &env.bind(var, copy), xi)?
                    .map(|s| s.union(&extra)))
            }
            Rule::Sugar(_) => self.global(&crate::syntax::desugar(r), env, xi),
        }
    }
}

/// Updates of a choice-free rule at `state` with no externals.
pub fn updates(r: &Rule, state: &State) -> EvalResult<UpdateSet> {
    Evaluator::new(state, &mut UndefExternals).updates(r, &Env::new())
}

/// Direct-induction family at `state` with no externals.
pub fn nupdates(r: &Rule, state: &State) -> EvalResult<UpdateFamily> {
    Evaluator::new(state, &mut UndefExternals).nupdates(r, &Env::new())
}

/// Global-choice family at `state` with no externals.
pub fn nupdates_global(r: &Rule, state: &State) -> EvalResult<UpdateFamily> {
    Evaluator::new(state, &mut UndefExternals).nupdates_global(r, &Env::new())
}

pub fn eval_term(state: &State, env: &Env, t: &Term) -> EvalResult<Element> {
    Evaluator::new(state, &mut UndefExternals).eval_term(env, t)
}

pub fn eval_guard(state: &State, env: &Env, g: &Guard) -> EvalResult<bool> {
    Evaluator::new(state, &mut UndefExternals).eval_guard(env, g)
}

/// Executes `duplicate t as v R0` and returns its update set.
pub fn duplicate_exec(state: &State, t: &Term, v: &Symbol, body: &Rule) -> EvalResult<UpdateSet> {
    let r = Rule::Duplicate {
        term: t.clone(),
        var: v.clone(),
        body: Box::new(body.clone()),
    };
    updates(&r, state)
}

/// Successor states of firing every member of `family` at `state`.
///
/// With `bottom_as_noop`, a ⊥ member contributes `state` itself. Without it,
/// ⊥ members are dropped (⊥ read as the empty family); a family left with no
/// members then also yields `state`, since firing the empty family does
/// nothing.
pub fn successor_states(
    state: &State,
    family: &UpdateFamily,
    bottom_as_noop: bool,
) -> Result<Vec<State>, crate::state::StateError> {
    let mut out = Vec::new();
    for s in &family.sets {
        out.push(state.fire_update_set(s)?.state);
    }
    if (family.contains_bottom && bottom_as_noop) || out.is_empty() {
        out.push(state.clone());
    }
    Ok(out)
}
