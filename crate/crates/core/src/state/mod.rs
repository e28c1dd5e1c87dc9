//! States (static algebras), locations, updates and their firing.
//!
//! A state is stored intensionally: only locations holding a non-default value
//! are kept. Absent relational locations read as `false`, all others as
//! `undef`. The reserve is an unbounded pool of serial-tagged elements; a
//! serial stays in the reserve until an import (or duplication) withdraws it.

mod choice;
mod element;
mod iso;
mod text;
mod update;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use choice::{Chooser, FirstChooser, ScriptedChooser, SeededChooser};
pub use element::Element;
pub use iso::shape_key;
pub use text::{parse_state, LoadOptions, StateParseError};
pub(crate) use text::parse_fact;
pub use update::{Branch, Conflict, Location, Update, UpdateFamily, UpdateSet};

use crate::vocabulary::{
    Builtin, FunctionName, Interpretation, VocabError, Vocabulary, RESERVE, SELF,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error("`{fname}` expects {expected} argument(s), got {got}")]
    Arity {
        fname: String,
        expected: usize,
        got: usize,
    },
    #[error("illegal update of {location}: {reason}")]
    IllegalUpdate { location: String, reason: String },
    #[error("relational location {location} cannot hold non-Boolean value {value}")]
    NonBoolean { location: String, value: String },
    #[error("reserve proviso violated: {0}")]
    Proviso(String),
    #[error("`{0}` is already interpreted and cannot be added by an expansion")]
    NotFresh(String),
    #[error("`{0}` is external; its values come from an oracle, not the state")]
    External(String),
}

/// The reserve: serials `>= next` not listed in `withdrawn_above`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ReservePool {
    next: u64,
    withdrawn_above: BTreeSet<u64>,
}

impl ReservePool {
    pub fn contains(&self, serial: u64) -> bool {
        serial >= self.next && !self.withdrawn_above.contains(&serial)
    }

    /// First serial not yet withdrawn.
    pub fn next(&self) -> u64 {
        self.next
    }

    pub fn withdraw(&mut self, serial: u64) {
        if !self.contains(serial) {
            return;
        }
        if serial == self.next {
            self.next += 1;
            while self.withdrawn_above.remove(&self.next) {
                self.next += 1;
            }
        } else {
            self.withdrawn_above.insert(serial);
        }
    }

    /// Reserve serials in ascending order, starting at the first free one.
    pub fn free_serials(&self) -> impl Iterator<Item = u64> + '_ {
        (self.next..).filter(move |s| !self.withdrawn_above.contains(s))
    }

    /// Marks every serial below `bound` as withdrawn.
    pub fn withdraw_below(&mut self, bound: u64) {
        if bound > self.next {
            self.next = bound;
            self.withdrawn_above.retain(|s| *s >= bound);
            while self.withdrawn_above.remove(&self.next) {
                self.next += 1;
            }
        }
    }
}

/// Outcome of firing an update set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Firing {
    pub state: State,
    /// False when the set was inconsistent (or contradictory) and nothing changed.
    pub fired: bool,
    pub conflicts: Vec<Conflict>,
}

/// Index of the family member that was fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Choice {
    pub index: usize,
    pub of: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyFiring {
    pub firing: Firing,
    pub choice: Option<Choice>,
    pub bottom: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct State {
    vocab: Arc<Vocabulary>,
    table: BTreeMap<Location, Element>,
    reserve: ReservePool,
}

impl State {
    pub fn new(vocab: Arc<Vocabulary>) -> Self {
        Self {
            vocab,
            table: BTreeMap::new(),
            reserve: ReservePool::default(),
        }
    }

    pub fn vocabulary(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn reserve(&self) -> &ReservePool {
        &self.reserve
    }

    pub(crate) fn reserve_mut(&mut self) -> &mut ReservePool {
        &mut self.reserve
    }

    /// Stored (non-default) facts in location order.
    pub fn facts(&self) -> impl Iterator<Item = (&Location, &Element)> {
        self.table.iter()
    }

    pub fn facts_of<'a>(
        &'a self,
        fname: &'a str,
    ) -> impl Iterator<Item = (&'a Location, &'a Element)> + 'a {
        let start = Location::nullary(fname);
        self.table
            .range(start..)
            .take_while(move |(l, _)| l.fname.as_ref() == fname)
    }

    pub fn is_in_reserve(&self, e: &Element) -> bool {
        e.reserve_serial().is_some_and(|s| self.reserve.contains(s))
    }

    pub fn default_for(f: &FunctionName) -> Element {
        if f.is_relation {
            Element::False
        } else {
            Element::Undef
        }
    }

    /// Interprets a table-backed or built-in name. External names read as `undef`
    /// here; evaluation routes them through an oracle instead.
    pub fn apply(&self, f: &FunctionName, args: &[Element]) -> Element {
        match &f.interp {
            Interpretation::Table => {
                if args.iter().any(|a| self.is_in_reserve(a)) {
                    return Self::default_for(f);
                }
                let key = Location {
                    fname: f.name.clone(),
                    args: args.to_vec(),
                };
                self.table
                    .get(&key)
                    .cloned()
                    .unwrap_or_else(|| Self::default_for(f))
            }
            Interpretation::External => Element::Undef,
            Interpretation::Builtin(b) => self.apply_builtin(b, args),
        }
    }

    fn apply_builtin(&self, b: &Builtin, args: &[Element]) -> Element {
        let bools = || -> Option<Vec<bool>> { args.iter().map(Element::as_bool).collect() };
        let ints = || -> Option<(i64, i64)> {
            match args {
                [Element::Int(a), Element::Int(b)] => Some((*a, *b)),
                _ => None,
            }
        };
        let wrap = |v: Option<i64>, m: &Option<i64>| match (v, m) {
            (Some(v), Some(m)) if *m > 0 => Element::Int(v.rem_euclid(*m)),
            (Some(v), _) => Element::Int(v),
            (None, _) => Element::Undef,
        };
        match b {
            Builtin::True => Element::True,
            Builtin::False => Element::False,
            Builtin::Undef => Element::Undef,
            Builtin::Eq => Element::bool(args[0] == args[1]),
            Builtin::And => bools().map_or(Element::Undef, |v| Element::bool(v[0] && v[1])),
            Builtin::Or => bools().map_or(Element::Undef, |v| Element::bool(v[0] || v[1])),
            Builtin::Implies => bools().map_or(Element::Undef, |v| Element::bool(!v[0] || v[1])),
            Builtin::Not => bools().map_or(Element::Undef, |v| Element::bool(!v[0])),
            Builtin::Reserve => Element::bool(self.is_in_reserve(&args[0])),
            Builtin::SelfName => self
                .table
                .get(&Location::nullary(SELF))
                .cloned()
                .unwrap_or(Element::Undef),
            Builtin::Literal(e) => e.clone(),
            Builtin::Add { modulus } => wrap(ints().and_then(|(a, b)| a.checked_add(b)), modulus),
            Builtin::Sub { modulus } => wrap(ints().and_then(|(a, b)| a.checked_sub(b)), modulus),
            Builtin::Mul { modulus } => wrap(ints().and_then(|(a, b)| a.checked_mul(b)), modulus),
            Builtin::Mod => match ints() {
                Some((a, b)) if b != 0 => Element::Int(a.rem_euclid(b)),
                _ => Element::Undef,
            },
            Builtin::Lt => Element::bool(ints().is_some_and(|(a, b)| a < b)),
            Builtin::Le => Element::bool(ints().is_some_and(|(a, b)| a <= b)),
        }
    }

    fn check_arity(f: &FunctionName, got: usize) -> Result<(), StateError> {
        if f.arity != got {
            return Err(StateError::Arity {
                fname: f.name.to_string(),
                expected: f.arity,
                got,
            });
        }
        Ok(())
    }

    /// Reads a location, applying the default-value convention.
    pub fn read(&self, location: &Location) -> Result<Element, StateError> {
        let f = self.vocab.lookup(&location.fname)?;
        Self::check_arity(f, location.args.len())?;
        if f.is_external() {
            return Err(StateError::External(f.name.to_string()));
        }
        Ok(self.apply(f, &location.args))
    }

    /// Elements `x` with `U(x) = true`, ascending. Reserve elements never qualify.
    pub fn extent(&self, universe: &str) -> Vec<Element> {
        self.facts_of(universe)
            .filter(|(l, v)| **v == Element::True && l.args.len() == 1)
            .map(|(l, _)| l.args[0].clone())
            .filter(|e| !self.is_in_reserve(e))
            .collect()
    }

    fn put(&mut self, f: &FunctionName, location: Location, value: Element) {
        if value == Self::default_for(f) {
            self.table.remove(&location);
        } else {
            self.table.insert(location, value);
        }
    }

    /// Sets a table-backed location directly, static names included. Used to
    /// build initial states; rules go through [`State::fire_update_set`].
    pub fn assign(&mut self, location: Location, value: Element) -> Result<(), StateError> {
        let f = self.vocab.lookup(&location.fname)?.clone();
        Self::check_arity(&f, location.args.len())?;
        if f.is_external() {
            return Err(StateError::External(f.name.to_string()));
        }
        if !f.is_table() {
            return Err(StateError::IllegalUpdate {
                location: location.to_string(),
                reason: "logic and built-in names have a fixed interpretation".into(),
            });
        }
        if f.is_relation && !value.is_boolean() {
            return Err(StateError::NonBoolean {
                location: location.to_string(),
                value: value.to_string(),
            });
        }
        self.put(&f, location, value);
        Ok(())
    }

    pub fn with(mut self, location: Location, value: Element) -> Result<State, StateError> {
        self.assign(location, value)?;
        Ok(self)
    }

    /// Fires a single update.
    pub fn fire_update(&self, u: &Update) -> Result<State, StateError> {
        Ok(self.fire_update_set(&UpdateSet::singleton(u.clone()))?.state)
    }

    /// Fires an update set simultaneously. Inconsistent sets change nothing and
    /// report their conflicting locations.
    pub fn fire_update_set(&self, beta: &UpdateSet) -> Result<Firing, StateError> {
        let conflicts = beta.conflicts();
        if !conflicts.is_empty() {
            return Ok(Firing {
                state: self.clone(),
                fired: false,
                conflicts,
            });
        }
        let mut next = self.clone();
        for u in beta.iter().filter(|u| u.location.fname.as_ref() == RESERVE) {
            let [arg] = u.location.args.as_slice() else {
                return Err(StateError::Arity {
                    fname: RESERVE.into(),
                    expected: 1,
                    got: u.location.args.len(),
                });
            };
            if u.value != Element::False {
                return Err(StateError::IllegalUpdate {
                    location: u.location.to_string(),
                    reason: "elements can only be withdrawn from the reserve".into(),
                });
            }
            if let Some(s) = arg.reserve_serial() {
                next.reserve.withdraw(s);
            }
        }
        for u in beta.iter().filter(|u| u.location.fname.as_ref() != RESERVE) {
            let f = self.vocab.lookup(&u.location.fname)?.clone();
            if !f.is_updatable() {
                let reason = if f.is_logic {
                    "logic names cannot be updated"
                } else if f.is_external() {
                    "external functions are governed by the environment"
                } else {
                    "static names cannot be updated"
                };
                return Err(StateError::IllegalUpdate {
                    location: u.location.to_string(),
                    reason: reason.into(),
                });
            }
            next.write_checked(&f, u)?;
        }
        for u in beta.mirrors() {
            let f = self.vocab.lookup(&u.location.fname)?.clone();
            if !f.is_table() {
                return Err(StateError::IllegalUpdate {
                    location: u.location.to_string(),
                    reason: "only table-backed names can be mirrored".into(),
                });
            }
            next.write_checked(&f, u)?;
        }
        Ok(Firing {
            state: next,
            fired: true,
            conflicts: Vec::new(),
        })
    }

    fn write_checked(&mut self, f: &FunctionName, u: &Update) -> Result<(), StateError> {
        Self::check_arity(f, u.location.args.len())?;
        if f.is_relation && !u.value.is_boolean() {
            return Err(StateError::NonBoolean {
                location: u.location.to_string(),
                value: u.value.to_string(),
            });
        }
        if let Some(e) = u
            .location
            .args
            .iter()
            .chain(std::iter::once(&u.value))
            .find(|e| self.is_in_reserve(e))
        {
            return Err(StateError::Proviso(format!(
                "update {u} mentions reserve element {e}"
            )));
        }
        self.put(f, u.location.clone(), u.value.clone());
        Ok(())
    }

    /// Fires one member of a family picked by `chooser`; bottom members and the
    /// empty family leave the state unchanged.
    pub fn fire_family(
        &self,
        gamma: &UpdateFamily,
        chooser: &mut dyn Chooser,
    ) -> Result<FamilyFiring, StateError> {
        if gamma.is_empty() {
            return Ok(FamilyFiring {
                firing: Firing {
                    state: self.clone(),
                    fired: false,
                    conflicts: Vec::new(),
                },
                choice: None,
                bottom: false,
            });
        }
        let of = gamma.len();
        let index = chooser.choose(of).min(of - 1);
        let choice = Some(Choice { index, of });
        match gamma.member(index).expect("index within family") {
            Branch::Set(beta) => Ok(FamilyFiring {
                firing: self.fire_update_set(beta)?,
                choice,
                bottom: false,
            }),
            Branch::Bottom => Ok(FamilyFiring {
                firing: Firing {
                    state: self.clone(),
                    fired: false,
                    conflicts: Vec::new(),
                },
                choice,
                bottom: true,
            }),
        }
    }

    /// Takes the first free element out of the reserve.
    pub fn reserve_withdraw(&self) -> (State, Element) {
        let mut next = self.clone();
        let serial = next.reserve.free_serials().next().expect("reserve is unbounded");
        next.reserve.withdraw(serial);
        (next, Element::Reserve(serial))
    }

    /// Disinterprets every name outside `sub`.
    pub fn reduct(&self, sub: &Vocabulary) -> Result<State, StateError> {
        if let Some(bad) = sub.iter().find(|f| self.vocab.get(&f.name) != Some(f)) {
            return Err(VocabError::NotSubvocabulary(bad.name.to_string()).into());
        }
        let table = self
            .table
            .iter()
            .filter(|(l, _)| sub.contains(&l.fname))
            .map(|(l, v)| (l.clone(), v.clone()))
            .collect();
        Ok(State {
            vocab: Arc::new(sub.clone()),
            table,
            reserve: self.reserve.clone(),
        })
    }

    /// Reduct to the static names.
    pub fn carrier(&self) -> State {
        let statics = self
            .vocab
            .iter()
            .filter(|f| f.is_static)
            .map(|f| f.name.as_ref());
        let sub = self.vocab.restrict(statics).expect("names taken from own vocabulary");
        self.reduct(&sub).expect("restriction is a subvocabulary")
    }

    /// Adds fresh nullary names with fixed values. `Self` is added as the logic
    /// name; anything else becomes a static nullary name.
    pub fn expand(&self, extra: &BTreeMap<String, Element>) -> Result<State, StateError> {
        let mut vocab = (*self.vocab).clone();
        let mut next = self.clone();
        for (name, value) in extra {
            if vocab.contains(name) {
                return Err(StateError::NotFresh(name.clone()));
            }
            if self.is_in_reserve(value) {
                return Err(StateError::Proviso(format!(
                    "expansion {name} = {value} names a reserve element"
                )));
            }
            let f = if name == SELF {
                FunctionName::self_name()
            } else {
                FunctionName::static_fn(name, 0)
            };
            vocab.insert(f.clone())?;
            next.put(&f, Location::nullary(name), value.clone());
        }
        next.vocab = Arc::new(vocab);
        Ok(next)
    }

    /// Same state over a larger vocabulary (new names keep default values).
    pub fn widen(&self, vocab: Arc<Vocabulary>) -> Result<State, StateError> {
        if !self.vocab.is_subvocabulary_of(&vocab) {
            let bad = self
                .vocab
                .iter()
                .find(|f| vocab.get(&f.name) != Some(*f))
                .map(|f| f.name.to_string())
                .unwrap_or_default();
            return Err(VocabError::NotSubvocabulary(bad).into());
        }
        Ok(State {
            vocab,
            table: self.table.clone(),
            reserve: self.reserve.clone(),
        })
    }

    /// Checks the reserve proviso on every stored location.
    pub fn audit_proviso(&self) -> Result<(), StateError> {
        for (loc, value) in &self.table {
            if let Some(e) = loc.args.iter().find(|e| self.is_in_reserve(e)) {
                return Err(StateError::Proviso(format!(
                    "{loc} = {value} has reserve argument {e}"
                )));
            }
            if self.is_in_reserve(value) {
                return Err(StateError::Proviso(format!(
                    "{loc} outputs reserve element {value}"
                )));
            }
        }
        Ok(())
    }

    /// Reserve-tagged elements appearing anywhere in the tables.
    pub fn reserve_origin_elements(&self) -> BTreeSet<Element> {
        self.table
            .iter()
            .flat_map(|(l, v)| l.args.iter().chain(std::iter::once(v)))
            .filter(|e| e.reserve_serial().is_some())
            .cloned()
            .collect()
    }

    /// True iff a bijection of reserve-origin elements (fixing every other
    /// element) maps the tables of `self` onto those of `other`.
    pub fn isomorphic(&self, other: &State) -> bool {
        iso::isomorphic(self, other)
    }

    pub(crate) fn table(&self) -> &BTreeMap<Location, Element> {
        &self.table
    }

    /// Renders the stored facts in the state-file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (l, v) in &self.table {
            out.push_str(&format!("{l} = {v}\n"));
        }
        out
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (l, v)) in self.table.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{l}={v}")?;
        }
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocabulary::make_vocabulary;

    fn n(s: &str) -> Element {
        Element::named(s)
    }

    fn loc(f: &str, args: &[Element]) -> Location {
        Location::new(f, args.to_vec())
    }

    fn phil_state() -> State {
        let vocab = make_vocabulary([
            FunctionName::dynamic("Fork", 1),
            FunctionName::dynamic("Mode", 1),
            FunctionName::dynamic("Parent", 1),
            FunctionName::static_relation("Edge", 2),
            FunctionName::reserve(),
        ])
        .unwrap();
        let mut s = State::new(Arc::new(vocab));
        for p in ["p0", "p1", "p2"] {
            s.assign(loc("Fork", &[n(p)]), n("down")).unwrap();
            s.assign(loc("Mode", &[n(p)]), n("think")).unwrap();
        }
        s
    }

    #[test]
    fn read_stored_and_default_values() {
        let s = phil_state();
        assert_eq!(s.read(&loc("Fork", &[n("p0")])).unwrap(), n("down"));
        assert_eq!(
            s.read(&loc("Edge", &[Element::Undef, Element::Undef])).unwrap(),
            Element::False
        );
        assert!(matches!(
            s.read(&loc("Nope", &[])),
            Err(StateError::Vocab(VocabError::Unknown(_)))
        ));
    }

    #[test]
    fn reserve_arguments_read_as_defaults() {
        let s = phil_state();
        let (s, r0) = s.reserve_withdraw();
        // r0 is withdrawn; r1 is still in the reserve
        let r1 = Element::Reserve(1);
        assert!(s.is_in_reserve(&r1));
        assert_eq!(s.read(&loc("Parent", &[r1.clone()])).unwrap(), Element::Undef);
        assert_eq!(s.read(&loc("Edge", &[r1.clone(), n("p0")])).unwrap(), Element::False);
        assert_eq!(s.read(&loc("Parent", &[r0])).unwrap(), Element::Undef);
        assert_eq!(s.read(&loc("Reserve", &[r1])).unwrap(), Element::True);
    }

    #[test]
    fn write_then_read_and_identity_write() {
        let s = phil_state();
        let s2 = s
            .fire_update(&Update::new(loc("Mode", &[n("p0")]), n("eat")))
            .unwrap();
        assert_eq!(s2.read(&loc("Mode", &[n("p0")])).unwrap(), n("eat"));
        let same = s
            .fire_update(&Update::new(loc("Mode", &[n("p0")]), n("think")))
            .unwrap();
        assert_eq!(same, s);
    }

    #[test]
    fn updating_logic_or_static_names_is_illegal() {
        let s = phil_state();
        let err = s
            .fire_update(&Update::new(loc("=", &[n("a"), n("b")]), Element::True))
            .unwrap_err();
        assert!(matches!(err, StateError::IllegalUpdate { .. }));
        let err = s
            .fire_update(&Update::new(loc("Edge", &[n("a"), n("b")]), Element::True))
            .unwrap_err();
        assert!(matches!(err, StateError::IllegalUpdate { .. }));
    }

    #[test]
    fn fire_consistent_set_changes_exactly_its_locations() {
        let s = phil_state();
        let beta: UpdateSet = [
            Update::new(loc("Fork", &[n("p0")]), n("up")),
            Update::new(loc("Fork", &[n("p1")]), n("up")),
            Update::new(loc("Mode", &[n("p0")]), n("eat")),
        ]
        .into_iter()
        .collect();
        let f = s.fire_update_set(&beta).unwrap();
        assert!(f.fired);
        let t = f.state;
        assert_eq!(t.read(&loc("Fork", &[n("p0")])).unwrap(), n("up"));
        assert_eq!(t.read(&loc("Fork", &[n("p1")])).unwrap(), n("up"));
        assert_eq!(t.read(&loc("Fork", &[n("p2")])).unwrap(), n("down"));
        assert_eq!(t.read(&loc("Mode", &[n("p0")])).unwrap(), n("eat"));
        assert_eq!(t.read(&loc("Mode", &[n("p1")])).unwrap(), n("think"));
    }

    #[test]
    fn inconsistent_and_empty_sets() {
        let s = phil_state();
        let bad: UpdateSet = [
            Update::new(loc("Mode", &[n("p0")]), n("b")),
            Update::new(loc("Mode", &[n("p0")]), n("c")),
        ]
        .into_iter()
        .collect();
        let f = s.fire_update_set(&bad).unwrap();
        assert!(!f.fired);
        assert_eq!(f.state, s);
        assert_eq!(f.conflicts[0].location, loc("Mode", &[n("p0")]));
        let e = s.fire_update_set(&UpdateSet::new()).unwrap();
        assert!(e.fired);
        assert_eq!(e.state, s);
    }

    #[test]
    fn fire_family_empty_singleton_and_bottom() {
        let s = phil_state();
        let r = s.fire_family(&UpdateFamily::empty(), &mut FirstChooser).unwrap();
        assert_eq!(r.firing.state, s);
        assert!(r.choice.is_none());
        let beta = UpdateSet::singleton(Update::new(loc("Mode", &[n("p0")]), n("eat")));
        let r = s
            .fire_family(&UpdateFamily::singleton(beta.clone()), &mut SeededChooser::new(3))
            .unwrap();
        assert_eq!(r.firing.state, s.fire_update_set(&beta).unwrap().state);
        let r = s.fire_family(&UpdateFamily::bottom(), &mut FirstChooser).unwrap();
        assert!(r.bottom);
        assert_eq!(r.firing.state, s);
    }

    #[test]
    fn seeded_family_firing_replays() {
        let s = phil_state();
        let mut fam = UpdateFamily::empty();
        for v in ["a", "b", "c"] {
            fam.insert(UpdateSet::singleton(Update::new(loc("Mode", &[n("p0")]), n(v))));
        }
        let a = s.fire_family(&fam, &mut SeededChooser::new(9)).unwrap();
        let b = s.fire_family(&fam, &mut SeededChooser::new(9)).unwrap();
        assert_eq!(a.choice, b.choice);
        assert_eq!(a.firing.state, b.firing.state);
    }

    #[test]
    fn reserve_withdraw_allocates_serially() {
        let s = phil_state();
        let (s, r0) = s.reserve_withdraw();
        let (s, r1) = s.reserve_withdraw();
        assert_eq!(r0, Element::Reserve(0));
        assert_eq!(r1, Element::Reserve(1));
        assert_ne!(r0, r1);
        assert_eq!(s.read(&loc("Reserve", &[r0])).unwrap(), Element::False);
        s.audit_proviso().unwrap();
    }

    #[test]
    fn reserve_pool_handles_out_of_order_withdrawal() {
        let mut p = ReservePool::default();
        p.withdraw(2);
        assert!(p.contains(0) && p.contains(1) && !p.contains(2));
        p.withdraw(0);
        p.withdraw(1);
        assert_eq!(p.next(), 3);
        assert_eq!(p.free_serials().next(), Some(3));
    }

    #[test]
    fn writes_naming_reserve_elements_violate_the_proviso() {
        let s = phil_state();
        let r = Element::Reserve(0);
        let err = s
            .fire_update(&Update::new(loc("Parent", &[r.clone()]), n("p0")))
            .unwrap_err();
        assert!(matches!(err, StateError::Proviso(_)));
        // withdrawing it in the same set makes the write legal
        let beta: UpdateSet = [
            Update::new(loc("Reserve", &[r.clone()]), Element::False),
            Update::new(loc("Parent", &[r.clone()]), n("p0")),
        ]
        .into_iter()
        .collect();
        let t = s.fire_update_set(&beta).unwrap().state;
        assert_eq!(t.read(&loc("Parent", &[r])).unwrap(), n("p0"));
        t.audit_proviso().unwrap();
    }

    #[test]
    fn reduct_and_expand() {
        let s = phil_state();
        let carrier = s.carrier();
        assert!(carrier.vocabulary().iter().all(|f| f.is_static));
        assert_eq!(carrier.facts().count(), 0);

        let mut extra = BTreeMap::new();
        extra.insert("v".to_string(), n("a"));
        let e = s.expand(&extra).unwrap();
        assert_eq!(e.read(&loc("v", &[])).unwrap(), n("a"));
        let back = e.reduct(s.vocabulary()).unwrap();
        assert_eq!(back, s);

        let mut clash = BTreeMap::new();
        clash.insert("Fork".to_string(), n("a"));
        assert!(matches!(s.expand(&clash), Err(StateError::NotFresh(_))));
    }

    #[test]
    fn view_style_reduct_then_self_expansion() {
        let s = phil_state();
        let sub = s.vocabulary().restrict(["Fork", "Mode"]).unwrap();
        let mut extra = BTreeMap::new();
        extra.insert(SELF.to_string(), n("p1"));
        let v = s.reduct(&sub).unwrap().expand(&extra).unwrap();
        let f = v.vocabulary().get(SELF).unwrap().clone();
        assert_eq!(v.apply(&f, &[]), n("p1"));
        assert!(!v.vocabulary().contains("Parent"));
    }

    #[test]
    fn relation_values_must_be_boolean() {
        let mut s = phil_state();
        let err = s.assign(loc("Edge", &[n("a"), n("b")]), n("c")).unwrap_err();
        assert!(matches!(err, StateError::NonBoolean { .. }));
    }
}
