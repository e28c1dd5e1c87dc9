use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::Element;
use crate::vocabulary::Symbol;

/// A function name paired with an argument tuple.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub fname: Symbol,
    pub args: Vec<Element>,
}

impl Location {
    pub fn new(fname: &str, args: Vec<Element>) -> Self {
        Self {
            fname: fname.into(),
            args,
        }
    }

    pub fn nullary(fname: &str) -> Self {
        Self::new(fname, Vec::new())
    }

    pub fn mentions(&self, e: &Element) -> bool {
        self.args.contains(e)
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.fname)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Update {
    pub location: Location,
    pub value: Element,
}

impl Update {
    pub fn new(location: Location, value: Element) -> Self {
        Self { location, value }
    }
}

impl fmt::Display for Update {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} := {}", self.location, self.value)
    }
}

/// A location that received more than one value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Conflict {
    pub location: Location,
    pub values: BTreeSet<Element>,
}

impl fmt::Display for Conflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <- {{", self.location)?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("}")
    }
}

/// A set of updates fired simultaneously.
///
/// `mirrors` holds writes to static tables produced by duplication; no rule can
/// write a static name directly, so for every other construct it stays empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UpdateSet {
    updates: BTreeSet<Update>,
    mirrors: BTreeSet<Update>,
}

impl UpdateSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(u: Update) -> Self {
        let mut s = Self::new();
        s.insert(u);
        s
    }

    pub fn insert(&mut self, u: Update) {
        self.updates.insert(u);
    }

    pub fn insert_mirror(&mut self, u: Update) {
        self.mirrors.insert(u);
    }

    pub fn extend(&mut self, other: UpdateSet) {
        self.updates.extend(other.updates);
        self.mirrors.extend(other.mirrors);
    }

    pub fn union(mut self, other: &UpdateSet) -> UpdateSet {
        self.updates.extend(other.updates.iter().cloned());
        self.mirrors.extend(other.mirrors.iter().cloned());
        self
    }

    pub fn len(&self) -> usize {
        self.updates.len() + self.mirrors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.updates.is_empty() && self.mirrors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Update> {
        self.updates.iter()
    }

    pub fn mirrors(&self) -> impl Iterator<Item = &Update> {
        self.mirrors.iter()
    }

    fn all(&self) -> impl Iterator<Item = &Update> {
        self.updates.iter().chain(self.mirrors.iter())
    }

    pub fn contains(&self, u: &Update) -> bool {
        self.updates.contains(u)
    }

    pub fn locations(&self) -> BTreeSet<&Location> {
        self.all().map(|u| &u.location).collect()
    }

    /// The values assigned to each location.
    pub fn values_by_location(&self) -> BTreeMap<&Location, BTreeSet<&Element>> {
        let mut m: BTreeMap<&Location, BTreeSet<&Element>> = BTreeMap::new();
        for u in self.all() {
            m.entry(&u.location).or_default().insert(&u.value);
        }
        m
    }

    pub fn values_at(&self, loc: &Location) -> BTreeSet<&Element> {
        self.all()
            .filter(|u| &u.location == loc)
            .map(|u| &u.value)
            .collect()
    }

    pub fn conflicts(&self) -> Vec<Conflict> {
        self.values_by_location()
            .into_iter()
            .filter(|(_, vals)| vals.len() > 1)
            .map(|(loc, vals)| Conflict {
                location: loc.clone(),
                values: vals.into_iter().cloned().collect(),
            })
            .collect()
    }

    pub fn is_consistent(&self) -> bool {
        let mut seen: BTreeMap<&Location, &Element> = BTreeMap::new();
        for u in self.all() {
            if let Some(prev) = seen.insert(&u.location, &u.value) {
                if prev != &u.value {
                    return false;
                }
            }
        }
        true
    }
}

impl FromIterator<Update> for UpdateSet {
    fn from_iter<T: IntoIterator<Item = Update>>(iter: T) -> Self {
        Self {
            updates: iter.into_iter().collect(),
            mirrors: BTreeSet::new(),
        }
    }
}

impl fmt::Display for UpdateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, u) in self.all().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{u}")?;
        }
        f.write_str("}")
    }
}

/// A member of an update family: an update set or the contradictory element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch<'a> {
    Set(&'a UpdateSet),
    Bottom,
}

/// Alternative update sets; firing picks one of them.
///
/// An empty family (no sets and no bottom) stands for inconsistency and fires
/// as a no-op. Bottom-bearing members fire as no-ops too.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct UpdateFamily {
    pub sets: BTreeSet<UpdateSet>,
    pub contains_bottom: bool,
}

impl UpdateFamily {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn singleton(s: UpdateSet) -> Self {
        let mut f = Self::default();
        f.sets.insert(s);
        f
    }

    pub fn bottom() -> Self {
        Self {
            sets: BTreeSet::new(),
            contains_bottom: true,
        }
    }

    pub fn len(&self) -> usize {
        self.sets.len() + usize::from(self.contains_bottom)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Members in a fixed order: sets ascending, bottom last.
    pub fn member(&self, index: usize) -> Option<Branch<'_>> {
        if index < self.sets.len() {
            self.sets.iter().nth(index).map(Branch::Set)
        } else if index == self.sets.len() && self.contains_bottom {
            Some(Branch::Bottom)
        } else {
            None
        }
    }

    pub fn members(&self) -> impl Iterator<Item = Branch<'_>> {
        self.sets
            .iter()
            .map(Branch::Set)
            .chain(self.contains_bottom.then_some(Branch::Bottom))
    }

    pub fn insert(&mut self, s: UpdateSet) {
        self.sets.insert(s);
    }

    pub fn merge(&mut self, other: UpdateFamily) {
        self.sets.extend(other.sets);
        self.contains_bottom |= other.contains_bottom;
    }
}

impl fmt::Display for UpdateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, m) in self.members().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match m {
                Branch::Set(s) => write!(f, "{s}")?,
                Branch::Bottom => f.write_str("⊥")?,
            }
        }
        f.write_str("}")
    }
}
