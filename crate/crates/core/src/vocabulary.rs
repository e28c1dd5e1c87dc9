//! Function names and vocabularies.
//!
//! A vocabulary is a finite set of function names, each with a fixed arity and
//! the relation/static/logic markings. The basic logic names (`true`, `false`,
//! `undef`, `=`, and the Boolean operations) are part of every vocabulary and
//! are injected automatically by [`Vocabulary::new`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::state::Element;

/// Interned identifier used for function names and variables.
pub type Symbol = Arc<str>;

pub fn sym(s: &str) -> Symbol {
    Arc::from(s)
}

pub const TRUE: &str = "true";
pub const FALSE: &str = "false";
pub const UNDEF: &str = "undef";
pub const EQ: &str = "=";
pub const AND: &str = "and";
pub const OR: &str = "or";
pub const NOT: &str = "not";
pub const IMPLIES: &str = "implies";
pub const RESERVE: &str = "Reserve";
pub const SELF: &str = "Self";
pub const MOD: &str = "Mod";

/// Names whose meaning is fixed by the logic and which every vocabulary holds.
pub const BASIC_LOGIC_NAMES: [&str; 8] = [TRUE, FALSE, UNDEF, EQ, AND, OR, NOT, IMPLIES];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VocabError {
    #[error("declaration of `{name}` conflicts with an existing declaration")]
    Conflict { name: String },
    #[error("`{name}` is a logic name and cannot be redeclared as {got}")]
    LogicRedeclared { name: String, got: String },
    #[error("unknown function name `{0}`")]
    Unknown(String),
    #[error("`{0}` is not part of the vocabulary being reduced")]
    NotSubvocabulary(String),
}

/// Built-in interpretations. Everything else is table-backed or external.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Builtin {
    True,
    False,
    Undef,
    Eq,
    And,
    Or,
    Not,
    Implies,
    /// Membership in the reserve; maintained by the allocator.
    Reserve,
    /// Interpreted per agent through the state's expansion.
    SelfName,
    /// A nullary name denoting a fixed element (named constant or integer literal).
    Literal(Element),
    Add { modulus: Option<i64> },
    Sub { modulus: Option<i64> },
    Mul { modulus: Option<i64> },
    Mod,
    Lt,
    Le,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Interpretation {
    /// Stored in the state's tables (dynamic or static).
    Table,
    /// Supplied by an oracle at run time.
    External,
    Builtin(Builtin),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FunctionName {
    pub name: Symbol,
    pub arity: usize,
    pub is_relation: bool,
    pub is_static: bool,
    pub is_logic: bool,
    pub interp: Interpretation,
}

impl FunctionName {
    pub fn dynamic(name: &str, arity: usize) -> Self {
        Self {
            name: sym(name),
            arity,
            is_relation: false,
            is_static: false,
            is_logic: false,
            interp: Interpretation::Table,
        }
    }

    pub fn static_fn(name: &str, arity: usize) -> Self {
        Self {
            is_static: true,
            ..Self::dynamic(name, arity)
        }
    }

    pub fn relation(name: &str, arity: usize) -> Self {
        Self {
            is_relation: true,
            ..Self::dynamic(name, arity)
        }
    }

    pub fn static_relation(name: &str, arity: usize) -> Self {
        Self {
            is_relation: true,
            is_static: true,
            ..Self::dynamic(name, arity)
        }
    }

    pub fn external(name: &str, arity: usize) -> Self {
        Self {
            interp: Interpretation::External,
            ..Self::dynamic(name, arity)
        }
    }

    pub fn external_relation(name: &str, arity: usize) -> Self {
        Self {
            is_relation: true,
            interp: Interpretation::External,
            ..Self::dynamic(name, arity)
        }
    }

    /// A static nullary name interpreted as a fixed element.
    pub fn literal(name: &str, value: Element) -> Self {
        Self {
            is_static: true,
            interp: Interpretation::Builtin(Builtin::Literal(value)),
            ..Self::dynamic(name, 0)
        }
    }

    fn logic(name: &str, arity: usize, is_relation: bool, is_static: bool, b: Builtin) -> Self {
        Self {
            name: sym(name),
            arity,
            is_relation,
            is_static,
            is_logic: true,
            interp: Interpretation::Builtin(b),
        }
    }

    pub fn reserve() -> Self {
        Self::logic(RESERVE, 1, true, false, Builtin::Reserve)
    }

    pub fn self_name() -> Self {
        Self::logic(SELF, 0, false, false, Builtin::SelfName)
    }

    pub fn is_external(&self) -> bool {
        self.interp == Interpretation::External
    }

    pub fn is_table(&self) -> bool {
        self.interp == Interpretation::Table
    }

    /// Dynamic, non-logic and table-backed: the only names a rule may update.
    pub fn is_updatable(&self) -> bool {
        !self.is_static && !self.is_logic && self.is_table()
    }

    /// Unary relation usable as a universe (range of a binder).
    pub fn is_universe(&self) -> bool {
        self.arity == 1
            && self.is_relation
            && self.name.as_ref() != RESERVE
            && self.interp == Interpretation::Table
    }

    fn describe(&self) -> String {
        let kind = match (self.is_static, self.is_relation) {
            (true, true) => "static relation",
            (true, false) => "static function",
            (false, true) => "relation",
            (false, false) => "dynamic function",
        };
        format!("{kind} {}/{}", self.name, self.arity)
    }
}

impl fmt::Display for FunctionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

fn basic_logic_names() -> Vec<FunctionName> {
    vec![
        FunctionName::logic(TRUE, 0, true, true, Builtin::True),
        FunctionName::logic(FALSE, 0, true, true, Builtin::False),
        FunctionName::logic(UNDEF, 0, false, true, Builtin::Undef),
        FunctionName::logic(EQ, 2, true, true, Builtin::Eq),
        FunctionName::logic(AND, 2, true, true, Builtin::And),
        FunctionName::logic(OR, 2, true, true, Builtin::Or),
        FunctionName::logic(NOT, 1, true, true, Builtin::Not),
        FunctionName::logic(IMPLIES, 2, true, true, Builtin::Implies),
    ]
}

/// Optional background arithmetic, enabled by `pragma integers`.
pub fn integer_names(modulus: Option<i64>) -> Vec<FunctionName> {
    let op = |name: &str, arity: usize, rel: bool, b: Builtin| FunctionName {
        name: sym(name),
        arity,
        is_relation: rel,
        is_static: true,
        is_logic: true,
        interp: Interpretation::Builtin(b),
    };
    vec![
        op("+", 2, false, Builtin::Add { modulus }),
        op("-", 2, false, Builtin::Sub { modulus }),
        op("*", 2, false, Builtin::Mul { modulus }),
        op("mod", 2, false, Builtin::Mod),
        op("<", 2, true, Builtin::Lt),
        op("<=", 2, true, Builtin::Le),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Vocabulary {
    names: BTreeMap<Symbol, FunctionName>,
}

impl Vocabulary {
    /// Builds a vocabulary from user declarations plus the basic logic names.
    pub fn new(user: impl IntoIterator<Item = FunctionName>) -> Result<Self, VocabError> {
        let mut names = BTreeMap::new();
        for f in basic_logic_names() {
            names.insert(f.name.clone(), f);
        }
        let mut vocab = Self { names };
        for f in user {
            vocab.insert(f)?;
        }
        Ok(vocab)
    }

    /// Adds a name. Re-adding an identical declaration is a no-op.
    pub fn insert(&mut self, f: FunctionName) -> Result<(), VocabError> {
        match self.names.get(&f.name) {
            Some(existing) if *existing == f => Ok(()),
            Some(existing) if existing.is_logic && !f.is_logic => Err(VocabError::LogicRedeclared {
                name: f.name.to_string(),
                got: f.describe(),
            }),
            Some(_) => Err(VocabError::Conflict {
                name: f.name.to_string(),
            }),
            None => {
                self.names.insert(f.name.clone(), f);
                Ok(())
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&FunctionName> {
        self.names.get(name)
    }

    pub fn lookup(&self, name: &str) -> Result<&FunctionName, VocabError> {
        self.get(name).ok_or_else(|| VocabError::Unknown(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &FunctionName> {
        self.names.values()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn identifiers(&self) -> BTreeSet<Symbol> {
        self.names.keys().cloned().collect()
    }

    /// Names declared by the user, i.e. everything that is not a logic name.
    pub fn user_names(&self) -> impl Iterator<Item = &FunctionName> {
        self.names.values().filter(|f| !f.is_logic)
    }

    pub fn uses_reserve(&self) -> bool {
        self.contains(RESERVE)
    }

    /// Sub-vocabulary keeping the given identifiers. Basic logic names always survive.
    pub fn restrict<'a>(
        &self,
        keep: impl IntoIterator<Item = &'a str>,
    ) -> Result<Vocabulary, VocabError> {
        let mut names: BTreeMap<Symbol, FunctionName> = self
            .names
            .iter()
            .filter(|(k, _)| BASIC_LOGIC_NAMES.contains(&k.as_ref()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        for name in keep {
            let f = self
                .get(name)
                .ok_or_else(|| VocabError::NotSubvocabulary(name.to_string()))?;
            names.insert(f.name.clone(), f.clone());
        }
        Ok(Vocabulary { names })
    }

    /// Every name of `self` also occurs, identically declared, in `other`.
    pub fn is_subvocabulary_of(&self, other: &Vocabulary) -> bool {
        self.names.iter().all(|(k, f)| other.names.get(k) == Some(f))
    }

    pub fn without(&self, name: &str) -> Vocabulary {
        let mut v = self.clone();
        v.names.remove(name);
        v
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new([]).expect("logic names alone never conflict")
    }
}

/// Convenience wrapper matching the declaration-list entry point.
pub fn make_vocabulary(
    user: impl IntoIterator<Item = FunctionName>,
) -> Result<Vocabulary, VocabError> {
    Vocabulary::new(user)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_declarations_give_exactly_the_logic_names() {
        let v = make_vocabulary([]).unwrap();
        let ids: BTreeSet<&str> = v.iter().map(|f| f.name.as_ref()).collect();
        let expected: BTreeSet<&str> = BASIC_LOGIC_NAMES.iter().copied().collect();
        assert_eq!(ids, expected);
    }

    #[test]
    fn user_names_are_added_to_logic_names() {
        let v = make_vocabulary([
            FunctionName::dynamic("Fork", 1),
            FunctionName::dynamic("Mode", 1),
        ])
        .unwrap();
        assert_eq!(v.len(), BASIC_LOGIC_NAMES.len() + 2);
        assert_eq!(v.user_names().count(), 2);
    }

    #[test]
    fn redeclaring_a_logic_name_fails() {
        let err = make_vocabulary([FunctionName::dynamic("true", 1)]).unwrap_err();
        assert!(matches!(err, VocabError::LogicRedeclared { .. }));
    }

    #[test]
    fn duplicate_identifier_with_different_signature_fails() {
        let err = make_vocabulary([FunctionName::dynamic("f", 1), FunctionName::dynamic("f", 2)])
            .unwrap_err();
        assert_eq!(err, VocabError::Conflict { name: "f".into() });
        assert!(make_vocabulary([FunctionName::dynamic("f", 1), FunctionName::dynamic("f", 1)]).is_ok());
    }

    #[test]
    fn logic_name_markings() {
        let v = Vocabulary::default();
        let eq = v.get(EQ).unwrap();
        assert!(eq.arity == 2 && eq.is_relation && eq.is_static && eq.is_logic);
        for n in [TRUE, FALSE] {
            let f = v.get(n).unwrap();
            assert!(f.arity == 0 && f.is_relation && f.is_static && f.is_logic);
        }
        let u = v.get(UNDEF).unwrap();
        assert!(u.is_static && u.is_logic && !u.is_relation);
        for n in [AND, OR, NOT, IMPLIES] {
            let f = v.get(n).unwrap();
            assert!(f.is_static && f.is_logic && f.is_relation);
        }
        let r = FunctionName::reserve();
        assert!(r.is_relation && r.is_logic && !r.is_static && r.arity == 1);
        let s = FunctionName::self_name();
        assert!(s.arity == 0 && s.is_logic && !s.is_updatable());
    }

    #[test]
    fn restrict_keeps_logic_names() {
        let v = make_vocabulary([FunctionName::dynamic("f", 1), FunctionName::dynamic("g", 0)])
            .unwrap();
        let r = v.restrict(["f"]).unwrap();
        assert!(r.contains("f") && !r.contains("g") && r.contains(EQ));
        assert!(v.restrict(["h"]).is_err());
        assert!(r.is_subvocabulary_of(&v));
    }
}
