use std::collections::BTreeMap;
use std::sync::Arc;

use crate::vocabulary::{sym, Symbol, Vocabulary, AND, EQ, NOT};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Symbol),
    App(Symbol, Vec<Term>),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(sym(name))
    }

    pub fn app(name: &str, args: Vec<Term>) -> Term {
        Term::App(sym(name), args)
    }

    pub fn constant(name: &str) -> Term {
        Term::App(sym(name), Vec::new())
    }

    pub fn eq(a: Term, b: Term) -> Term {
        Term::App(sym(EQ), vec![a, b])
    }

    pub fn and(a: Term, b: Term) -> Term {
        Term::App(sym(AND), vec![a, b])
    }

    pub fn not(a: Term) -> Term {
        Term::App(sym(NOT), vec![a])
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::App(_, args) => args.iter().all(Term::is_ground),
        }
    }

    /// Boolean terms: relation-headed applications, where the Boolean
    /// operations additionally need Boolean arguments.
    pub fn is_boolean(&self, vocab: &Vocabulary) -> bool {
        match self {
            Term::Var(_) => false,
            Term::App(f, args) => match vocab.get(f) {
                Some(fname) if fname.is_logic && is_boolean_op(f) => {
                    args.iter().all(|a| a.is_boolean(vocab))
                }
                Some(fname) => fname.is_relation,
                None => false,
            },
        }
    }
}

pub(crate) fn is_boolean_op(name: &str) -> bool {
    matches!(name, "and" | "or" | "not" | "implies")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Quantifier {
    Exists,
    Forall,
}

/// First-order guards. A quantifier-free guard is always a single `Atom`;
/// the connectives appear only around quantified parts.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Guard {
    Atom(Term),
    Not(Box<Guard>),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
    Implies(Box<Guard>, Box<Guard>),
    Quant {
        kind: Quantifier,
        var: Symbol,
        universe: Symbol,
        body: Box<Guard>,
    },
}

impl Guard {
    pub fn truth() -> Guard {
        Guard::Atom(Term::constant("true"))
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Guard::Atom(_) => true,
            Guard::Not(g) => g.is_quantifier_free(),
            Guard::And(a, b) | Guard::Or(a, b) | Guard::Implies(a, b) => {
                a.is_quantifier_free() && b.is_quantifier_free()
            }
            Guard::Quant { .. } => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Range {
    Universe(Symbol),
    /// `let v = t`: the range is the single value of `t`, evaluated once.
    Singleton(Term),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    Update {
        subject: Symbol,
        args: Vec<Term>,
        value: Term,
    },
    Block(Vec<Rule>),
    Cond {
        clauses: Vec<(Guard, Rule)>,
        otherwise: Option<Box<Rule>>,
    },
    Import {
        var: Symbol,
        body: Box<Rule>,
    },
    Choose {
        var: Symbol,
        universe: Symbol,
        qualifier: Option<Guard>,
        body: Box<Rule>,
    },
    Decl {
        var: Symbol,
        range: Range,
        body: Box<Rule>,
    },
    Duplicate {
        term: Term,
        var: Symbol,
        body: Box<Rule>,
    },
    Sugar(Sugar),
}

/// Abbreviations removed by [`crate::syntax::desugar`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sugar {
    ImportMany {
        vars: Vec<Symbol>,
        body: Box<Rule>,
    },
    ChooseMany {
        vars: Vec<Symbol>,
        universe: Symbol,
        qualifier: Option<Guard>,
        body: Box<Rule>,
    },
    DeclMany {
        vars: Vec<Symbol>,
        universe: Symbol,
        body: Box<Rule>,
    },
    Extend {
        universe: Symbol,
        vars: Vec<Symbol>,
        body: Box<Rule>,
    },
    Let {
        var: Symbol,
        term: Term,
        body: Box<Rule>,
    },
    Case {
        scrutinee: Term,
        arms: Vec<(Term, Rule)>,
        otherwise: Option<Box<Rule>>,
    },
    /// `Active(t) := t0`.
    ActiveUpdate { target: Term, value: Term },
}

impl Rule {
    pub fn skip() -> Rule {
        Rule::Block(Vec::new())
    }

    pub fn update(subject: &str, args: Vec<Term>, value: Term) -> Rule {
        Rule::Update {
            subject: sym(subject),
            args,
            value,
        }
    }

    pub fn is_core(&self) -> bool {
        match self {
            Rule::Update { .. } => true,
            Rule::Block(rs) => rs.iter().all(Rule::is_core),
            Rule::Cond { clauses, otherwise } => {
                clauses.iter().all(|(_, r)| r.is_core())
                    && otherwise.as_ref().map_or(true, |r| r.is_core())
            }
            Rule::Import { body, .. }
            | Rule::Choose { body, .. }
            | Rule::Decl { body, .. }
            | Rule::Duplicate { body, .. } => body.is_core(),
            Rule::Sugar(_) => false,
        }
    }

    /// Basic rules are built from update instructions, blocks and
    /// quantifier-free conditionals only.
    pub fn is_basic(&self) -> bool {
        match self {
            Rule::Update { .. } => true,
            Rule::Block(rs) => rs.iter().all(Rule::is_basic),
            Rule::Cond { clauses, otherwise } => {
                clauses
                    .iter()
                    .all(|(g, r)| g.is_quantifier_free() && r.is_basic())
                    && otherwise.as_ref().map_or(true, |r| r.is_basic())
            }
            _ => false,
        }
    }

    pub fn contains_choose(&self) -> bool {
        self.any_node(&|r| {
            matches!(
                r,
                Rule::Choose { .. } | Rule::Sugar(Sugar::ChooseMany { .. })
            )
        })
    }

    /// Import, extend or duplicate anywhere: the rule draws on the reserve.
    pub fn uses_reserve(&self) -> bool {
        self.any_node(&|r| {
            matches!(
                r,
                Rule::Import { .. }
                    | Rule::Duplicate { .. }
                    | Rule::Sugar(Sugar::ImportMany { .. })
                    | Rule::Sugar(Sugar::Extend { .. })
            )
        })
    }

    pub fn children(&self) -> Vec<&Rule> {
        match self {
            Rule::Update { .. } => Vec::new(),
            Rule::Block(rs) => rs.iter().collect(),
            Rule::Cond { clauses, otherwise } => clauses
                .iter()
                .map(|(_, r)| r)
                .chain(otherwise.as_deref())
                .collect(),
            Rule::Import { body, .. }
            | Rule::Choose { body, .. }
            | Rule::Decl { body, .. }
            | Rule::Duplicate { body, .. } => vec![body],
            Rule::Sugar(s) => match s {
                Sugar::ImportMany { body, .. }
                | Sugar::ChooseMany { body, .. }
                | Sugar::DeclMany { body, .. }
                | Sugar::Extend { body, .. }
                | Sugar::Let { body, .. } => vec![body],
                Sugar::Case {
                    arms, otherwise, ..
                } => arms
                    .iter()
                    .map(|(_, r)| r)
                    .chain(otherwise.as_deref())
                    .collect(),
                Sugar::ActiveUpdate { .. } => Vec::new(),
            },
        }
    }

    fn any_node(&self, pred: &dyn Fn(&Rule) -> bool) -> bool {
        pred(self) || self.children().into_iter().any(|c| c.any_node(pred))
    }
}

/// A single-agent program: a closed core rule over its vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub vocab: Arc<Vocabulary>,
    /// Desugared and made perspicuous with respect to the vocabulary.
    pub rule: Rule,
    /// The rule as written, before desugaring.
    pub source: Rule,
}

/// Modules of a distributed ealgebra over one shared vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistributedSpec {
    /// Shared vocabulary: includes `Mod` and the module names, never `Self`.
    pub vocab: Arc<Vocabulary>,
    pub modules: BTreeMap<Symbol, Program>,
    /// Optional closed guard every initial state must satisfy.
    pub initial: Option<Guard>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Document {
    Program(Program),
    Distributed(DistributedSpec),
}
