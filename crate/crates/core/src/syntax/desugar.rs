//! Expansion of abbreviations into core rules.

use super::ast::{Guard, Range, Rule, Sugar, Term};
use crate::vocabulary::{sym, MOD, UNDEF};

pub const MOD_PRIME: &str = "Mod'";

/// Rewrites every abbreviation into core constructors. Idempotent.
pub fn desugar(r: &Rule) -> Rule {
    match r {
        Rule::Update { .. } => r.clone(),
        Rule::Block(rs) => Rule::Block(rs.iter().map(desugar).collect()),
        Rule::Cond { clauses, otherwise } => Rule::Cond {
            clauses: clauses
                .iter()
                .map(|(g, x)| (g.clone(), desugar(x)))
                .collect(),
            otherwise: otherwise.as_ref().map(|o| Box::new(desugar(o))),
        },
        Rule::Import { var, body } => Rule::Import {
            var: var.clone(),
            body: Box::new(desugar(body)),
        },
        Rule::Choose {
            var,
            universe,
            qualifier,
            body,
        } => Rule::Choose {
            var: var.clone(),
            universe: universe.clone(),
            qualifier: qualifier.clone(),
            body: Box::new(desugar(body)),
        },
        Rule::Decl { var, range, body } => Rule::Decl {
            var: var.clone(),
            range: range.clone(),
            body: Box::new(desugar(body)),
        },
        Rule::Duplicate { term, var, body } => Rule::Duplicate {
            term: term.clone(),
            var: var.clone(),
            body: Box::new(desugar(body)),
        },
        Rule::Sugar(s) => desugar_sugar(s),
    }
}

fn desugar_sugar(s: &Sugar) -> Rule {
    match s {
        Sugar::ImportMany { vars, body } => {
            vars.iter().rev().fold(desugar(body), |inner, v| Rule::Import {
                var: v.clone(),
                body: Box::new(inner),
            })
        }
        Sugar::ChooseMany {
            vars,
            universe,
            qualifier,
            body,
        } => {
            let mut inner = desugar(body);
            for (i, v) in vars.iter().enumerate().rev() {
                inner = Rule::Choose {
                    var: v.clone(),
                    universe: universe.clone(),
                    qualifier: if i + 1 == vars.len() {
                        qualifier.clone()
                    } else {
                        None
                    },
                    body: Box::new(inner),
                };
            }
            inner
        }
        Sugar::DeclMany {
            vars,
            universe,
            body,
        } => vars.iter().rev().fold(desugar(body), |inner, v| Rule::Decl {
            var: v.clone(),
            range: Range::Universe(universe.clone()),
            body: Box::new(inner),
        }),
        Sugar::Extend {
            universe,
            vars,
            body,
        } => {
            let mut items: Vec<Rule> = vars
                .iter()
                .map(|v| Rule::Update {
                    subject: universe.clone(),
                    args: vec![Term::Var(v.clone())],
                    value: Term::constant("true"),
                })
                .collect();
            match desugar(body) {
                Rule::Block(rs) => items.extend(rs),
                other => items.push(other),
            }
            desugar_sugar(&Sugar::ImportMany {
                vars: vars.clone(),
                body: Box::new(Rule::Block(items)),
            })
        }
        Sugar::Let { var, term, body } => Rule::Decl {
            var: var.clone(),
            range: Range::Singleton(term.clone()),
            body: Box::new(desugar(body)),
        },
        Sugar::Case {
            scrutinee,
            arms,
            otherwise,
        } => Rule::Cond {
            clauses: arms
                .iter()
                .map(|(label, r)| {
                    (
                        Guard::Atom(Term::eq(scrutinee.clone(), label.clone())),
                        desugar(r),
                    )
                })
                .collect(),
            otherwise: otherwise.as_ref().map(|o| Box::new(desugar(o))),
        },
        Sugar::ActiveUpdate { target, value } => Rule::Cond {
            clauses: vec![(
                Guard::Atom(value.clone()),
                Rule::Update {
                    subject: sym(MOD),
                    args: vec![target.clone()],
                    value: Term::App(sym(MOD_PRIME), vec![target.clone()]),
                },
            )],
            otherwise: Some(Box::new(Rule::Update {
                subject: sym(MOD),
                args: vec![target.clone()],
                value: Term::constant(UNDEF),
            })),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::vars::free_vars;
    use crate::vocabulary::Symbol;

    fn s(x: &str) -> Symbol {
        sym(x)
    }

    #[test]
    fn extend_expands_to_nested_imports() {
        let body = Rule::Block(vec![
            Rule::update("FirstChild", vec![Term::constant("CurrentNode")], Term::var("v1")),
            Rule::update("NextSib", vec![Term::var("v1")], Term::var("v2")),
        ]);
        let r = Rule::Sugar(Sugar::Extend {
            universe: s("Nodes"),
            vars: vec![s("v1"), s("v2")],
            body: Box::new(body),
        });
        let expected = Rule::Import {
            var: s("v1"),
            body: Box::new(Rule::Import {
                var: s("v2"),
                body: Box::new(Rule::Block(vec![
                    Rule::update("Nodes", vec![Term::var("v1")], Term::constant("true")),
                    Rule::update("Nodes", vec![Term::var("v2")], Term::constant("true")),
                    Rule::update("FirstChild", vec![Term::constant("CurrentNode")], Term::var("v1")),
                    Rule::update("NextSib", vec![Term::var("v1")], Term::var("v2")),
                ])),
            }),
        };
        let d = desugar(&r);
        assert_eq!(d, expected);
        assert_eq!(desugar(&d), d);
        assert!(free_vars(&d).is_empty());
    }

    #[test]
    fn multi_choose_nests_with_qualifier_innermost() {
        let q = Guard::Atom(Term::not(Term::eq(Term::var("a"), Term::var("b"))));
        let r = Rule::Sugar(Sugar::ChooseMany {
            vars: vec![s("a"), s("b")],
            universe: s("U"),
            qualifier: Some(q.clone()),
            body: Box::new(Rule::update("f", vec![Term::var("a")], Term::var("b"))),
        });
        let Rule::Choose {
            var,
            qualifier: None,
            body,
            ..
        } = desugar(&r)
        else {
            panic!()
        };
        assert_eq!(var.as_ref(), "a");
        let Rule::Choose { var, qualifier, .. } = *body else { panic!() };
        assert_eq!(var.as_ref(), "b");
        assert_eq!(qualifier, Some(q));
    }

    #[test]
    fn active_update_expands_to_mod_conditional() {
        let r = Rule::Sugar(Sugar::ActiveUpdate {
            target: Term::constant("x"),
            value: Term::constant("true"),
        });
        let Rule::Cond { clauses, otherwise } = desugar(&r) else { panic!() };
        assert_eq!(clauses.len(), 1);
        assert_eq!(
            clauses[0].1,
            Rule::update("Mod", vec![Term::constant("x")], Term::app("Mod'", vec![Term::constant("x")]))
        );
        assert_eq!(
            *otherwise.unwrap(),
            Rule::update("Mod", vec![Term::constant("x")], Term::constant("undef"))
        );
    }

    #[test]
    fn case_becomes_a_cascade() {
        let r = Rule::Sugar(Sugar::Case {
            scrutinee: Term::constant("c"),
            arms: vec![
                (Term::constant("one"), Rule::update("f", vec![], Term::constant("a"))),
                (Term::constant("two"), Rule::update("f", vec![], Term::constant("b"))),
            ],
            otherwise: None,
        });
        let Rule::Cond { clauses, otherwise } = desugar(&r) else { panic!() };
        assert!(otherwise.is_none());
        assert_eq!(
            clauses[1].0,
            Guard::Atom(Term::eq(Term::constant("c"), Term::constant("two")))
        );
    }
}
