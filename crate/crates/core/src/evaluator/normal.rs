//! Normal form of basic rules: a block of guarded updates.

use super::EvalError;
use crate::syntax::{fun_of, Guard, Rule, Term};
use crate::vocabulary::NOT;

fn neg(g: &Guard) -> Guard {
    match g {
        Guard::Atom(Term::App(f, args)) if f.as_ref() == NOT && args.len() == 1 => {
            Guard::Atom(args[0].clone())
        }
        Guard::Atom(t) => Guard::Atom(Term::not(t.clone())),
        Guard::Not(x) => (**x).clone(),
        other => Guard::Not(Box::new(other.clone())),
    }
}

fn conj(a: Option<Guard>, b: Guard) -> Guard {
    match a {
        None => b,
        Some(Guard::Atom(x)) => match b {
            Guard::Atom(y) => Guard::Atom(Term::and(x, y)),
            b => Guard::And(Box::new(Guard::Atom(x)), Box::new(b)),
        },
        Some(a) => Guard::And(Box::new(a), Box::new(b)),
    }
}

fn walk(r: &Rule, prefix: Option<Guard>, out: &mut Vec<Rule>, skips: &mut Vec<Rule>) {
    match r {
        Rule::Block(rs) if rs.is_empty() => {
            if let Some(g) = prefix {
                skips.push(Rule::Cond {
                    clauses: vec![(g, Rule::Block(Vec::new()))],
                    otherwise: None,
                });
            }
        }
        Rule::Update { .. } => out.push(Rule::Cond {
            clauses: vec![(prefix.unwrap_or_else(Guard::truth), r.clone())],
            otherwise: None,
        }),
        Rule::Block(rs) => {
            for x in rs {
                walk(x, prefix.clone(), out, skips);
            }
        }
        Rule::Cond { clauses, otherwise } => {
            let mut negs = prefix;
            for (g, body) in clauses {
                walk(body, Some(conj(negs.clone(), g.clone())), out, skips);
                negs = Some(conj(negs, neg(g)));
            }
            if let Some(o) = otherwise {
                walk(o, negs, out, skips);
            }
        }
        _ => unreachable!("checked by is_basic"),
    }
}

/// Rewrites a basic rule into a block of single-clause conditionals, one per
/// update, whose guards say exactly when that update fires. A guarded `skip`
/// is kept only when its guard mentions names found nowhere else, so the
/// result has the same function names as `r`.
pub fn normalize_guarded(r: &Rule) -> Result<Rule, EvalError> {
    if !r.is_basic() {
        return Err(EvalError::NotBasic);
    }
    let mut out = Vec::new();
    let mut skips = Vec::new();
    walk(r, None, &mut out, &mut skips);
    let mut names = fun_of(&Rule::Block(out.clone()));
    for s in skips {
        let extra = fun_of(&s);
        if !extra.is_subset(&names) {
            names.extend(extra);
            out.push(s);
        }
    }
    Ok(Rule::Block(out))
}
