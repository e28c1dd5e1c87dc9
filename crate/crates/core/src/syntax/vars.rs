//! Free and bound variables, `Fun`, and perspicuity renaming.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::{Guard, Range, Rule, Sugar, Term};
use crate::vocabulary::{sym, Symbol, EQ, MOD};

pub type VarSet = BTreeSet<Symbol>;

pub fn free_vars_term(t: &Term) -> VarSet {
    let mut out = VarSet::new();
    collect_term_vars(t, &mut out);
    out
}

fn collect_term_vars(t: &Term, out: &mut VarSet) {
    match t {
        Term::Var(v) => {
            out.insert(v.clone());
        }
        Term::App(_, args) => args.iter().for_each(|a| collect_term_vars(a, out)),
    }
}

pub fn free_vars_guard(g: &Guard) -> VarSet {
    match g {
        Guard::Atom(t) => free_vars_term(t),
        Guard::Not(a) => free_vars_guard(a),
        Guard::And(a, b) | Guard::Or(a, b) | Guard::Implies(a, b) => {
            let mut s = free_vars_guard(a);
            s.extend(free_vars_guard(b));
            s
        }
        Guard::Quant { var, body, .. } => {
            let mut s = free_vars_guard(body);
            s.remove(var);
            s
        }
    }
}

fn without(mut s: VarSet, vars: &[Symbol]) -> VarSet {
    for v in vars {
        s.remove(v);
    }
    s
}

pub fn free_vars(r: &Rule) -> VarSet {
    match r {
        Rule::Update { args, value, .. } => {
            let mut s = free_vars_term(value);
            args.iter().for_each(|a| collect_term_vars(a, &mut s));
            s
        }
        Rule::Block(rs) => rs.iter().flat_map(free_vars).collect(),
        Rule::Cond { clauses, otherwise } => {
            let mut s = VarSet::new();
            for (g, r) in clauses {
                s.extend(free_vars_guard(g));
                s.extend(free_vars(r));
            }
            if let Some(o) = otherwise {
                s.extend(free_vars(o));
            }
            s
        }
        Rule::Import { var, body } => without(free_vars(body), std::slice::from_ref(var)),
        Rule::Choose {
            var,
            qualifier,
            body,
            ..
        } => {
            let mut s = free_vars(body);
            if let Some(q) = qualifier {
                s.extend(free_vars_guard(q));
            }
            without(s, std::slice::from_ref(var))
        }
        Rule::Decl { var, range, body } => {
            let mut s = without(free_vars(body), std::slice::from_ref(var));
            if let Range::Singleton(t) = range {
                s.extend(free_vars_term(t));
            }
            s
        }
        Rule::Duplicate { term, var, body } => {
            let mut s = without(free_vars(body), std::slice::from_ref(var));
            s.extend(free_vars_term(term));
            s
        }
        Rule::Sugar(sugar) => match sugar {
            Sugar::ImportMany { vars, body }
            | Sugar::DeclMany { vars, body, .. }
            | Sugar::Extend { vars, body, .. } => without(free_vars(body), vars),
            Sugar::ChooseMany {
                vars,
                qualifier,
                body,
                ..
            } => {
                let mut s = free_vars(body);
                if let Some(q) = qualifier {
                    s.extend(free_vars_guard(q));
                }
                without(s, vars)
            }
            Sugar::Let { var, term, body } => {
                let mut s = without(free_vars(body), std::slice::from_ref(var));
                s.extend(free_vars_term(term));
                s
            }
            Sugar::Case {
                scrutinee,
                arms,
                otherwise,
            } => {
                let mut s = free_vars_term(scrutinee);
                for (label, r) in arms {
                    s.extend(free_vars_term(label));
                    s.extend(free_vars(r));
                }
                if let Some(o) = otherwise {
                    s.extend(free_vars(o));
                }
                s
            }
            Sugar::ActiveUpdate { target, value } => {
                let mut s = free_vars_term(target);
                s.extend(free_vars_term(value));
                s
            }
        },
    }
}

/// Every binder occurrence in pre-order, quantifiers included.
pub fn binders(r: &Rule) -> Vec<Symbol> {
    let mut out = Vec::new();
    collect_binders(r, &mut out);
    out
}

fn guard_binders(g: &Guard, out: &mut Vec<Symbol>) {
    match g {
        Guard::Atom(_) => {}
        Guard::Not(a) => guard_binders(a, out),
        Guard::And(a, b) | Guard::Or(a, b) | Guard::Implies(a, b) => {
            guard_binders(a, out);
            guard_binders(b, out);
        }
        Guard::Quant { var, body, .. } => {
            out.push(var.clone());
            guard_binders(body, out);
        }
    }
}

fn collect_binders(r: &Rule, out: &mut Vec<Symbol>) {
    match r {
        Rule::Update { .. } => {}
        Rule::Cond { clauses, .. } => {
            for (g, _) in clauses {
                guard_binders(g, out);
            }
        }
        Rule::Import { var, .. } | Rule::Decl { var, .. } | Rule::Duplicate { var, .. } => {
            out.push(var.clone())
        }
        Rule::Choose { var, qualifier, .. } => {
            out.push(var.clone());
            if let Some(q) = qualifier {
                guard_binders(q, out);
            }
        }
        Rule::Block(_) => {}
        Rule::Sugar(s) => match s {
            Sugar::ImportMany { vars, .. }
            | Sugar::DeclMany { vars, .. }
            | Sugar::Extend { vars, .. } => out.extend(vars.iter().cloned()),
            Sugar::ChooseMany {
                vars, qualifier, ..
            } => {
                out.extend(vars.iter().cloned());
                if let Some(q) = qualifier {
                    guard_binders(q, out);
                }
            }
            Sugar::Let { var, .. } => out.push(var.clone()),
            Sugar::Case { .. } | Sugar::ActiveUpdate { .. } => {}
        },
    }
    for c in r.children() {
        collect_binders(c, out);
    }
}

pub fn bound_vars(r: &Rule) -> VarSet {
    binders(r).into_iter().collect()
}

pub fn fun_of_term(t: &Term) -> BTreeSet<Symbol> {
    let mut out = BTreeSet::new();
    term_names(t, &mut out);
    out
}

fn term_names(t: &Term, out: &mut BTreeSet<Symbol>) {
    if let Term::App(f, args) = t {
        out.insert(f.clone());
        args.iter().for_each(|a| term_names(a, out));
    }
}

pub fn fun_of_guard(g: &Guard) -> BTreeSet<Symbol> {
    let mut out = BTreeSet::new();
    guard_names(g, &mut out);
    out
}

fn guard_names(g: &Guard, out: &mut BTreeSet<Symbol>) {
    match g {
        Guard::Atom(t) => term_names(t, out),
        Guard::Not(a) => {
            out.insert(sym("not"));
            guard_names(a, out)
        }
        Guard::And(a, b) | Guard::Or(a, b) | Guard::Implies(a, b) => {
            out.insert(sym(match g {
                Guard::And(..) => "and",
                Guard::Or(..) => "or",
                _ => "implies",
            }));
            guard_names(a, out);
            guard_names(b, out);
        }
        Guard::Quant { universe, body, .. } => {
            out.insert(universe.clone());
            guard_names(body, out);
        }
    }
}

/// Function names occurring in a rule. Variables are excluded, and `Reserve`
/// stays implicit for imports.
pub fn fun_of(r: &Rule) -> BTreeSet<Symbol> {
    let mut out = BTreeSet::new();
    rule_names(r, &mut out);
    out
}

fn rule_names(r: &Rule, out: &mut BTreeSet<Symbol>) {
    match r {
        Rule::Update {
            subject,
            args,
            value,
        } => {
            out.insert(subject.clone());
            args.iter().for_each(|a| term_names(a, out));
            term_names(value, out);
        }
        Rule::Cond { clauses, .. } => clauses.iter().for_each(|(g, _)| guard_names(g, out)),
        Rule::Choose {
            universe,
            qualifier,
            ..
        } => {
            out.insert(universe.clone());
            if let Some(q) = qualifier {
                guard_names(q, out);
            }
        }
        Rule::Decl { range, .. } => match range {
            Range::Universe(u) => {
                out.insert(u.clone());
            }
            Range::Singleton(t) => term_names(t, out),
        },
        Rule::Duplicate { term, .. } => term_names(term, out),
        Rule::Import { .. } | Rule::Block(_) => {}
        Rule::Sugar(s) => match s {
            Sugar::ChooseMany {
                universe,
                qualifier,
                ..
            } => {
                out.insert(universe.clone());
                if let Some(q) = qualifier {
                    guard_names(q, out);
                }
            }
            Sugar::DeclMany { universe, .. } | Sugar::Extend { universe, .. } => {
                out.insert(universe.clone());
            }
            Sugar::Let { term, .. } => term_names(term, out),
            Sugar::Case {
                scrutinee, arms, ..
            } => {
                out.insert(sym(EQ));
                term_names(scrutinee, out);
                arms.iter().for_each(|(l, _)| term_names(l, out));
            }
            Sugar::ActiveUpdate { target, value } => {
                out.insert(sym(MOD));
                out.insert(sym("Mod'"));
                term_names(target, out);
                term_names(value, out);
            }
            Sugar::ImportMany { .. } => {}
        },
    }
    for c in r.children() {
        rule_names(c, out);
    }
}

/// No variable is both bound and free (or clashes with `avoid`), and no
/// variable is bound twice.
pub fn is_perspicuous(r: &Rule, avoid: &BTreeSet<Symbol>) -> bool {
    let bs = binders(r);
    let set: VarSet = bs.iter().cloned().collect();
    if set.len() != bs.len() {
        return false;
    }
    let free = free_vars(r);
    set.iter().all(|v| !free.contains(v) && !avoid.contains(v))
}

/// Appends primes to `base` until the name is untaken.
pub fn fresh_name(base: &str, taken: &BTreeSet<Symbol>) -> Symbol {
    let mut name = format!("{base}'");
    while taken.contains(name.as_str()) {
        name.push('\'');
    }
    sym(&name)
}

/// Alpha-renames binders so the result is perspicuous with respect to `avoid`.
/// Binders that are already fine keep their names.
pub fn make_perspicuous(r: &Rule, avoid: &BTreeSet<Symbol>) -> Rule {
    let free = free_vars(r);
    let mut taken: BTreeSet<Symbol> = avoid.iter().cloned().collect();
    taken.extend(free.iter().cloned());
    taken.extend(binders(r));
    let mut renamer = Renamer {
        avoid,
        free,
        taken,
        used: BTreeSet::new(),
    };
    renamer.rule(r, &BTreeMap::new())
}

struct Renamer<'a> {
    avoid: &'a BTreeSet<Symbol>,
    free: VarSet,
    taken: BTreeSet<Symbol>,
    used: BTreeSet<Symbol>,
}

type Subst = BTreeMap<Symbol, Symbol>;

impl Renamer<'_> {
    fn bind(&mut self, v: &Symbol, subst: &Subst) -> (Symbol, Subst) {
        let new = if self.used.contains(v) || self.avoid.contains(v) || self.free.contains(v) {
            fresh_name(v, &self.taken)
        } else {
            v.clone()
        };
        self.taken.insert(new.clone());
        self.used.insert(new.clone());
        let mut inner = subst.clone();
        inner.insert(v.clone(), new.clone());
        (new, inner)
    }

    fn bind_all(&mut self, vs: &[Symbol], subst: &Subst) -> (Vec<Symbol>, Subst) {
        let mut cur = subst.clone();
        let mut out = Vec::new();
        for v in vs {
            let (n, s) = self.bind(v, &cur);
            out.push(n);
            cur = s;
        }
        (out, cur)
    }

    fn term(&self, t: &Term, subst: &Subst) -> Term {
        match t {
            Term::Var(v) => Term::Var(subst.get(v).cloned().unwrap_or_else(|| v.clone())),
            Term::App(f, args) => {
                Term::App(f.clone(), args.iter().map(|a| self.term(a, subst)).collect())
            }
        }
    }

    fn guard(&mut self, g: &Guard, subst: &Subst) -> Guard {
        match g {
            Guard::Atom(t) => Guard::Atom(self.term(t, subst)),
            Guard::Not(a) => Guard::Not(Box::new(self.guard(a, subst))),
            Guard::And(a, b) => Guard::And(
                Box::new(self.guard(a, subst)),
                Box::new(self.guard(b, subst)),
            ),
            Guard::Or(a, b) => Guard::Or(
                Box::new(self.guard(a, subst)),
                Box::new(self.guard(b, subst)),
            ),
            Guard::Implies(a, b) => Guard::Implies(
                Box::new(self.guard(a, subst)),
                Box::new(self.guard(b, subst)),
            ),
            Guard::Quant {
                kind,
                var,
                universe,
                body,
            } => {
                let (var, inner) = self.bind(var, subst);
                Guard::Quant {
                    kind: *kind,
                    var,
                    universe: universe.clone(),
                    body: Box::new(self.guard(body, &inner)),
                }
            }
        }
    }

    fn boxed(&mut self, r: &Rule, subst: &Subst) -> Box<Rule> {
        Box::new(self.rule(r, subst))
    }

    fn rule(&mut self, r: &Rule, subst: &Subst) -> Rule {
        match r {
            Rule::Update {
                subject,
                args,
                value,
            } => Rule::Update {
                subject: subject.clone(),
                args: args.iter().map(|a| self.term(a, subst)).collect(),
                value: self.term(value, subst),
            },
            Rule::Block(rs) => Rule::Block(rs.iter().map(|x| self.rule(x, subst)).collect()),
            Rule::Cond { clauses, otherwise } => Rule::Cond {
                clauses: clauses
                    .iter()
                    .map(|(g, x)| (self.guard(g, subst), self.rule(x, subst)))
                    .collect(),
                otherwise: otherwise.as_ref().map(|o| self.boxed(o, subst)),
            },
            Rule::Import { var, body } => {
                let (var, inner) = self.bind(var, subst);
                Rule::Import {
                    var,
                    body: self.boxed(body, &inner),
                }
            }
            Rule::Choose {
                var,
                universe,
                qualifier,
                body,
            } => {
                let (var, inner) = self.bind(var, subst);
                Rule::Choose {
                    var,
                    universe: universe.clone(),
                    qualifier: qualifier.as_ref().map(|q| self.guard(q, &inner)),
                    body: self.boxed(body, &inner),
                }
            }
            Rule::Decl { var, range, body } => {
                let range = match range {
                    Range::Universe(u) => Range::Universe(u.clone()),
                    Range::Singleton(t) => Range::Singleton(self.term(t, subst)),
                };
                let (var, inner) = self.bind(var, subst);
                Rule::Decl {
                    var,
                    range,
                    body: self.boxed(body, &inner),
                }
            }
            Rule::Duplicate { term, var, body } => {
                let term = self.term(term, subst);
                let (var, inner) = self.bind(var, subst);
                Rule::Duplicate {
                    term,
                    var,
                    body: self.boxed(body, &inner),
                }
            }
            Rule::Sugar(s) => Rule::Sugar(self.sugar(s, subst)),
        }
    }

    fn sugar(&mut self, s: &Sugar, subst: &Subst) -> Sugar {
        match s {
            Sugar::ImportMany { vars, body } => {
                let (vars, inner) = self.bind_all(vars, subst);
                Sugar::ImportMany {
                    vars,
                    body: self.boxed(body, &inner),
                }
            }
            Sugar::ChooseMany {
                vars,
                universe,
                qualifier,
                body,
            } => {
                let (vars, inner) = self.bind_all(vars, subst);
                Sugar::ChooseMany {
                    vars,
                    universe: universe.clone(),
                    qualifier: qualifier.as_ref().map(|q| self.guard(q, &inner)),
                    body: self.boxed(body, &inner),
                }
            }
            Sugar::DeclMany {
                vars,
                universe,
                body,
            } => {
                let (vars, inner) = self.bind_all(vars, subst);
                Sugar::DeclMany {
                    vars,
                    universe: universe.clone(),
                    body: self.boxed(body, &inner),
                }
            }
            Sugar::Extend {
                universe,
                vars,
                body,
            } => {
                let (vars, inner) = self.bind_all(vars, subst);
                Sugar::Extend {
                    universe: universe.clone(),
                    vars,
                    body: self.boxed(body, &inner),
                }
            }
            Sugar::Let { var, term, body } => {
                let term = self.term(term, subst);
                let (var, inner) = self.bind(var, subst);
                Sugar::Let {
                    var,
                    term,
                    body: self.boxed(body, &inner),
                }
            }
            Sugar::Case {
                scrutinee,
                arms,
                otherwise,
            } => Sugar::Case {
                scrutinee: self.term(scrutinee, subst),
                arms: arms
                    .iter()
                    .map(|(l, r)| (self.term(l, subst), self.rule(r, subst)))
                    .collect(),
                otherwise: otherwise.as_ref().map(|o| self.boxed(o, subst)),
            },
            Sugar::ActiveUpdate { target, value } => Sugar::ActiveUpdate {
                target: self.term(target, subst),
                value: self.term(value, subst),
            },
        }
    }
}
