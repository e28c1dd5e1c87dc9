//! Pretty-printer producing text the parser reads back to the same AST.

use super::ast::{DistributedSpec, Guard, Program, Quantifier, Range, Rule, Sugar, Term};
use crate::vocabulary::{Builtin, Interpretation, Vocabulary, RESERVE, SELF};

const PREC_IMPLIES: u8 = 1;
const PREC_OR: u8 = 2;
const PREC_AND: u8 = 3;
const PREC_NOT: u8 = 4;
const PREC_CMP: u8 = 5;
const PREC_ADD: u8 = 6;
const PREC_MUL: u8 = 7;
const PREC_ATOM: u8 = 8;

fn term_prec(t: &Term) -> u8 {
    match t {
        Term::Var(_) => PREC_ATOM,
        Term::App(f, args) => match (f.as_ref(), args.as_slice()) {
            ("implies", [_, _]) => PREC_IMPLIES,
            ("or", [_, _]) => PREC_OR,
            ("and", [_, _]) => PREC_AND,
            ("not", [Term::App(eq, inner)]) if eq.as_ref() == "=" && inner.len() == 2 => PREC_CMP,
            ("not", [_]) => PREC_NOT,
            ("=" | "<" | "<=", [_, _]) => PREC_CMP,
            ("+" | "-", [_, _]) => PREC_ADD,
            ("*" | "mod", [_, _]) => PREC_MUL,
            _ => PREC_ATOM,
        },
    }
}

pub fn term_to_string(t: &Term) -> String {
    let mut s = String::new();
    write_term(t, 0, &mut s);
    s
}

fn write_term(t: &Term, ctx: u8, out: &mut String) {
    let prec = term_prec(t);
    let paren = prec < ctx;
    if paren {
        out.push('(');
    }
    match t {
        Term::Var(v) => out.push_str(v),
        Term::App(f, args) => {
            let bin = |out: &mut String, op: &str, l: u8, r: u8| {
                write_term(&args[0], l, out);
                out.push(' ');
                out.push_str(op);
                out.push(' ');
                write_term(&args[1], r, out);
            };
            match prec {
                PREC_IMPLIES => bin(out, "implies", PREC_OR, PREC_IMPLIES),
                PREC_OR => bin(out, "or", PREC_OR, PREC_AND),
                PREC_AND => bin(out, "and", PREC_AND, PREC_NOT),
                PREC_NOT => {
                    out.push_str("not ");
                    write_term(&args[0], PREC_NOT, out);
                }
                PREC_CMP if f.as_ref() == "not" => {
                    let Term::App(_, inner) = &args[0] else {
                        unreachable!("checked in term_prec")
                    };
                    write_term(&inner[0], PREC_ADD, out);
                    out.push_str(" != ");
                    write_term(&inner[1], PREC_ADD, out);
                }
                PREC_CMP => bin(out, f, PREC_ADD, PREC_ADD),
                PREC_ADD => bin(out, f, PREC_ADD, PREC_MUL),
                PREC_MUL => bin(out, f, PREC_MUL, PREC_ATOM),
                _ => {
                    out.push_str(f);
                    if !args.is_empty() {
                        out.push('(');
                        for (i, a) in args.iter().enumerate() {
                            if i > 0 {
                                out.push_str(", ");
                            }
                            write_term(a, 0, out);
                        }
                        out.push(')');
                    }
                }
            }
        }
    }
    if paren {
        out.push(')');
    }
}

fn guard_prec(g: &Guard) -> u8 {
    match g {
        Guard::Atom(t) => term_prec(t),
        Guard::Not(_) | Guard::Quant { .. } => PREC_NOT,
        Guard::And(..) => PREC_AND,
        Guard::Or(..) => PREC_OR,
        Guard::Implies(..) => PREC_IMPLIES,
    }
}

pub fn guard_to_string(g: &Guard) -> String {
    let mut s = String::new();
    write_guard(g, 0, &mut s);
    s
}

fn write_guard(g: &Guard, ctx: u8, out: &mut String) {
    if let Guard::Atom(t) = g {
        return write_term(t, ctx, out);
    }
    let paren = guard_prec(g) < ctx;
    if paren {
        out.push('(');
    }
    let bin = |out: &mut String, a: &Guard, op: &str, b: &Guard, l: u8, r: u8| {
        write_guard(a, l, out);
        out.push(' ');
        out.push_str(op);
        out.push(' ');
        write_guard(b, r, out);
    };
    match g {
        Guard::Atom(_) => unreachable!("handled above"),
        Guard::Not(a) => {
            out.push_str("not ");
            write_guard(a, PREC_NOT, out);
        }
        Guard::And(a, b) => bin(out, a, "and", b, PREC_AND, PREC_NOT),
        Guard::Or(a, b) => bin(out, a, "or", b, PREC_OR, PREC_AND),
        Guard::Implies(a, b) => bin(out, a, "implies", b, PREC_OR, PREC_IMPLIES),
        Guard::Quant {
            kind,
            var,
            universe,
            body,
        } => {
            let k = match kind {
                Quantifier::Exists => "exists",
                Quantifier::Forall => "forall",
            };
            out.push_str(&format!("({k} {var} in {universe}) "));
            write_guard(body, PREC_NOT, out);
        }
    }
    if paren {
        out.push(')');
    }
}

struct Printer {
    out: String,
}

impl Printer {
    fn line(&mut self, indent: usize, text: &str) {
        for _ in 0..indent {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn seq(&mut self, r: &Rule, indent: usize) {
        match r {
            Rule::Block(items) if items.len() != 1 => {
                if items.is_empty() {
                    self.line(indent, "skip");
                }
                for it in items {
                    self.item(it, indent);
                }
            }
            _ => self.item(r, indent),
        }
    }

    fn item(&mut self, r: &Rule, indent: usize) {
        match r {
            Rule::Update {
                subject,
                args,
                value,
            } => {
                let lhs = term_to_string(&Term::App(subject.clone(), args.clone()));
                self.line(indent, &format!("{lhs} := {}", term_to_string(value)));
            }
            Rule::Block(items) if items.is_empty() => self.line(indent, "skip"),
            Rule::Block(items) => {
                self.line(indent, "block");
                for it in items {
                    self.item(it, indent + 1);
                }
                self.line(indent, "endblock");
            }
            Rule::Cond { clauses, otherwise } => {
                for (i, (g, body)) in clauses.iter().enumerate() {
                    let kw = if i == 0 { "if" } else { "elseif" };
                    self.line(indent, &format!("{kw} {} then", guard_to_string(g)));
                    self.seq(body, indent + 1);
                }
                if let Some(o) = otherwise {
                    self.line(indent, "else");
                    self.seq(o, indent + 1);
                }
                self.line(indent, "endif");
            }
            Rule::Import { var, body } => self.binder(indent, &format!("import {var}"), body, "endimport"),
            Rule::Choose {
                var,
                universe,
                qualifier,
                body,
            } => self.choose(indent, &[var.to_string()], universe, qualifier.as_ref(), body),
            Rule::Decl { var, range, body } => {
                let head = match range {
                    Range::Universe(u) => format!("Var {var} ranges over {u}"),
                    Range::Singleton(t) => format!("let {var} = {} in", term_to_string(t)),
                };
                self.line(indent, &head);
                self.item(body, indent + 1);
            }
            Rule::Duplicate { term, var, body } => self.binder(
                indent,
                &format!("duplicate {} as {var}", term_to_string(term)),
                body,
                "endduplicate",
            ),
            Rule::Sugar(s) => self.sugar(s, indent),
        }
    }

    fn binder(&mut self, indent: usize, head: &str, body: &Rule, end: &str) {
        self.line(indent, head);
        self.seq(body, indent + 1);
        self.line(indent, end);
    }

    fn choose(
        &mut self,
        indent: usize,
        vars: &[String],
        universe: &str,
        qualifier: Option<&Guard>,
        body: &Rule,
    ) {
        let mut head = format!("choose {} in {universe}", vars.join(", "));
        if let Some(q) = qualifier {
            head.push_str(&format!(" satisfying {}", guard_to_string(q)));
        }
        self.binder(indent, &head, body, "endchoose");
    }

    fn sugar(&mut self, s: &Sugar, indent: usize) {
        let names = |vs: &[crate::vocabulary::Symbol]| -> Vec<String> {
            vs.iter().map(|v| v.to_string()).collect()
        };
        match s {
            Sugar::ImportMany { vars, body } => self.binder(
                indent,
                &format!("import {}", names(vars).join(", ")),
                body,
                "endimport",
            ),
            Sugar::ChooseMany {
                vars,
                universe,
                qualifier,
                body,
            } => self.choose(indent, &names(vars), universe, qualifier.as_ref(), body),
            Sugar::DeclMany {
                vars,
                universe,
                body,
            } => {
                self.line(
                    indent,
                    &format!("Var {} ranges over {universe}", names(vars).join(", ")),
                );
                self.item(body, indent + 1);
            }
            Sugar::Extend {
                universe,
                vars,
                body,
            } => self.binder(
                indent,
                &format!("extend {universe} with {}", names(vars).join(", ")),
                body,
                "endextend",
            ),
            Sugar::Let { var, term, body } => {
                self.line(indent, &format!("let {var} = {} in", term_to_string(term)));
                self.item(body, indent + 1);
            }
            Sugar::Case {
                scrutinee,
                arms,
                otherwise,
            } => {
                self.line(indent, &format!("case {} of", term_to_string(scrutinee)));
                for (label, body) in arms {
                    self.line(indent + 1, &format!("{} :", term_to_string(label)));
                    self.item(body, indent + 2);
                }
                if let Some(o) = otherwise {
                    self.line(indent + 1, "else :");
                    self.item(o, indent + 2);
                }
                self.line(indent, "endcase");
            }
            Sugar::ActiveUpdate { target, value } => self.line(
                indent,
                &format!(
                    "Active({}) := {}",
                    term_to_string(target),
                    term_to_string(value)
                ),
            ),
        }
    }
}

/// Renders a rule as a block body (top-level sequence).
pub fn rule_to_string(r: &Rule) -> String {
    let mut p = Printer { out: String::new() };
    p.seq(r, 0);
    p.out
}

fn vocabulary_header(v: &Vocabulary, out: &mut String) {
    let mut decls = Vec::new();
    let mut integers = None;
    for f in v.iter() {
        match &f.interp {
            Interpretation::Builtin(Builtin::Add { modulus }) => integers = Some(*modulus),
            Interpretation::Table | Interpretation::External if !f.is_logic => {
                let mut kind = Vec::new();
                if f.is_external() {
                    kind.push("external");
                } else if f.is_static {
                    kind.push("static");
                } else if !f.is_relation {
                    kind.push("dynamic");
                }
                if f.is_relation {
                    kind.push("relation");
                }
                decls.push(format!("  {} {}/{}", kind.join(" "), f.name, f.arity));
            }
            _ => {}
        }
    }
    if !decls.is_empty() {
        out.push_str("vocabulary:\n");
        for d in decls {
            out.push_str(&d);
            out.push('\n');
        }
    }
    match integers {
        Some(Some(m)) => out.push_str(&format!("pragma integers mod {m}\n")),
        Some(None) => out.push_str("pragma integers\n"),
        None => {}
    }
}

fn indented(text: &str) -> String {
    text.lines()
        .map(|l| format!("  {l}\n"))
        .collect()
}

/// Full program file for `p`, using the source rule.
pub fn program_to_string(p: &Program) -> String {
    let mut out = String::new();
    vocabulary_header(&p.vocab, &mut out);
    out.push_str("program:\n");
    out.push_str(&indented(&rule_to_string(&p.source)));
    out
}

/// Full distributed specification file.
pub fn distributed_to_string(d: &DistributedSpec) -> String {
    let mut out = String::new();
    let shared = d.vocab.without(RESERVE).without(SELF);
    vocabulary_header(&shared, &mut out);
    for (name, m) in &d.modules {
        out.push_str(&format!("module {name}:\n"));
        out.push_str(&indented(&rule_to_string(&m.source)));
    }
    if let Some(g) = &d.initial {
        out.push_str(&format!("initial: {}\n", guard_to_string(g)));
    }
    out
}
