//! Recursive-descent parser for program files, rules and guards.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use super::ast::{DistributedSpec, Document, Guard, Program, Quantifier, Rule, Sugar, Term};
use super::desugar::MOD_PRIME;
use super::lexer::{tokenize, Pos, Tok, Token};
use super::vars::free_vars_guard;
use crate::state::Element;
use crate::vocabulary::{
    integer_names, sym, FunctionName, Symbol, Vocabulary, AND, IMPLIES, MOD, OR,
    RESERVE, SELF,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pos}: {message}")]
pub struct ParseError {
    pub pos: Pos,
    pub message: String,
}

type PResult<T> = Result<T, ParseError>;

const KEYWORDS: &[&str] = &[
    "if",
    "then",
    "elseif",
    "else",
    "endif",
    "import",
    "endimport",
    "extend",
    "with",
    "endextend",
    "choose",
    "in",
    "satisfying",
    "endchoose",
    "Var",
    "ranges",
    "range",
    "over",
    "duplicate",
    "as",
    "endduplicate",
    "let",
    "case",
    "of",
    "endcase",
    "block",
    "endblock",
    "skip",
    "exists",
    "forall",
    "and",
    "or",
    "not",
    "implies",
    "mod",
    "module",
    "initial",
    "program",
    "vocabulary",
    "pragma",
    "alias",
];

const SEQ_TERMINATORS: &[&str] = &[
    "endif",
    "elseif",
    "else",
    "endimport",
    "endextend",
    "endchoose",
    "endduplicate",
    "endblock",
    "endcase",
    "module",
    "initial",
];

const ACTIVE: &str = "Active";

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

/// Partially parsed expression: a plain term, or a guard with quantifiers.
enum Expr {
    T(Term),
    G(Guard),
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
    vocab: Vocabulary,
    aliases: BTreeMap<String, Symbol>,
    scope: Vec<Symbol>,
    free_ok: BTreeSet<String>,
    allow_self: bool,
}

impl Parser {
    fn new(src: &str, vocab: Vocabulary) -> PResult<Self> {
        let toks = tokenize(src).map_err(|e| ParseError {
            pos: e.pos,
            message: e.message,
        })?;
        Ok(Self {
            toks,
            i: 0,
            vocab,
            aliases: BTreeMap::new(),
            scope: Vec::new(),
            free_ok: BTreeSet::new(),
            allow_self: false,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let j = (self.i + k).min(self.toks.len() - 1);
        &self.toks[j].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].pos
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].tok.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(self.error_at(self.pos(), message))
    }

    fn error_at(&self, pos: Pos, message: impl Into<String>) -> ParseError {
        ParseError {
            pos,
            message: message.into(),
        }
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.err(format!("expected `{kw}`, found {}", self.peek()))
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok) -> PResult<()> {
        if self.eat(t) {
            Ok(())
        } else {
            self.err(format!("expected {t}, found {}", self.peek()))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => self.err(format!("expected an identifier, found {other}")),
        }
    }

    fn resolve_alias(&self, name: &str) -> Symbol {
        self.aliases
            .get(name)
            .cloned()
            .unwrap_or_else(|| sym(name))
    }

    fn in_scope(&self, name: &str) -> bool {
        self.scope.iter().any(|v| v.as_ref() == name)
    }

    fn declare(&mut self, f: FunctionName, pos: Pos) -> PResult<()> {
        self.vocab
            .insert(f)
            .map_err(|e| self.error_at(pos, e.to_string()))
    }

    // ---- header ----

    fn parse_decl_line(&mut self) -> PResult<()> {
        let pos = self.pos();
        let mut mods = BTreeSet::new();
        while let Tok::Ident(s) = self.peek() {
            if matches!(s.as_str(), "static" | "dynamic" | "relation" | "external") {
                mods.insert(s.clone());
                self.bump();
            } else {
                break;
            }
        }
        let has = |m: &str| mods.contains(m);
        if has("static") && (has("dynamic") || has("external")) {
            return Err(self.error_at(pos, "a name cannot be both static and dynamic/external"));
        }
        loop {
            let npos = self.pos();
            let name = self.ident()?;
            if is_keyword(&name) || name == RESERVE || name == SELF {
                return Err(self.error_at(npos, format!("`{name}` cannot be declared")));
            }
            self.expect(&Tok::Slash)?;
            let arity = match self.bump() {
                Tok::Int(n) if n >= 0 => n as usize,
                other => return Err(self.error_at(npos, format!("expected an arity, found {other}"))),
            };
            let f = match (has("external"), has("static"), has("relation")) {
                (true, _, true) => FunctionName::external_relation(&name, arity),
                (true, _, false) => FunctionName::external(&name, arity),
                (false, true, true) => FunctionName::static_relation(&name, arity),
                (false, true, false) => FunctionName::static_fn(&name, arity),
                (false, false, true) => FunctionName::relation(&name, arity),
                (false, false, false) => FunctionName::dynamic(&name, arity),
            };
            self.declare(f, npos)?;
            if !(matches!(self.peek(), Tok::Comma) && matches!(self.peek_at(1), Tok::Ident(_)) && matches!(self.peek_at(2), Tok::Slash)) {
                break;
            }
            self.bump();
        }
        Ok(())
    }

    fn parse_vocabulary_section(&mut self) -> PResult<()> {
        self.expect(&Tok::Colon)?;
        while let Tok::Ident(s) = self.peek() {
            if matches!(s.as_str(), "static" | "dynamic" | "relation" | "external") {
                self.parse_decl_line()?;
                self.eat(&Tok::Semi);
            } else {
                break;
            }
        }
        Ok(())
    }

    fn parse_pragma(&mut self) -> PResult<()> {
        let pos = self.pos();
        let what = self.ident()?;
        if what != "integers" {
            return Err(self.error_at(pos, format!("unknown pragma `{what}`")));
        }
        let modulus = if self.eat_kw("mod") {
            match self.bump() {
                Tok::Int(n) if n > 0 => Some(n),
                other => return Err(self.error_at(pos, format!("expected a positive modulus, found {other}"))),
            }
        } else {
            None
        };
        for f in integer_names(modulus) {
            self.declare(f, pos)?;
        }
        Ok(())
    }

    fn parse_alias(&mut self) -> PResult<()> {
        let pos = self.pos();
        let name = self.ident()?;
        self.expect(&Tok::Eq)?;
        let target = self.ident()?;
        if is_keyword(&name) || self.vocab.contains(&name) || self.aliases.contains_key(&name) {
            return Err(self.error_at(pos, format!("alias `{name}` clashes with an existing name")));
        }
        if target != SELF && !self.vocab.contains(&target) {
            return Err(self.error_at(pos, format!("alias target `{target}` is not a known name")));
        }
        self.aliases.insert(name, sym(&target));
        Ok(())
    }

    // ---- rules ----

    fn at_seq_end(&self) -> bool {
        match self.peek() {
            Tok::Eof => true,
            Tok::Ident(s) => SEQ_TERMINATORS.contains(&s.as_str()),
            _ => false,
        }
    }

    fn parse_seq(&mut self) -> PResult<Rule> {
        let mut items = self.parse_items()?;
        if items.len() == 1 {
            Ok(items.pop().expect("one item"))
        } else {
            Ok(Rule::Block(items))
        }
    }

    fn parse_items(&mut self) -> PResult<Vec<Rule>> {
        let mut items = Vec::new();
        loop {
            while self.eat(&Tok::Comma) || self.eat(&Tok::Semi) {}
            if self.at_seq_end() {
                break;
            }
            items.push(self.parse_item()?);
        }
        Ok(items)
    }

    fn with_scope<T>(
        &mut self,
        vars: &[Symbol],
        f: impl FnOnce(&mut Self) -> PResult<T>,
    ) -> PResult<T> {
        let depth = self.scope.len();
        self.scope.extend(vars.iter().cloned());
        let out = f(self);
        self.scope.truncate(depth);
        out
    }

    fn var_name(&mut self) -> PResult<Symbol> {
        let pos = self.pos();
        let v = self.ident()?;
        if is_keyword(&v) || v == RESERVE || v == SELF || self.aliases.contains_key(&v) {
            return Err(self.error_at(pos, format!("`{v}` cannot be used as a variable")));
        }
        Ok(sym(&v))
    }

    fn var_list(&mut self) -> PResult<Vec<Symbol>> {
        let mut vars = vec![self.var_name()?];
        while matches!(self.peek(), Tok::Comma) && matches!(self.peek_at(1), Tok::Ident(s) if !is_keyword(s)) {
            // `v1, v2` continues the list only when no `:=` or `(` follows the next name
            if matches!(self.peek_at(2), Tok::Assign | Tok::LParen) {
                break;
            }
            self.bump();
            vars.push(self.var_name()?);
        }
        Ok(vars)
    }

    fn universe(&mut self) -> PResult<Symbol> {
        let pos = self.pos();
        let name = self.ident()?;
        let name = self.resolve_alias(&name);
        if name.as_ref() == RESERVE {
            return Err(self.error_at(pos, "`Reserve` cannot be mentioned in rules"));
        }
        match self.vocab.get(&name) {
            Some(f) if f.is_universe() => Ok(name),
            Some(f) => Err(self.error_at(pos, format!("`{f}` is not a universe (unary relation)"))),
            None => Err(self.error_at(pos, format!("unknown universe `{name}`"))),
        }
    }

    fn parse_item(&mut self) -> PResult<Rule> {
        let Tok::Ident(word) = self.peek().clone() else {
            return self.err(format!("expected a rule, found {}", self.peek()));
        };
        match word.as_str() {
            "if" => self.parse_if(),
            "import" => {
                self.bump();
                let vars = self.var_list()?;
                let body = self.with_scope(&vars, |p| p.parse_seq())?;
                self.expect_kw("endimport")?;
                Ok(if vars.len() == 1 {
                    Rule::Import {
                        var: vars[0].clone(),
                        body: Box::new(body),
                    }
                } else {
                    Rule::Sugar(Sugar::ImportMany {
                        vars,
                        body: Box::new(body),
                    })
                })
            }
            "extend" => {
                self.bump();
                let upos = self.pos();
                let universe = self.universe()?;
                if !self.vocab.get(&universe).is_some_and(FunctionName::is_updatable) {
                    return Err(self.error_at(upos, format!("`{universe}` is static and cannot be extended")));
                }
                self.expect_kw("with")?;
                let vars = self.var_list()?;
                let body = self.with_scope(&vars, |p| p.parse_seq())?;
                self.expect_kw("endextend")?;
                Ok(Rule::Sugar(Sugar::Extend {
                    universe,
                    vars,
                    body: Box::new(body),
                }))
            }
            "choose" => {
                self.bump();
                let vars = self.var_list()?;
                self.expect_kw("in")?;
                let universe = self.universe()?;
                let (qualifier, body) = self.with_scope(&vars, |p| {
                    let q = if p.eat_kw("satisfying") {
                        Some(p.parse_guard_expr()?)
                    } else {
                        None
                    };
                    Ok((q, p.parse_seq()?))
                })?;
                self.expect_kw("endchoose")?;
                Ok(if vars.len() == 1 {
                    Rule::Choose {
                        var: vars[0].clone(),
                        universe,
                        qualifier,
                        body: Box::new(body),
                    }
                } else {
                    Rule::Sugar(Sugar::ChooseMany {
                        vars,
                        universe,
                        qualifier,
                        body: Box::new(body),
                    })
                })
            }
            "Var" => {
                self.bump();
                let vars = self.var_list()?;
                if !self.eat_kw("ranges") {
                    self.expect_kw("range")?;
                }
                self.expect_kw("over")?;
                let universe = self.universe()?;
                let body = self.with_scope(&vars, |p| p.parse_item_or_skip())?;
                Ok(if vars.len() == 1 {
                    Rule::Decl {
                        var: vars[0].clone(),
                        range: super::ast::Range::Universe(universe),
                        body: Box::new(body),
                    }
                } else {
                    Rule::Sugar(Sugar::DeclMany {
                        vars,
                        universe,
                        body: Box::new(body),
                    })
                })
            }
            "duplicate" => {
                self.bump();
                let term = self.parse_term()?;
                self.expect_kw("as")?;
                let var = self.var_name()?;
                let body = self.with_scope(std::slice::from_ref(&var), |p| p.parse_seq())?;
                self.expect_kw("endduplicate")?;
                Ok(Rule::Duplicate {
                    term,
                    var,
                    body: Box::new(body),
                })
            }
            "let" => {
                self.bump();
                let var = self.var_name()?;
                self.expect(&Tok::Eq)?;
                let term = self.parse_term()?;
                self.expect_kw("in")?;
                let body = self.with_scope(std::slice::from_ref(&var), |p| p.parse_item_or_skip())?;
                Ok(Rule::Sugar(Sugar::Let {
                    var,
                    term,
                    body: Box::new(body),
                }))
            }
            "case" => self.parse_case(),
            "block" => {
                self.bump();
                let items = self.parse_items()?;
                self.expect_kw("endblock")?;
                Ok(Rule::Block(items))
            }
            "skip" => {
                self.bump();
                Ok(Rule::skip())
            }
            w if is_keyword(w) => self.err(format!("unexpected keyword `{w}`")),
            _ => self.parse_update(),
        }
    }

    fn parse_item_or_skip(&mut self) -> PResult<Rule> {
        while self.eat(&Tok::Comma) || self.eat(&Tok::Semi) {}
        if self.at_seq_end() {
            return Ok(Rule::skip());
        }
        self.parse_item()
    }

    fn parse_if(&mut self) -> PResult<Rule> {
        self.expect_kw("if")?;
        let mut clauses = Vec::new();
        let g = self.parse_guard_expr()?;
        self.expect_kw("then")?;
        clauses.push((g, self.parse_seq()?));
        let mut otherwise = None;
        loop {
            if self.eat_kw("elseif") {
                let g = self.parse_guard_expr()?;
                self.expect_kw("then")?;
                clauses.push((g, self.parse_seq()?));
            } else if self.eat_kw("else") {
                otherwise = Some(Box::new(self.parse_seq()?));
                self.expect_kw("endif")?;
                break;
            } else {
                self.expect_kw("endif")?;
                break;
            }
        }
        Ok(Rule::Cond { clauses, otherwise })
    }

    fn parse_case(&mut self) -> PResult<Rule> {
        self.expect_kw("case")?;
        let scrutinee = self.parse_term()?;
        self.expect_kw("of")?;
        let mut arms = Vec::new();
        let mut otherwise = None;
        loop {
            while self.eat(&Tok::Comma) || self.eat(&Tok::Semi) {}
            if self.eat_kw("endcase") {
                break;
            }
            if self.eat_kw("else") {
                self.expect(&Tok::Colon)?;
                otherwise = Some(Box::new(self.parse_item_or_skip()?));
                while self.eat(&Tok::Comma) || self.eat(&Tok::Semi) {}
                self.expect_kw("endcase")?;
                break;
            }
            let label = self.parse_term()?;
            self.expect(&Tok::Colon)?;
            arms.push((label, self.parse_item_or_skip()?));
        }
        Ok(Rule::Sugar(Sugar::Case {
            scrutinee,
            arms,
            otherwise,
        }))
    }

    fn parse_update(&mut self) -> PResult<Rule> {
        let pos = self.pos();
        let raw = self.ident()?;
        let name = self.resolve_alias(&raw);
        if name.as_ref() == RESERVE {
            return Err(self.error_at(pos, "`Reserve` cannot be mentioned in rules"));
        }
        if name.as_ref() == SELF {
            return Err(self.error_at(pos, "`Self` is a logic name and cannot be the subject of an update"));
        }
        if self.in_scope(&name) || self.free_ok.contains(name.as_ref()) {
            return Err(self.error_at(pos, format!("variable `{name}` cannot be the subject of an update")));
        }
        if name.as_ref() == ACTIVE && !self.vocab.contains(ACTIVE) {
            self.ensure_active_names(pos)?;
            self.expect(&Tok::LParen)?;
            let target = self.parse_term()?;
            self.expect(&Tok::RParen)?;
            self.expect(&Tok::Assign)?;
            let vpos = self.pos();
            let value = self.parse_term()?;
            if !value.is_boolean(&self.vocab) {
                return Err(self.error_at(vpos, "`Active(t) := t0` needs a Boolean t0"));
            }
            return Ok(Rule::Sugar(Sugar::ActiveUpdate { target, value }));
        }
        let f = match self.vocab.get(&name) {
            Some(f) => f.clone(),
            None => return Err(self.error_at(pos, format!("unknown function name `{name}` as update subject"))),
        };
        if !f.is_updatable() {
            let why = if f.is_logic {
                "is a logic name"
            } else if f.is_external() {
                "is external"
            } else {
                "is static"
            };
            return Err(self.error_at(pos, format!("`{name}` {why} and cannot be updated")));
        }
        let args = self.parse_args(&f, pos)?;
        self.expect(&Tok::Assign)?;
        let vpos = self.pos();
        let value = self.parse_term()?;
        if f.is_relation && !value.is_boolean(&self.vocab) {
            return Err(self.error_at(vpos, format!("relation `{name}` needs a Boolean right-hand side")));
        }
        Ok(Rule::Update {
            subject: name,
            args,
            value,
        })
    }

    fn ensure_active_names(&mut self, pos: Pos) -> PResult<()> {
        if !self.vocab.contains(MOD) {
            self.declare(FunctionName::dynamic(MOD, 1), pos)?;
        }
        if !self.vocab.contains(MOD_PRIME) {
            self.declare(FunctionName::dynamic(MOD_PRIME, 1), pos)?;
        }
        Ok(())
    }

    fn parse_args(&mut self, f: &FunctionName, pos: Pos) -> PResult<Vec<Term>> {
        let mut args = Vec::new();
        if self.eat(&Tok::LParen) {
            if !self.eat(&Tok::RParen) {
                loop {
                    args.push(self.parse_term()?);
                    if self.eat(&Tok::RParen) {
                        break;
                    }
                    self.expect(&Tok::Comma)?;
                }
            }
        }
        if args.len() != f.arity {
            return Err(self.error_at(
                pos,
                format!("`{}` expects {} argument(s), got {}", f.name, f.arity, args.len()),
            ));
        }
        if f.is_external() && args.iter().any(|a| self.mentions_external(a)) {
            return Err(self.error_at(pos, format!("external function `{}` cannot take external arguments", f.name)));
        }
        Ok(args)
    }

    fn mentions_external(&self, t: &Term) -> bool {
        match t {
            Term::Var(_) => false,
            Term::App(f, args) => {
                self.vocab.get(f).is_some_and(FunctionName::is_external)
                    || args.iter().any(|a| self.mentions_external(a))
            }
        }
    }

    // ---- expressions ----

    fn parse_term(&mut self) -> PResult<Term> {
        let pos = self.pos();
        match self.parse_expr()? {
            Expr::T(t) => Ok(t),
            Expr::G(_) => Err(self.error_at(pos, "quantified guards cannot be used as terms")),
        }
    }

    fn parse_guard_expr(&mut self) -> PResult<Guard> {
        let pos = self.pos();
        let e = self.parse_expr()?;
        self.to_guard(e, pos)
    }

    fn to_guard(&self, e: Expr, pos: Pos) -> PResult<Guard> {
        match e {
            Expr::G(g) => Ok(g),
            Expr::T(t) if t.is_boolean(&self.vocab) => Ok(Guard::Atom(t)),
            Expr::T(_) => Err(self.error_at(pos, "guard is not a Boolean term")),
        }
    }

    fn parse_expr(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let lhs = self.parse_or()?;
        if self.eat_kw("implies") {
            let rhs = self.parse_expr()?;
            return self.connective(IMPLIES, lhs, rhs, pos);
        }
        Ok(lhs)
    }

    fn connective(&self, op: &str, a: Expr, b: Expr, pos: Pos) -> PResult<Expr> {
        Ok(match (a, b) {
            (Expr::T(a), Expr::T(b)) => Expr::T(Term::App(sym(op), vec![a, b])),
            (a, b) => {
                let (a, b) = (Box::new(self.to_guard(a, pos)?), Box::new(self.to_guard(b, pos)?));
                Expr::G(match op {
                    AND => Guard::And(a, b),
                    OR => Guard::Or(a, b),
                    _ => Guard::Implies(a, b),
                })
            }
        })
    }

    fn parse_or(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let mut lhs = self.parse_and()?;
        while self.eat_kw("or") {
            let rhs = self.parse_and()?;
            lhs = self.connective(OR, lhs, rhs, pos)?;
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let mut lhs = self.parse_not()?;
        while self.eat_kw("and") {
            let rhs = self.parse_not()?;
            lhs = self.connective(AND, lhs, rhs, pos)?;
        }
        Ok(lhs)
    }

    fn parse_not(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        if self.eat_kw("not") {
            return Ok(match self.parse_not()? {
                Expr::T(t) => Expr::T(Term::not(t)),
                Expr::G(g) => Expr::G(Guard::Not(Box::new(g))),
            });
        }
        if matches!(self.peek(), Tok::LParen)
            && matches!(self.peek_at(1), Tok::Ident(s) if s == "exists" || s == "forall")
        {
            self.bump();
            let kind = if self.eat_kw("exists") {
                Quantifier::Exists
            } else {
                self.expect_kw("forall")?;
                Quantifier::Forall
            };
            let var = self.var_name()?;
            self.expect_kw("in")?;
            let universe = self.universe()?;
            self.expect(&Tok::RParen)?;
            let body = self.with_scope(std::slice::from_ref(&var), |p| {
                let bpos = p.pos();
                let e = p.parse_not()?;
                p.to_guard(e, bpos)
            })?;
            return Ok(Expr::G(Guard::Quant {
                kind,
                var,
                universe,
                body: Box::new(body),
            }));
        }
        let _ = pos;
        self.parse_cmp()
    }

    fn cmp_op(&self) -> Option<Tok> {
        match self.peek() {
            t @ (Tok::Eq | Tok::Neq | Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge) => Some(t.clone()),
            _ => None,
        }
    }

    fn parse_cmp(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let first = self.parse_add()?;
        let Some(_) = self.cmp_op() else {
            return Ok(first);
        };
        let mut operands = vec![self.expect_term(first, pos)?];
        let mut ops = Vec::new();
        while let Some(op) = self.cmp_op() {
            self.bump();
            let opos = self.pos();
            let e = self.parse_add()?;
            ops.push((op, opos));
            operands.push(self.expect_term(e, opos)?);
        }
        let mut acc: Option<Term> = None;
        for (k, (op, opos)) in ops.into_iter().enumerate() {
            let (a, b) = (operands[k].clone(), operands[k + 1].clone());
            let need = |p: &Self, name: &str| -> PResult<()> {
                if p.vocab.contains(name) {
                    Ok(())
                } else {
                    Err(p.error_at(opos, format!("`{name}` needs `pragma integers`")))
                }
            };
            let atom = match op {
                Tok::Eq => Term::eq(a, b),
                Tok::Neq => Term::not(Term::eq(a, b)),
                Tok::Lt => {
                    need(self, "<")?;
                    Term::app("<", vec![a, b])
                }
                Tok::Le => {
                    need(self, "<=")?;
                    Term::app("<=", vec![a, b])
                }
                Tok::Gt => {
                    need(self, "<")?;
                    Term::app("<", vec![b, a])
                }
                Tok::Ge => {
                    need(self, "<=")?;
                    Term::app("<=", vec![b, a])
                }
                _ => unreachable!("filtered by cmp_op"),
            };
            acc = Some(match acc {
                None => atom,
                Some(prev) => Term::and(prev, atom),
            });
        }
        Ok(Expr::T(acc.expect("at least one comparison")))
    }

    fn expect_term(&self, e: Expr, pos: Pos) -> PResult<Term> {
        match e {
            Expr::T(t) => Ok(t),
            Expr::G(_) => Err(self.error_at(pos, "quantified guards cannot be compared")),
        }
    }

    fn arith(&self, op: &str, a: Expr, b: Expr, pos: Pos) -> PResult<Expr> {
        if !self.vocab.contains(op) {
            return Err(self.error_at(pos, format!("`{op}` needs `pragma integers`")));
        }
        let a = self.expect_term(a, pos)?;
        let b = self.expect_term(b, pos)?;
        Ok(Expr::T(Term::app(op, vec![a, b])))
    }

    fn parse_add(&mut self) -> PResult<Expr> {
        let mut lhs = self.parse_mul()?;
        loop {
            let pos = self.pos();
            let op = match self.peek() {
                Tok::Plus => "+",
                Tok::Minus => "-",
                _ => break,
            };
            self.bump();
            let rhs = self.parse_mul()?;
            lhs = self.arith(op, lhs, rhs, pos)?;
        }
        Ok(lhs)
    }

    fn parse_mul(&mut self) -> PResult<Expr> {
        let mut lhs = self.parse_primary()?;
        loop {
            let pos = self.pos();
            let op = if matches!(self.peek(), Tok::Star) {
                "*"
            } else if self.at_kw("mod") {
                "mod"
            } else {
                break;
            };
            self.bump();
            let rhs = self.parse_primary()?;
            lhs = self.arith(op, lhs, rhs, pos)?;
        }
        Ok(lhs)
    }

    fn parse_primary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                if !self.vocab.contains("+") {
                    return Err(self.error_at(pos, "integer literals need `pragma integers`"));
                }
                let name = n.to_string();
                self.declare(FunctionName::literal(&name, Element::Int(n)), pos)?;
                Ok(Expr::T(Term::constant(&name)))
            }
            Tok::LParen => {
                self.bump();
                let e = self.parse_expr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(raw) => {
                if is_keyword(&raw) {
                    return self.err(format!("unexpected keyword `{raw}`"));
                }
                self.bump();
                self.name_term(&raw, pos).map(Expr::T)
            }
            other => self.err(format!("expected a term, found {other}")),
        }
    }

    fn name_term(&mut self, raw: &str, pos: Pos) -> PResult<Term> {
        let name = self.resolve_alias(raw);
        if self.in_scope(&name) || self.free_ok.contains(name.as_ref()) {
            if matches!(self.peek(), Tok::LParen) {
                return Err(self.error_at(pos, format!("variable `{name}` cannot be applied")));
            }
            return Ok(Term::Var(name));
        }
        if name.as_ref() == RESERVE {
            return Err(self.error_at(pos, "`Reserve` cannot be mentioned in rules"));
        }
        if name.as_ref() == SELF && !self.allow_self {
            return Err(self.error_at(pos, "`Self` can only be used inside a module"));
        }
        if name.as_ref() == ACTIVE && !self.vocab.contains(ACTIVE) {
            self.ensure_active_names(pos)?;
            self.expect(&Tok::LParen)?;
            let t = self.parse_term()?;
            self.expect(&Tok::RParen)?;
            return Ok(Term::eq(
                Term::App(sym(MOD), vec![t.clone()]),
                Term::App(sym(MOD_PRIME), vec![t]),
            ));
        }
        if let Some(f) = self.vocab.get(&name).cloned() {
            let args = self.parse_args(&f, pos)?;
            return Ok(Term::App(name, args));
        }
        if matches!(self.peek(), Tok::LParen) {
            return Err(self.error_at(pos, format!("unknown function name `{name}`")));
        }
        self.declare(FunctionName::literal(&name, Element::Named(name.clone())), pos)?;
        Ok(Term::App(name, Vec::new()))
    }

    fn expect_eof(&self) -> PResult<()> {
        if matches!(self.peek(), Tok::Eof) {
            Ok(())
        } else {
            self.err(format!("unexpected {}", self.peek()))
        }
    }
}

/// Options for parsing a rule or guard against an existing vocabulary.
#[derive(Debug, Clone, Default)]
pub struct RuleOptions {
    /// Identifiers treated as free variables instead of function names.
    pub free_vars: Vec<String>,
    /// Allow `Self` (module bodies and agent-relative guards).
    pub allow_self: bool,
    pub aliases: BTreeMap<String, String>,
}

fn rule_parser(src: &str, vocab: &Vocabulary, opts: &RuleOptions) -> PResult<Parser> {
    let mut p = Parser::new(src, vocab.clone())?;
    p.free_ok = opts.free_vars.iter().cloned().collect();
    p.allow_self = opts.allow_self;
    if opts.allow_self && !p.vocab.contains(SELF) {
        p.vocab
            .insert(FunctionName::self_name())
            .map_err(|e| p.error_at(Pos::default(), e.to_string()))?;
    }
    p.aliases = opts
        .aliases
        .iter()
        .map(|(k, v)| (k.clone(), sym(v)))
        .collect();
    Ok(p)
}

/// Parses a rule against `vocab`. Unknown nullary identifiers become named
/// literals, so the returned vocabulary may be larger than the input.
pub fn parse_rule(src: &str, vocab: &Vocabulary, opts: &RuleOptions) -> PResult<(Rule, Vocabulary)> {
    let mut p = rule_parser(src, vocab, opts)?;
    let r = p.parse_seq()?;
    p.expect_eof()?;
    Ok((r, p.vocab))
}

/// Parses a closed or open guard against `vocab`.
pub fn parse_guard(src: &str, vocab: &Vocabulary, opts: &RuleOptions) -> PResult<(Guard, Vocabulary)> {
    let mut p = rule_parser(src, vocab, opts)?;
    let g = p.parse_guard_expr()?;
    p.expect_eof()?;
    Ok((g, p.vocab))
}

/// Parses a term against `vocab`.
pub fn parse_term(src: &str, vocab: &Vocabulary, opts: &RuleOptions) -> PResult<(Term, Vocabulary)> {
    let mut p = rule_parser(src, vocab, opts)?;
    let t = p.parse_term()?;
    p.expect_eof()?;
    Ok((t, p.vocab))
}

/// Module names declared with `module Name:` anywhere in the token stream.
fn module_names(toks: &[Token]) -> Vec<(String, Pos)> {
    toks.windows(3)
        .filter_map(|w| match (&w[0].tok, &w[1].tok, &w[2].tok) {
            (Tok::Ident(m), Tok::Ident(name), Tok::Colon) if m == "module" => {
                Some((name.clone(), w[1].pos))
            }
            _ => None,
        })
        .collect()
}

/// Parses a program file: a single program or a distributed specification.
pub fn parse_document(src: &str) -> PResult<Document> {
    let mut p = Parser::new(src, Vocabulary::default())?;
    loop {
        let pos = p.pos();
        match p.peek().clone() {
            Tok::Ident(w) if w == "vocabulary" => {
                p.bump();
                p.parse_vocabulary_section()?;
            }
            Tok::Ident(w) if w == "pragma" => {
                p.bump();
                p.parse_pragma()?;
            }
            Tok::Ident(w) if w == "alias" => {
                p.bump();
                p.parse_alias()?;
            }
            Tok::Ident(w) if w == "program" => {
                p.bump();
                p.expect(&Tok::Colon)?;
                let source = p.parse_seq()?;
                p.expect_eof()?;
                return Ok(Document::Program(Program::from_rule(p.vocab, source)));
            }
            Tok::Ident(w) if w == "module" || w == "initial" => {
                return parse_modules(p).map(Document::Distributed);
            }
            Tok::Eof => return Err(p.error_at(pos, "expected `program:` or `module Name:`")),
            other => return Err(p.error_at(pos, format!("unexpected {other} in file header"))),
        }
    }
}

fn parse_modules(mut p: Parser) -> PResult<DistributedSpec> {
    for (name, pos) in module_names(&p.toks) {
        if is_keyword(&name) || name == SELF || name == RESERVE {
            return Err(p.error_at(pos, format!("`{name}` cannot name a module")));
        }
        p.declare(FunctionName::literal(&name, Element::Named(sym(&name))), pos)?;
    }
    if !p.vocab.contains(MOD) {
        p.declare(FunctionName::dynamic(MOD, 1), Pos::default())?;
    }
    let mod_ok = p.vocab.get(MOD).is_some_and(|f| f.arity == 1 && f.is_updatable() && !f.is_relation);
    if !mod_ok {
        return p.err("`Mod` must be a dynamic unary function");
    }
    p.declare(FunctionName::self_name(), Pos::default())?;
    let mut sources: BTreeMap<Symbol, Rule> = BTreeMap::new();
    let mut initial = None;
    loop {
        let pos = p.pos();
        if p.eat_kw("module") {
            let name = sym(&p.ident()?);
            p.expect(&Tok::Colon)?;
            p.allow_self = true;
            let body = p.parse_seq()?;
            p.allow_self = false;
            if sources.insert(name.clone(), body).is_some() {
                return Err(p.error_at(pos, format!("module `{name}` is defined twice")));
            }
        } else if p.eat_kw("initial") {
            p.expect(&Tok::Colon)?;
            let gpos = p.pos();
            let g = p.parse_guard_expr()?;
            if !free_vars_guard(&g).is_empty() {
                return Err(p.error_at(gpos, "initial condition must be closed"));
            }
            initial = Some(g);
        } else if matches!(p.peek(), Tok::Eof) {
            break;
        } else {
            return p.err(format!("expected `module` or `initial`, found {}", p.peek()));
        }
    }
    if sources.is_empty() {
        return p.err("a distributed specification needs at least one module");
    }
    Ok(DistributedSpec::from_modules(p.vocab.without(SELF), sources, initial))
}

/// Parses a file that must contain a single program.
pub fn parse_program(src: &str) -> PResult<Program> {
    match parse_document(src)? {
        Document::Program(p) => Ok(p),
        Document::Distributed(_) => Err(ParseError {
            pos: Pos { line: 1, col: 1 },
            message: "expected a single program, found modules".into(),
        }),
    }
}

/// Parses a file that must contain a distributed specification.
pub fn parse_distributed(src: &str) -> PResult<DistributedSpec> {
    match parse_document(src)? {
        Document::Distributed(d) => Ok(d),
        Document::Program(_) => Err(ParseError {
            pos: Pos { line: 1, col: 1 },
            message: "expected `module Name:` sections".into(),
        }),
    }
}

impl Program {
    /// Builds a program from a source rule: adds `Reserve` when the rule
    /// imports, desugars, and renames binders apart from the vocabulary.
    pub fn from_rule(mut vocab: Vocabulary, source: Rule) -> Program {
        if source.uses_reserve() {
            vocab
                .insert(FunctionName::reserve())
                .expect("Reserve is never user-declared");
        }
        let core = super::desugar::desugar(&source);
        let rule = super::vars::make_perspicuous(&core, &vocab.identifiers());
        Program {
            vocab: Arc::new(vocab),
            rule,
            source,
        }
    }
}

impl DistributedSpec {
    /// Assembles modules over a shared vocabulary (which must not hold `Self`).
    /// Each module's vocabulary is the part of the shared one its rule uses,
    /// plus `Self`.
    pub fn from_modules(
        mut shared: Vocabulary,
        sources: BTreeMap<Symbol, Rule>,
        initial: Option<Guard>,
    ) -> DistributedSpec {
        if sources.values().any(Rule::uses_reserve) {
            shared
                .insert(FunctionName::reserve())
                .expect("Reserve is never user-declared");
        }
        let mut with_self = shared.clone();
        with_self
            .insert(FunctionName::self_name())
            .expect("shared vocabulary excludes Self");
        let avoid = with_self.identifiers();
        let modules = sources
            .into_iter()
            .map(|(name, source)| {
                let core = super::desugar::desugar(&source);
                let rule = super::vars::make_perspicuous(&core, &avoid);
                let mut keep: BTreeSet<Symbol> = super::vars::fun_of(&rule);
                keep.insert(sym(SELF));
                if rule.uses_reserve() {
                    keep.insert(sym(RESERVE));
                }
                let vocab = with_self
                    .restrict(keep.iter().map(|s| s.as_ref()))
                    .expect("names come from the shared vocabulary");
                (
                    name,
                    Program {
                        vocab: Arc::new(vocab),
                        rule,
                        source,
                    },
                )
            })
            .collect();
        DistributedSpec {
            vocab: Arc::new(shared),
            modules,
            initial,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::vars::fun_of;

    const TREE: &str = "
vocabulary:
  dynamic c/0
  static FirstChild/1, NextSib/1, Parent/1
program:
  if FirstChild(c) != undef then c := FirstChild(c)
  elseif NextSib(c) != undef then c := NextSib(c)
  elseif Parent(c) != undef then c := Parent(c)
  endif
";

    const PHILOSOPHERS: &str = "
vocabulary:
  dynamic Mode/1, Fork/1
pragma integers mod 3
alias Me = Self
module Phil:
  if Mode(Me)=think and Fork(Me)=Fork(Me+1)=down then
    Fork(Me):=up, Fork(Me+1):=up, Mode(Me):=eat
  elseif Mode(Me)=eat then
    Fork(Me):=down, Fork(Me+1):=down, Mode(Me):=think
  endif
";

    #[test]
    fn tree_rule_has_three_clauses() {
        let p = parse_program(TREE).unwrap();
        let Rule::Cond { clauses, otherwise } = &p.rule else {
            panic!("expected a conditional, got {:?}", p.rule)
        };
        assert_eq!(clauses.len(), 3);
        assert!(otherwise.is_none());
        assert_eq!(
            clauses[1].1,
            Rule::update("c", vec![], Term::app("NextSib", vec![Term::constant("c")]))
        );
        let names: Vec<String> = fun_of(&p.rule).iter().map(|s| s.to_string()).collect();
        for n in ["FirstChild", "NextSib", "Parent", "c", "undef", "=", "not"] {
            assert!(names.contains(&n.to_string()), "{n} missing");
        }
    }

    #[test]
    fn reserve_cannot_be_mentioned() {
        let src = "vocabulary:\n dynamic f/1\nprogram:\n Reserve(x) := true\n";
        let e = parse_program(src).unwrap_err();
        assert_eq!(e.pos.line, 4);
        assert!(e.message.contains("Reserve"));
        let src = "vocabulary:\n dynamic f/1\nprogram:\n f(a) := Reserve(a)\n";
        assert!(parse_program(src).is_err());
        let src = "vocabulary:\n dynamic f/1\nprogram:\n choose v in Reserve f(v) := a endchoose\n";
        assert!(parse_program(src).is_err());
    }

    #[test]
    fn philosophers_alias_resolves_to_self() {
        let d = parse_distributed(PHILOSOPHERS).unwrap();
        assert!(!d.vocab.contains(SELF));
        assert!(d.vocab.contains(MOD));
        assert!(d.vocab.contains("Phil"));
        let phil = &d.modules[&sym("Phil")];
        let names: BTreeSet<String> = fun_of(&phil.rule).iter().map(|s| s.to_string()).collect();
        let expected: BTreeSet<String> = [
            "Mode", "Fork", "Self", "think", "eat", "up", "down", "+", "1", "=", "and",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        assert_eq!(names, expected);
        assert!(phil.vocab.contains(SELF));
        assert!(!phil.vocab.contains("Me"));
    }

    #[test]
    fn rejects_illegal_subjects() {
        let head = "vocabulary:\n dynamic f/1\n static g/1\n relation r/1\n external e/1\nprogram:\n";
        for body in [
            "g(a) := b",
            "e(a) := b",
            "undef := a",
            "= (a) := b",
            "r(a) := b",
            "f(a, b) := c",
            "import v v := a endimport",
            "f(e(e(a))) := b",
            "f(Self) := a",
            "Self := a",
            "if f(a) then f(a) := b endif",
        ] {
            let src = format!("{head}{body}\n");
            assert!(parse_program(&src).is_err(), "accepted `{body}`");
        }
        let ok = format!("{head}f(e(a)) := g(b)\nr(a) := not r(b)\n");
        parse_program(&ok).unwrap();
    }

    #[test]
    fn double_import_is_renamed_apart() {
        let src = "vocabulary:\n dynamic Parent/1, CurrentNode/0\nprogram:\n\
                   import v Parent(v) := CurrentNode endimport\n\
                   import v Parent(v) := CurrentNode endimport\n";
        let p = parse_program(src).unwrap();
        assert!(p.vocab.uses_reserve());
        let bs = crate::syntax::vars::binders(&p.rule);
        assert_eq!(bs.len(), 2);
        assert_ne!(bs[0], bs[1]);
    }

    #[test]
    fn extend_and_declarations() {
        let src = "vocabulary:\n dynamic FirstChild/1, SecondChild/1, NextSib/1\n \
                   relation Nodes/1, Leaf/1, U/1\nprogram:\n\
                   Var u ranges over U\n\
                   extend Nodes with v1,v2\n\
                     if Leaf(u) then\n FirstChild(u) := v1\n SecondChild(u) := v2\n NextSib(v1) := v2\n endif\n\
                   endextend\n";
        let p = parse_program(src).unwrap();
        let Rule::Decl { var, body, .. } = &p.rule else { panic!() };
        assert_eq!(var.as_ref(), "u");
        assert!(matches!(**body, Rule::Import { .. }));
        assert!(crate::syntax::vars::free_vars(&p.rule).is_empty());
    }

    #[test]
    fn quantified_guards() {
        let vocab = crate::vocabulary::make_vocabulary([
            FunctionName::relation("U", 1),
            FunctionName::relation("P", 1),
            FunctionName::relation("Q", 1),
        ])
        .unwrap();
        let (g, _) = parse_guard(
            "(exists v in U) P(v) and (forall v in U) (P(v) implies Q(v))",
            &vocab,
            &RuleOptions::default(),
        )
        .unwrap();
        let Guard::And(a, b) = g else { panic!() };
        assert!(matches!(*a, Guard::Quant { kind: Quantifier::Exists, .. }));
        let Guard::Quant { body, .. } = *b else { panic!() };
        assert!(matches!(*body, Guard::Atom(_)));
        let (closed, _) = parse_guard("P(v)", &vocab, &RuleOptions::default()).unwrap();
        assert!(free_vars_guard(&closed).is_empty());
        let opts = RuleOptions {
            free_vars: vec!["v".into()],
            ..Default::default()
        };
        parse_guard("P(v)", &vocab, &opts).unwrap();
    }

    #[test]
    fn case_let_and_active_sugar() {
        let src = "vocabulary:\n dynamic f/0, g/1, c/0\nprogram:\n\
                   case c of\n one : f := a\n two : f := b\n else : skip\n endcase\n\
                   let x = g(c) in g(x) := x\n\
                   Active(c) := g(c) = a\n";
        let p = parse_program(src).unwrap();
        assert!(p.rule.is_core());
        assert!(p.vocab.contains("Mod'"));
        let Rule::Block(items) = &p.source else { panic!() };
        assert!(matches!(items[0], Rule::Sugar(Sugar::Case { .. })));
        assert!(matches!(items[1], Rule::Sugar(Sugar::Let { .. })));
        assert!(matches!(items[2], Rule::Sugar(Sugar::ActiveUpdate { .. })));
    }

    #[test]
    fn chained_comparison_and_integers() {
        let src = "vocabulary:\n dynamic n/0\npragma integers\nprogram:\n\
                   if 0 < n and n <= 3 then n := n + 1 * 2 endif\n";
        let p = parse_program(src).unwrap();
        let Rule::Cond { clauses, .. } = &p.rule else { panic!() };
        assert_eq!(
            clauses[0].1,
            Rule::update(
                "n",
                vec![],
                Term::app(
                    "+",
                    vec![Term::constant("n"), Term::app("*", vec![Term::constant("1"), Term::constant("2")])]
                )
            )
        );
        let no_pragma = "vocabulary:\n dynamic n/0\nprogram:\n n := 1\n";
        assert!(parse_program(no_pragma).is_err());
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let e = parse_program("vocabulary:\n dynamic f/0\nprogram:\n if f = a then\n  f := \nendif\n").unwrap_err();
        assert_eq!(e.pos.line, 6);
        let e = parse_program("program:\n  x := ").unwrap_err();
        assert_eq!(e.pos.line, 2);
    }

    #[test]
    fn modules_can_name_each_other() {
        let src = "vocabulary:\n dynamic Mode/1, f/1, Member1/1, Member2/1, t1/0, t2/0\n\
                   alias Us = Self\n\
                   module Team:\n\
                   if Mode(Member1(Us)) = Mode(Member2(Us)) = Ready then f(t2) := t1 endif\n\
                   module Sender:\n skip\n\
                   module Receiver:\n skip\n\
                   initial: Mod(team1) = Team\n";
        let d = parse_distributed(src).unwrap();
        assert_eq!(d.modules.len(), 3);
        assert!(d.initial.is_some());
        let team = &d.modules[&sym("Team")];
        assert!(team.vocab.contains("Member1") && !team.vocab.contains("Mode'"));
        assert!(!d.modules[&sym("Sender")].vocab.contains("f"));
    }
}
