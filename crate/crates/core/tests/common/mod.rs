//! Random rule generators and state enumerators shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use ealgebra::state::{parse_state, Element, LoadOptions, Location, State};
use ealgebra::syntax::{parse_distributed, parse_program, DistributedSpec, Program};
use ealgebra::vocabulary::Vocabulary;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Three named elements; `undef` is the fourth value a location can hold.
pub const ELEMS: [&str; 3] = ["a", "b", "c"];

/// Three dynamic names: `x`, `y` and the unary `f`.
pub const BASIC_HEADER: &str = "vocabulary:\n  dynamic x/0, y/0, f/1\nprogram:\n";

/// The basic names plus two universes for `choose`.
pub const CHOOSE_HEADER: &str =
    "vocabulary:\n  dynamic x/0, y/0, f/1\n  relation U/1, V/1\nprogram:\n";

pub fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

pub fn corpus_text(name: &str) -> String {
    std::fs::read_to_string(corpus(name)).unwrap()
}

pub fn corpus_program(name: &str) -> Program {
    parse_program(&corpus_text(name)).unwrap()
}

pub fn corpus_distributed(name: &str) -> DistributedSpec {
    parse_distributed(&corpus_text(name)).unwrap()
}

pub fn corpus_state(name: &str, vocab: Arc<Vocabulary>) -> State {
    parse_state(&corpus_text(name), vocab, LoadOptions::default()).unwrap()
}

pub fn named(s: &str) -> Element {
    Element::named(s)
}

/// Values a location ranges over in the exhaustive enumerations.
pub fn values() -> Vec<Element> {
    ELEMS.iter().map(|e| named(e)).chain([Element::Undef]).collect()
}

/// Every state over `x`, `y`, `f` with values in `values()`: 4^5 states.
pub fn all_basic_states(vocab: &Arc<Vocabulary>) -> Vec<State> {
    let vals = values();
    let mut locs = vec![Location::nullary("x"), Location::nullary("y")];
    locs.extend(ELEMS.iter().map(|e| Location::new("f", vec![named(e)])));
    let mut out = Vec::new();
    let n = locs.len() as u32;
    for code in 0..vals.len().pow(n) {
        let mut s = State::new(vocab.clone());
        let mut k = code;
        for l in &locs {
            s.assign(l.clone(), vals[k % vals.len()].clone()).unwrap();
            k /= vals.len();
        }
        out.push(s);
    }
    out
}

/// States varying the extents of `U` and `V` over every subset of `ELEMS`
/// and `x` over two values.
pub fn choose_states(vocab: &Arc<Vocabulary>) -> Vec<State> {
    let mut out = Vec::new();
    for u in 0..8u32 {
        for v in 0..8u32 {
            for x in ["a", "b"] {
                let mut s = State::new(vocab.clone());
                s.assign(Location::nullary("x"), named(x)).unwrap();
                s.assign(Location::new("f", vec![named("a")]), named("b")).unwrap();
                for (i, e) in ELEMS.iter().enumerate() {
                    if u & (1 << i) != 0 {
                        s.assign(Location::new("U", vec![named(e)]), Element::True).unwrap();
                    }
                    if v & (1 << i) != 0 {
                        s.assign(Location::new("V", vec![named(e)]), Element::True).unwrap();
                    }
                }
                out.push(s);
            }
        }
    }
    out
}

/// Generates rule text over the names in `BASIC_HEADER` / `CHOOSE_HEADER`.
pub struct RuleGen {
    rng: ChaCha8Rng,
    /// `choose` binders still available.
    binders_left: usize,
    next_var: usize,
    /// Whether `choose` may carry a `satisfying` qualifier.
    pub qualified: bool,
}

impl RuleGen {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            binders_left: 0,
            next_var: 0,
            qualified: true,
        }
    }

    fn pick<'a>(&mut self, xs: &[&'a str]) -> &'a str {
        xs[self.rng.gen_range(0..xs.len())]
    }

    pub fn term(&mut self, depth: usize, vars: &[String]) -> String {
        let k = self.rng.gen_range(0..if depth == 0 { 6 } else { 8 });
        match k {
            0 => "x".into(),
            1 => "y".into(),
            2 => "undef".into(),
            3 | 4 if !vars.is_empty() => vars[self.rng.gen_range(0..vars.len())].clone(),
            3..=5 => self.pick(&ELEMS).into(),
            _ => format!("f({})", self.term(depth - 1, vars)),
        }
    }

    pub fn guard(&mut self, depth: usize, vars: &[String]) -> String {
        let k = self.rng.gen_range(0..if depth == 0 { 3 } else { 6 });
        match k {
            0 => format!("{} = {}", self.term(1, vars), self.term(1, vars)),
            1 => format!("{} != {}", self.term(1, vars), self.term(1, vars)),
            2 => self.pick(&["true", "false"]).into(),
            3 => format!("not ({})", self.guard(depth - 1, vars)),
            4 => format!("({}) and ({})", self.guard(depth - 1, vars), self.guard(depth - 1, vars)),
            _ => format!("({}) or ({})", self.guard(depth - 1, vars), self.guard(depth - 1, vars)),
        }
    }

    fn update(&mut self, vars: &[String]) -> String {
        let value = self.term(1, vars);
        match self.rng.gen_range(0..3) {
            0 => format!("x := {value}"),
            1 => format!("y := {value}"),
            _ => format!("f({}) := {value}", self.term(1, vars)),
        }
    }

    fn rule_in(&mut self, depth: usize, vars: &[String]) -> String {
        let choose = self.binders_left > 0;
        let top = if depth == 0 { 2 } else if choose { 6 } else { 5 };
        match self.rng.gen_range(0..top) {
            0 => self.update(vars),
            1 => {
                if self.rng.gen_bool(0.2) {
                    "skip".into()
                } else {
                    self.update(vars)
                }
            }
            2 => {
                let n = self.rng.gen_range(2..=3);
                let items: Vec<String> = (0..n).map(|_| self.rule_in(depth - 1, vars)).collect();
                format!("block {} endblock", items.join(" "))
            }
            3 | 4 => {
                let mut s = format!(
                    "if {} then {}",
                    self.guard(2, vars),
                    self.rule_in(depth - 1, vars)
                );
                for _ in 0..self.rng.gen_range(0..=2) {
                    s.push_str(&format!(
                        " elseif {} then {}",
                        self.guard(2, vars),
                        self.rule_in(depth - 1, vars)
                    ));
                }
                if self.rng.gen_bool(0.5) {
                    s.push_str(&format!(" else {}", self.rule_in(depth - 1, vars)));
                }
                s + " endif"
            }
            _ => {
                self.binders_left -= 1;
                self.next_var += 1;
                let v = format!("v{}", self.next_var);
                let universe = self.pick(&["U", "V"]);
                let mut inner = vars.to_vec();
                inner.push(v.clone());
                let qualifier = if self.qualified && self.rng.gen_bool(0.4) {
                    format!(" satisfying {}", self.guard(1, &inner))
                } else {
                    String::new()
                };
                let body = self.rule_in(depth - 1, &inner);
                format!("choose {v} in {universe}{qualifier} {body} endchoose")
            }
        }
    }

    /// A rule without `choose`, `import` or declarations.
    pub fn basic_rule(&mut self, depth: usize) -> String {
        self.binders_left = 0;
        self.rule_in(depth, &[])
    }

    /// A rule with at most `binders` `choose` binders.
    pub fn choose_rule(&mut self, depth: usize, binders: usize) -> String {
        self.binders_left = binders;
        self.next_var = 0;
        self.rule_in(depth, &[])
    }
}

pub fn basic_program(seed: u64, depth: usize) -> (String, Program) {
    let text = RuleGen::new(seed).basic_rule(depth);
    let p = parse_program(&format!("{BASIC_HEADER}  {text}\n"))
        .unwrap_or_else(|e| panic!("{e}\n{text}"));
    (text, p)
}

pub fn choose_program(seed: u64, depth: usize, binders: usize, qualified: bool) -> (String, Program) {
    let mut gen = RuleGen::new(seed);
    gen.qualified = qualified;
    let text = gen.choose_rule(depth, binders);
    let p = parse_program(&format!("{CHOOSE_HEADER}  {text}\n"))
        .unwrap_or_else(|e| panic!("{e}\n{text}"));
    (text, p)
}
