//! Oracles answer external-function queries, consistently within a step.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::evaluator::Externals;
use crate::state::{Element, Location, LoadOptions};
use crate::vocabulary::FunctionName;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("oracle script line {line}: {message}")]
pub struct OracleScriptError {
    pub line: usize,
    pub message: String,
}

/// Step selector of a scripted answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StepSel {
    At(usize),
    Any,
}

enum Source {
    Undef,
    Scripted {
        answers: BTreeMap<(StepSel, Location), Element>,
        strict: bool,
    },
    Interactive {
        input: Box<dyn BufRead>,
        output: Box<dyn Write>,
    },
}

/// Resolver plus per-step memo and transcript.
pub struct Oracle {
    source: Source,
    step: usize,
    memo: BTreeMap<Location, Element>,
    transcript: Vec<(Location, Element)>,
}

impl std::fmt::Debug for Oracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Oracle")
            .field("step", &self.step)
            .field("memo", &self.memo)
            .finish_non_exhaustive()
    }
}

impl Oracle {
    fn from_source(source: Source) -> Self {
        Self {
            source,
            step: 0,
            memo: BTreeMap::new(),
            transcript: Vec::new(),
        }
    }

    /// Every external location reads as `undef`.
    pub fn undef() -> Self {
        Self::from_source(Source::Undef)
    }

    /// Answers from a script; with `strict`, an unscripted query is an error,
    /// otherwise it reads as `undef`.
    pub fn scripted(answers: BTreeMap<(StepSel, Location), Element>, strict: bool) -> Self {
        Self::from_source(Source::Scripted { answers, strict })
    }

    /// Parses lines `step k: e(args) = value`; `step *:` matches every step.
    pub fn parse_script(text: &str, strict: bool) -> Result<Self, OracleScriptError> {
        let mut answers = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let err = |message: String| OracleScriptError { line, message };
            let rest = body
                .strip_prefix("step")
                .ok_or_else(|| err("expected `step k: e(args) = value`".into()))?;
            let (sel, fact) = rest
                .split_once(':')
                .ok_or_else(|| err("missing `:` after the step index".into()))?;
            let sel = match sel.trim() {
                "*" => StepSel::Any,
                k => StepSel::At(k.parse().map_err(|_| err(format!("bad step index `{k}`")))?),
            };
            let opts = LoadOptions {
                allow_reserve_literals: true,
            };
            let (loc, value) =
                crate::state::parse_fact(fact.trim(), line, opts).map_err(|e| err(e.message))?;
            if answers.insert((sel, loc.clone()), value).is_some() {
                return Err(err(format!("duplicate answer for {loc}")));
            }
        }
        Ok(Self::scripted(answers, strict))
    }

    /// Prompts on `output` and reads one element literal per query from `input`.
    pub fn interactive(input: Box<dyn BufRead>, output: Box<dyn Write>) -> Self {
        Self::from_source(Source::Interactive { input, output })
    }

    /// Forgets the memo and transcript; answers may differ from here on.
    pub fn begin_step(&mut self, step: usize) {
        self.step = step;
        self.memo.clear();
        self.transcript.clear();
    }

    pub fn transcript(&self) -> &[(Location, Element)] {
        &self.transcript
    }

    pub fn take_transcript(&mut self) -> Vec<(Location, Element)> {
        std::mem::take(&mut self.transcript)
    }

    fn resolve(&mut self, loc: &Location) -> Result<Element, String> {
        let step = self.step;
        match &mut self.source {
            Source::Undef => Ok(Element::Undef),
            Source::Scripted { answers, strict } => answers
                .get(&(StepSel::At(step), loc.clone()))
                .or_else(|| answers.get(&(StepSel::Any, loc.clone())))
                .cloned()
                .map_or_else(
                    || {
                        if *strict {
                            Err(format!("no scripted answer at step {step}"))
                        } else {
                            Ok(Element::Undef)
                        }
                    },
                    Ok,
                ),
            Source::Interactive { input, output } => {
                write!(output, "step {step}: {loc} = ? ").map_err(|e| e.to_string())?;
                output.flush().map_err(|e| e.to_string())?;
                let mut line = String::new();
                if input.read_line(&mut line).map_err(|e| e.to_string())? == 0 {
                    return Err("end of input".into());
                }
                Element::parse_literal(line.trim())
                    .ok_or_else(|| format!("`{}` is not an element literal", line.trim()))
            }
        }
    }
}

impl Externals for Oracle {
    fn query(&mut self, f: &FunctionName, args: &[Element]) -> Result<Element, String> {
        let loc = Location {
            fname: f.name.clone(),
            args: args.to_vec(),
        };
        if let Some(v) = self.memo.get(&loc) {
            return Ok(v.clone());
        }
        let v = self.resolve(&loc)?;
        self.memo.insert(loc.clone(), v.clone());
        self.transcript.push((loc, v.clone()));
        Ok(v)
    }
}
