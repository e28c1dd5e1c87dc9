//! The `ea` command-line front end.
//!
//! Every subcommand reads its inputs from files named on the command line,
//! writes its report to `out`, and maps failures to the stable exit codes in
//! [`exit`]. No environment variables, clocks or OS entropy are consulted:
//! the same files and `--seed` always give the same bytes.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::distributed::{
    check_partial_run, enumerate_interleavings, parse_certificate, sequential_run, validate_initial,
    DistError, Schedule, Verdict,
};
use crate::evaluator::{normalize_guarded, AllocOrder, EvalError};
use crate::runner::{
    enumerate_reachable, run, trace_to_records, trace_to_text, Assertion, ExploreConfig,
    Exploration, FamilyMode, Oracle, RunError, RunTrace, StepConfig,
};
use crate::state::{parse_state, Element, LoadOptions, SeededChooser, State};
use crate::syntax::{parse_document, program_to_string, Document, Program};
use crate::vocabulary::Vocabulary;

/// Exit codes. These are a public contract.
pub mod exit {
    pub const OK: u8 = 0;
    pub const IO: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const PARSE: u8 = 3;
    pub const STATE: u8 = 4;
    pub const ORACLE: u8 = 5;
    pub const BUDGET: u8 = 6;
    pub const ASSERTION: u8 = 7;
    pub const RUN_INVALID: u8 = 8;
    pub const CERTIFICATE: u8 = 9;
    pub const EVAL: u8 = 10;
}

#[derive(Debug, Parser)]
#[command(name = "ea", version, about = "Run and verify evolving algebras")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fire the program (or schedule agents) and write a trace.
    Run(RunArgs),
    /// Explore every reachable state up to a depth, checking an assertion.
    Enumerate(EnumerateArgs),
    /// Print a basic program as a block of guarded updates.
    Normalize(NormalizeArgs),
    /// Verify a partially ordered run certificate.
    CheckRun(CheckRunArgs),
    /// Parse a program and optionally validate an initial state against it.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Records,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Direct,
    Global,
}

impl From<Family> for FamilyMode {
    fn from(f: Family) -> Self {
        match f {
            Family::Direct => FamilyMode::Direct,
            Family::Global => FamilyMode::Global,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub program: PathBuf,
    /// Initial state file; omitted means every location takes its default.
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Oracle script for external functions, or `-` to answer on stdin.
    #[arg(long)]
    pub oracle: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    /// Agents to move, in order (distributed programs only).
    #[arg(long, value_delimiter = ',')]
    pub schedule: Option<Vec<String>>,
    /// Write the trace here instead of stdout.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[arg(long, value_enum, default_value_t = Family::Direct)]
    pub family_mode: Family,
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    pub program: PathBuf,
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    pub depth: usize,
    #[arg(long, default_value_t = 100_000)]
    pub max_states: usize,
    /// Closed guard that must hold in every reachable state.
    #[arg(long = "assert")]
    pub assertion: Option<String>,
    #[arg(long, value_enum, default_value_t = Family::Direct)]
    pub family_mode: Family,
}

#[derive(Debug, Args)]
pub struct NormalizeArgs {
    pub program: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckRunArgs {
    /// Distributed program the certificate is about.
    pub program: PathBuf,
    pub certificate: PathBuf,
    /// Initial state used when the certificate has no `sigma {}` block.
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub program: PathBuf,
    #[arg(long)]
    pub state: Option<PathBuf>,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::new(exit::IO, e.to_string())
    }
}

type CliResult = Result<u8, Failure>;

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::new(exit::IO, format!("{}: {e}", path.display())))
}

fn load_document(path: &Path) -> Result<Document, Failure> {
    let text = read_file(path)?;
    parse_document(&text).map_err(|e| Failure::new(exit::PARSE, format!("{}:{e}", path.display())))
}

fn vocab_of(doc: &Document) -> std::sync::Arc<Vocabulary> {
    match doc {
        Document::Program(p) => p.vocab.clone(),
        Document::Distributed(d) => d.vocab.clone(),
    }
}

fn load_state(path: Option<&Path>, doc: &Document) -> Result<State, Failure> {
    let vocab = vocab_of(doc);
    let state = match path {
        None => State::new(vocab),
        Some(p) => {
            let text = read_file(p)?;
            parse_state(&text, vocab, LoadOptions::default()).map_err(|e| {
                Failure::new(exit::STATE, format!("{}:{}: {}", p.display(), e.line, e.message))
            })?
        }
    };
    state
        .audit_proviso()
        .map_err(|e| Failure::new(exit::STATE, e.to_string()))?;
    if let Document::Distributed(d) = doc {
        validate_initial(d, &state).map_err(|e| Failure::new(exit::STATE, e.to_string()))?;
    }
    Ok(state)
}

fn eval_code(e: &EvalError) -> u8 {
    match e {
        EvalError::FamilyTooLarge { .. } => exit::BUDGET,
        EvalError::External { .. } => exit::ORACLE,
        _ => exit::EVAL,
    }
}

fn run_code(e: &RunError) -> u8 {
    match e {
        RunError::Oracle(_) => exit::ORACLE,
        RunError::Eval(e) => eval_code(e),
        RunError::State(_) => exit::STATE,
        RunError::Schedule(_) => exit::USAGE,
    }
}

fn dist_code(e: &DistError) -> u8 {
    match e {
        DistError::Run(r) => run_code(r),
        DistError::NotAnAgent(_) | DistError::Nondeterministic(_) => exit::USAGE,
        DistError::Vocabulary(_) | DistError::Initial(_) => exit::STATE,
    }
}

fn write_out(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Failure::new(exit::IO, format!("{}: {e}", p.display()))),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}

fn cmd_run(a: &RunArgs, out: &mut dyn Write) -> CliResult {
    let doc = load_document(&a.program)?;
    let initial = load_state(a.state.as_deref(), &doc)?;
    let mut oracle = match &a.oracle {
        None => Oracle::undef(),
        Some(p) if p.as_os_str() == "-" => Oracle::interactive(
            Box::new(io::BufReader::new(io::stdin())),
            Box::new(io::stderr()),
        ),
        Some(p) => Oracle::parse_script(&read_file(p)?, true)
            .map_err(|e| Failure::new(exit::ORACLE, format!("{}:{e}", p.display())))?,
    };
    let cfg = StepConfig {
        family: a.family_mode.into(),
        alloc: AllocOrder::Canonical,
        ..StepConfig::default()
    };
    let mut chooser = SeededChooser::new(a.seed);
    let trace: RunTrace = match &doc {
        Document::Program(p) => {
            if a.schedule.is_some() {
                return Err(Failure::new(exit::USAGE, "--schedule needs a distributed program"));
            }
            run(p, &initial, &mut oracle, &mut chooser, a.steps, &cfg)
        }
        Document::Distributed(d) => {
            let schedule = match &a.schedule {
                Some(picks) => Schedule::Explicit(
                    picks
                        .iter()
                        .map(|s| {
                            Element::parse_literal(s).ok_or_else(|| {
                                Failure::new(exit::USAGE, format!("`{s}` is not an element"))
                            })
                        })
                        .collect::<Result<_, _>>()?,
                ),
                None => Schedule::Random,
            };
            sequential_run(d, &initial, &schedule, &mut oracle, &mut chooser, a.steps, &cfg)
        }
    };
    let text = match a.format {
        Format::Text => trace_to_text(&trace),
        Format::Records => trace_to_records(&trace),
    };
    write_out(out, a.trace.as_deref(), &text)?;
    match &trace.error {
        Some(e) => Err(Failure::new(run_code(e), e.to_string())),
        None => Ok(exit::OK),
    }
}

fn report_exploration(
    ex: &Exploration,
    assertion: Option<&Assertion>,
    out: &mut dyn Write,
) -> CliResult {
    writeln!(out, "states: {}", ex.nodes.len())?;
    writeln!(out, "max depth: {}", ex.max_depth())?;
    if ex.partial {
        writeln!(out, "partial: state budget exhausted")?;
    }
    let Some(a) = assertion else {
        return Ok(if ex.partial { exit::BUDGET } else { exit::OK });
    };
    let Some(&bad) = ex.violations.first() else {
        writeln!(out, "assertion holds: {}", a.text)?;
        return Ok(if ex.partial { exit::BUDGET } else { exit::OK });
    };
    writeln!(
        out,
        "assertion violated in {} state(s): {}",
        ex.violations.len(),
        a.text
    )?;
    writeln!(out, "witness:")?;
    for (i, (label, state)) in ex.witness(bad).into_iter().enumerate() {
        match label {
            None => writeln!(out, "  state {i} (initial)")?,
            Some(l) => writeln!(out, "  state {i} after {l}")?,
        }
        for line in state.to_text().lines() {
            writeln!(out, "    {line}")?;
        }
    }
    Ok(exit::ASSERTION)
}

fn cmd_enumerate(a: &EnumerateArgs, out: &mut dyn Write) -> CliResult {
    let doc = load_document(&a.program)?;
    let initial = load_state(a.state.as_deref(), &doc)?;
    let assertion = a
        .assertion
        .as_deref()
        .map(|t| Assertion::parse(t, &vocab_of(&doc)))
        .transpose()
        .map_err(|e| Failure::new(exit::PARSE, format!("--assert: {e}")))?;
    let cfg = ExploreConfig {
        depth: a.depth,
        max_states: a.max_states,
        step: StepConfig {
            family: a.family_mode.into(),
            ..StepConfig::default()
        },
    };
    let ex = match &doc {
        Document::Program(p) => enumerate_reachable(p, &initial, &cfg, assertion.as_ref())
            .map_err(|e| Failure::new(run_code(&e), e.to_string()))?,
        Document::Distributed(d) => enumerate_interleavings(d, &initial, &cfg, assertion.as_ref())
            .map_err(|e| Failure::new(dist_code(&e), e.to_string()))?,
    };
    report_exploration(&ex, assertion.as_ref(), out)
}

fn cmd_normalize(a: &NormalizeArgs, out: &mut dyn Write) -> CliResult {
    let Document::Program(p) = load_document(&a.program)? else {
        return Err(Failure::new(exit::USAGE, "normalize needs a single program"));
    };
    let rule = normalize_guarded(&p.rule).map_err(|e| Failure::new(eval_code(&e), e.to_string()))?;
    let normal = Program::from_rule((*p.vocab).clone(), rule);
    out.write_all(program_to_string(&normal).as_bytes())?;
    Ok(exit::OK)
}

fn verdict_record(v: &Verdict) -> serde_json::Value {
    match v {
        Verdict::Valid { segments } => json!({"verdict": "valid", "segments": segments}),
        Verdict::Invalid(violation) => json!({
            "verdict": "invalid",
            "condition": violation.condition(),
            "detail": violation.to_string(),
        }),
        Verdict::Incomplete { reason } => json!({"verdict": "incomplete", "detail": reason}),
        Verdict::Malformed(m) => json!({"verdict": "malformed", "detail": m}),
    }
}

fn cmd_check_run(a: &CheckRunArgs, out: &mut dyn Write) -> CliResult {
    let doc = load_document(&a.program)?;
    let Document::Distributed(dp) = &doc else {
        return Err(Failure::new(exit::USAGE, "check-run needs a distributed program"));
    };
    let text = read_file(&a.certificate)?;
    let mut pr = parse_certificate(&text, dp.vocab.clone()).map_err(|e| {
        Failure::new(exit::CERTIFICATE, format!("{}: {e}", a.certificate.display()))
    })?;
    let initial_path = a.state.clone().or_else(|| {
        pr.initial_ref.as_ref().map(|r| {
            a.certificate
                .parent()
                .map(|d| d.join(r))
                .unwrap_or_else(|| PathBuf::from(r))
        })
    });
    if let (None, Some(path)) = (pr.sigma.get(&BTreeSet::new()), initial_path) {
        let text = read_file(&path)?;
        let s = parse_state(&text, dp.vocab.clone(), LoadOptions::default()).map_err(|e| {
            Failure::new(exit::STATE, format!("{}:{}: {}", path.display(), e.line, e.message))
        })?;
        pr.sigma.insert(BTreeSet::new(), s);
    }
    let verdict = check_partial_run(dp, &pr);
    match a.format {
        Format::Text => writeln!(out, "{verdict}")?,
        Format::Records => writeln!(out, "{}", verdict_record(&verdict))?,
    }
    Ok(match verdict {
        Verdict::Valid { .. } => exit::OK,
        Verdict::Invalid(_) => exit::RUN_INVALID,
        Verdict::Incomplete { .. } | Verdict::Malformed(_) => exit::CERTIFICATE,
    })
}

fn cmd_validate(a: &ValidateArgs, out: &mut dyn Write) -> CliResult {
    let doc = load_document(&a.program)?;
    match &doc {
        Document::Program(p) => writeln!(
            out,
            "program: {} names, {}",
            p.vocab.len(),
            if p.rule.is_basic() { "basic" } else { "not basic" }
        )?,
        Document::Distributed(d) => {
            let names: Vec<String> = d.modules.keys().map(|m| m.to_string()).collect();
            writeln!(out, "distributed program: modules {}", names.join(", "))?
        }
    }
    if let Some(path) = &a.state {
        let s = load_state(Some(path), &doc)?;
        writeln!(out, "state: {} facts, valid", s.facts().count())?;
    }
    Ok(exit::OK)
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn main_with(
    args: impl IntoIterator<Item = impl Into<OsString> + Clone>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> u8 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Enumerate(a) => cmd_enumerate(a, out),
        Command::Normalize(a) => cmd_normalize(a, out),
        Command::CheckRun(a) => cmd_check_run(a, out),
        Command::Validate(a) => cmd_validate(a, out),
    };
    let _ = out.flush();
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
