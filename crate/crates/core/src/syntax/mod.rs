//! Concrete syntax: lexing, parsing, printing, desugaring and variable analysis.
//!
//! Program files start with a header (`vocabulary:` declarations, optional
//! `pragma integers [mod N]`, optional `alias Name = Self`) followed by either
//! `program:` and a rule, or one or more `module Name:` sections and an
//! optional `initial:` guard.

mod ast;
mod desugar;
mod lexer;
mod parser;
mod printer;
pub mod vars;

pub use ast::{
    DistributedSpec, Document, Guard, Program, Quantifier, Range, Rule, Sugar, Term,
};
pub use desugar::{desugar, MOD_PRIME};
pub use lexer::Pos;
pub use parser::{
    parse_distributed, parse_document, parse_guard, parse_program, parse_rule, parse_term,
    ParseError, RuleOptions,
};
pub use printer::{
    distributed_to_string, guard_to_string, program_to_string, rule_to_string, term_to_string,
};
pub use vars::{
    binders, bound_vars, free_vars, free_vars_guard, free_vars_term, fun_of, fun_of_guard,
    fun_of_term, is_perspicuous, make_perspicuous,
};
