//! Text format for states: one `fname(arg1,...,argk) = value` fact per line.

use std::sync::Arc;

use thiserror::Error;

use super::{Element, Location, State, StateError};
use crate::vocabulary::Vocabulary;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct StateParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Accept `@k` literals for elements already withdrawn from the reserve.
    /// Initial states must not mention reserve elements.
    pub allow_reserve_literals: bool,
}

fn parse_element(text: &str, line: usize, opts: LoadOptions) -> Result<Element, StateParseError> {
    let e = Element::parse_literal(text).ok_or_else(|| StateParseError {
        line,
        message: format!("`{}` is not an element literal", text.trim()),
    })?;
    if e.reserve_serial().is_some() && !opts.allow_reserve_literals {
        return Err(StateParseError {
            line,
            message: format!("reserve proviso: initial states cannot mention reserve element {e}"),
        });
    }
    Ok(e)
}

/// Parses a single fact line into a location and value.
pub(crate) fn parse_fact(
    text: &str,
    line: usize,
    opts: LoadOptions,
) -> Result<(Location, Element), StateParseError> {
    let err = |message: String| StateParseError { line, message };
    let (lhs, rhs) = text
        .rsplit_once('=')
        .ok_or_else(|| err(format!("expected `location = value`, found `{text}`")))?;
    let lhs = lhs.trim();
    let value = parse_element(rhs, line, opts)?;
    let (name, args) = match lhs.find('(') {
        None => (lhs, Vec::new()),
        Some(open) => {
            let inner = lhs[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| err(format!("unbalanced parentheses in `{lhs}`")))?;
            let args = if inner.trim().is_empty() {
                Vec::new()
            } else {
                inner
                    .split(',')
                    .map(|a| parse_element(a, line, opts))
                    .collect::<Result<Vec<_>, _>>()?
            };
            (lhs[..open].trim(), args)
        }
    };
    if name.is_empty() {
        return Err(err("missing function name".into()));
    }
    Ok((Location::new(name, args), value))
}

/// Loads a state over `vocab`. Omitted locations keep their defaults.
pub fn parse_state(
    text: &str,
    vocab: Arc<Vocabulary>,
    opts: LoadOptions,
) -> Result<State, StateParseError> {
    let mut state = State::new(vocab);
    let mut max_serial = None;
    let mut facts = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (loc, value) = parse_fact(body, line, opts)?;
        for e in loc.args.iter().chain(std::iter::once(&value)) {
            if let Some(s) = e.reserve_serial() {
                max_serial = max_serial.max(Some(s));
            }
        }
        facts.push((line, loc, value));
    }
    if let Some(m) = max_serial {
        state.reserve_mut().withdraw_below(m + 1);
    }
    for (line, loc, value) in facts {
        state
            .assign(loc, value)
            .map_err(|e: StateError| StateParseError {
                line,
                message: e.to_string(),
            })?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocabulary::{make_vocabulary, FunctionName};

    fn vocab() -> Arc<Vocabulary> {
        Arc::new(
            make_vocabulary([
                FunctionName::dynamic("Fork", 1),
                FunctionName::dynamic("c", 0),
                FunctionName::static_relation("Edge", 2),
                FunctionName::external("input", 1),
            ])
            .unwrap(),
        )
    }

    #[test]
    fn parses_facts_and_comments() {
        let s = parse_state(
            "# ring\nFork(p0) = down\nc = 3\nEdge(a, b) = true\n\n",
            vocab(),
            LoadOptions::default(),
        )
        .unwrap();
        assert_eq!(
            s.read(&Location::new("Fork", vec![Element::named("p0")])).unwrap(),
            Element::named("down")
        );
        assert_eq!(s.read(&Location::nullary("c")).unwrap(), Element::Int(3));
        let again = parse_state(&s.to_text(), vocab(), LoadOptions::default()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn rejects_bad_facts() {
        let v = vocab();
        let o = LoadOptions::default();
        assert_eq!(parse_state("Fork(p0)", v.clone(), o).unwrap_err().line, 1);
        assert!(parse_state("Edge(a,b) = c", v.clone(), o).is_err());
        assert!(parse_state("Fork(a,b) = c", v.clone(), o).is_err());
        assert!(parse_state("input(a) = c", v.clone(), o).is_err());
        assert!(parse_state("Nope = c", v.clone(), o).is_err());
        let e = parse_state("Fork(@0) = c", v.clone(), o).unwrap_err();
        assert!(e.message.contains("reserve"));
        let s = parse_state(
            "Fork(@2) = c",
            v,
            LoadOptions {
                allow_reserve_literals: true,
            },
        )
        .unwrap();
        assert!(!s.is_in_reserve(&Element::Reserve(2)));
        s.audit_proviso().unwrap();
    }
}
