use std::fmt;

use serde::{Deserialize, Serialize};

use crate::vocabulary::Symbol;

/// A member of the superuniverse.
///
/// Reserve-tagged elements are drawn from an unbounded pool; whether a given
/// serial is still *in* the reserve is a property of the state, not the element.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Element {
    True,
    False,
    Undef,
    Named(Symbol),
    Int(i64),
    Reserve(u64),
}

impl Element {
    pub fn named(name: &str) -> Self {
        Element::Named(name.into())
    }

    pub fn bool(b: bool) -> Self {
        if b {
            Element::True
        } else {
            Element::False
        }
    }

    pub fn is_boolean(&self) -> bool {
        matches!(self, Element::True | Element::False)
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Element::True => Some(true),
            Element::False => Some(false),
            _ => None,
        }
    }

    pub fn is_undef(&self) -> bool {
        matches!(self, Element::Undef)
    }

    pub fn reserve_serial(&self) -> Option<u64> {
        match self {
            Element::Reserve(s) => Some(*s),
            _ => None,
        }
    }

    /// Parses the literal forms used in state files: `true`, `false`, `undef`,
    /// integers, `@k` for reserve-origin elements, and bare identifiers.
    pub fn parse_literal(text: &str) -> Option<Element> {
        let text = text.trim();
        match text {
            "" => None,
            "true" => Some(Element::True),
            "false" => Some(Element::False),
            "undef" => Some(Element::Undef),
            _ => {
                if let Some(serial) = text.strip_prefix('@') {
                    return serial.parse().ok().map(Element::Reserve);
                }
                if let Ok(n) = text.parse::<i64>() {
                    return Some(Element::Int(n));
                }
                let mut chars = text.chars();
                let first = chars.next()?;
                let ok = (first.is_alphabetic() || first == '_')
                    && chars.all(|c| c.is_alphanumeric() || c == '_' || c == '\'');
                ok.then(|| Element::named(text))
            }
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::True => f.write_str("true"),
            Element::False => f.write_str("false"),
            Element::Undef => f.write_str("undef"),
            Element::Named(n) => f.write_str(n),
            Element::Int(i) => write!(f, "{i}"),
            Element::Reserve(s) => write!(f, "@{s}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logic_constants_are_distinct() {
        assert_ne!(Element::True, Element::False);
        assert_ne!(Element::True, Element::Undef);
        assert_ne!(Element::False, Element::Undef);
    }

    #[test]
    fn literal_round_trip() {
        for e in [
            Element::True,
            Element::Undef,
            Element::Int(-4),
            Element::Reserve(7),
            Element::named("p0"),
            Element::named("Mod'"),
        ] {
            assert_eq!(Element::parse_literal(&e.to_string()), Some(e));
        }
        assert_eq!(Element::parse_literal("a(b)"), None);
    }
}
