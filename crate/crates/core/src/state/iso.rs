//! Isomorphism of states modulo renaming of reserve-origin elements.

use std::collections::{BTreeMap, BTreeSet};

use super::{Element, Location, State};

const PLACEHOLDER: Element = Element::Reserve(u64::MAX);
const SELF_MARK: Element = Element::Reserve(u64::MAX - 1);

fn rename(e: &Element, map: &dyn Fn(&Element) -> Element) -> Element {
    if e.reserve_serial().is_some() {
        map(e)
    } else {
        e.clone()
    }
}

fn rename_fact(
    (l, v): (&Location, &Element),
    map: &dyn Fn(&Element) -> Element,
) -> (Location, Element) {
    (
        Location {
            fname: l.fname.clone(),
            args: l.args.iter().map(|a| rename(a, map)).collect(),
        },
        rename(v, map),
    )
}

/// Facts with every reserve-origin element collapsed to one placeholder.
/// Isomorphic states have equal shape keys.
pub fn shape_key(s: &State) -> Vec<(Location, Element)> {
    let mut facts: Vec<_> = s
        .table()
        .iter()
        .map(|f| rename_fact(f, &|_| PLACEHOLDER))
        .collect();
    facts.sort();
    facts
}

/// The facts mentioning `e`, with `e` marked and other reserve elements collapsed.
fn signature(s: &State, e: &Element) -> Vec<(Location, Element)> {
    let mark = |x: &Element| if x == e { SELF_MARK } else { PLACEHOLDER };
    let mut sig: Vec<_> = s
        .table()
        .iter()
        .filter(|(l, v)| l.mentions(e) || *v == e)
        .map(|f| rename_fact(f, &mark))
        .collect();
    sig.sort();
    sig
}

pub(super) fn isomorphic(a: &State, b: &State) -> bool {
    if a.vocabulary().identifiers() != b.vocabulary().identifiers() {
        return false;
    }
    if a.table().len() != b.table().len() {
        return false;
    }
    let ra: Vec<Element> = a.reserve_origin_elements().into_iter().collect();
    let rb: Vec<Element> = b.reserve_origin_elements().into_iter().collect();
    if ra.len() != rb.len() {
        return false;
    }
    if ra.is_empty() {
        return a.table() == b.table();
    }
    if shape_key(a) != shape_key(b) {
        return false;
    }
    let sig_a: Vec<_> = ra.iter().map(|e| signature(a, e)).collect();
    let sig_b: Vec<_> = rb.iter().map(|e| signature(b, e)).collect();
    let candidates: Vec<Vec<usize>> = sig_a
        .iter()
        .map(|sa| (0..rb.len()).filter(|&j| &sig_b[j] == sa).collect())
        .collect();
    if candidates.iter().any(Vec::is_empty) {
        return false;
    }
    let mut assignment = vec![usize::MAX; ra.len()];
    let mut used = BTreeSet::new();
    search(a, b, &ra, &rb, &candidates, 0, &mut assignment, &mut used)
}

#[allow(clippy::too_many_arguments)]
fn search(
    a: &State,
    b: &State,
    ra: &[Element],
    rb: &[Element],
    candidates: &[Vec<usize>],
    i: usize,
    assignment: &mut Vec<usize>,
    used: &mut BTreeSet<usize>,
) -> bool {
    if i == ra.len() {
        let map: BTreeMap<&Element, &Element> = ra
            .iter()
            .zip(assignment.iter())
            .map(|(x, &j)| (x, &rb[j]))
            .collect();
        let f = |e: &Element| map.get(e).map_or_else(|| e.clone(), |x| (*x).clone());
        return a
            .table()
            .iter()
            .map(|fact| rename_fact(fact, &f))
            .all(|(l, v)| b.table().get(&l) == Some(&v));
    }
    for &j in &candidates[i] {
        if used.insert(j) {
            assignment[i] = j;
            if search(a, b, ra, rb, candidates, i + 1, assignment, used) {
                return true;
            }
            used.remove(&j);
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::vocabulary::{make_vocabulary, FunctionName};

    fn base() -> State {
        let v = make_vocabulary([
            FunctionName::dynamic("Parent", 1),
            FunctionName::dynamic("Next", 1),
            FunctionName::reserve(),
        ])
        .unwrap();
        State::new(Arc::new(v))
    }

    fn with_children(order: [u64; 2]) -> State {
        let mut s = base();
        for serial in order {
            s.reserve_mut().withdraw(serial);
        }
        s.assign(
            Location::new("Parent", vec![Element::Reserve(order[0])]),
            Element::named("root"),
        )
        .unwrap();
        s.assign(
            Location::new("Parent", vec![Element::Reserve(order[1])]),
            Element::named("root"),
        )
        .unwrap();
        s.assign(
            Location::new("Next", vec![Element::Reserve(order[0])]),
            Element::Reserve(order[1]),
        )
        .unwrap();
        s
    }

    #[test]
    fn reflexive_and_renaming_invariant() {
        let a = with_children([0, 1]);
        assert!(a.isomorphic(&a));
        let b = with_children([7, 3]);
        assert!(a.isomorphic(&b));
        assert!(b.isomorphic(&a));
    }

    #[test]
    fn structure_must_match() {
        let a = with_children([0, 1]);
        let mut c = with_children([0, 1]);
        c.assign(
            Location::new("Next", vec![Element::Reserve(0)]),
            Element::Undef,
        )
        .unwrap();
        assert!(!a.isomorphic(&c));
    }

    #[test]
    fn named_elements_are_fixed() {
        let mut a = base();
        a.assign(Location::nullary_for_test("Parent", "x"), Element::named("a"))
            .unwrap();
        let mut b = base();
        b.assign(Location::nullary_for_test("Parent", "x"), Element::named("b"))
            .unwrap();
        assert!(!a.isomorphic(&b));
    }

    impl Location {
        fn nullary_for_test(f: &str, arg: &str) -> Location {
            Location::new(f, vec![Element::named(arg)])
        }
    }
}
