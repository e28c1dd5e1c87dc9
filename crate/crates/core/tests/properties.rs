//! Property tests for the engine's invariants, driven by generated rules,
//! states and runs.

mod common;

use std::collections::BTreeMap;

use common::*;
use ealgebra::distributed::{
    agents_of, certificate_to_text, check_partial_run, generate_partial_run, parse_certificate,
    view, GeneratorConfig,
};
use ealgebra::evaluator::{normalize_guarded, nupdates, updates};
use ealgebra::runner::{
    parse_records, run, step, trace_to_records, Oracle, StepConfig, StopReason, TraceLine,
};
use ealgebra::state::{Element, FirstChooser, Location, SeededChooser, Update, UpdateSet};
use ealgebra::syntax::{parse_program, program_to_string, rule_to_string};
use ealgebra::vocabulary::SELF;
use proptest::prelude::*;

fn location() -> impl Strategy<Value = Location> {
    prop_oneof![
        Just(Location::nullary("x")),
        Just(Location::nullary("y")),
        (0..3usize).prop_map(|i| Location::new("f", vec![named(ELEMS[i])])),
    ]
}

fn value() -> impl Strategy<Value = Element> {
    (0..4usize).prop_map(|i| values()[i].clone())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn printed_programs_parse_back(seed in any::<u64>(), choose in any::<bool>()) {
        let (_, p) = if choose { choose_program(seed, 4, 3, true) } else { basic_program(seed, 4) };
        let printed = program_to_string(&p);
        let again = parse_program(&printed).unwrap();
        prop_assert_eq!(&again.rule, &p.rule, "{}", printed);
        prop_assert_eq!(program_to_string(&again), printed);
    }

    #[test]
    fn block_order_is_irrelevant(a in any::<u64>(), b in any::<u64>(), si in 0..128usize) {
        let r1 = RuleGen::new(a).choose_rule(3, 1);
        let r2 = RuleGen::new(b).basic_rule(3);
        let fwd = parse_program(&format!("{CHOOSE_HEADER}  block {r1} {r2} endblock\n")).unwrap();
        let bwd = parse_program(&format!("{CHOOSE_HEADER}  block {r2} {r1} endblock\n")).unwrap();
        let s = &choose_states(&fwd.vocab)[si];
        prop_assert_eq!(nupdates(&fwd.rule, s).unwrap(), nupdates(&bwd.rule, s).unwrap());
    }

    #[test]
    fn normal_form_agrees_on_deeper_rules(seed in any::<u64>(), si in 0..1024usize) {
        let (text, p) = basic_program(seed, 5);
        let nf = normalize_guarded(&p.rule).unwrap();
        let s = &all_basic_states(&p.vocab)[si];
        prop_assert_eq!(updates(&p.rule, s), updates(&nf, s), "{}\n{}", text, rule_to_string(&nf));
    }

    #[test]
    fn basic_rules_have_one_update_set(seed in any::<u64>(), si in 0..1024usize) {
        let (_, p) = basic_program(seed, 4);
        let s = &all_basic_states(&p.vocab)[si];
        let family = nupdates(&p.rule, s).unwrap();
        prop_assert_eq!(family.sets.len(), 1);
        prop_assert!(!family.contains_bottom);
        prop_assert_eq!(&family.sets.iter().next().unwrap().clone(), &updates(&p.rule, s).unwrap());
    }

    #[test]
    fn consistency_matches_a_location_map(
        si in 0..1024usize,
        ups in prop::collection::vec((location(), value()), 0..6),
    ) {
        let p = parse_program(&format!("{BASIC_HEADER}  skip\n")).unwrap();
        let s = &all_basic_states(&p.vocab)[si];
        let mut beta = UpdateSet::new();
        let mut seen: BTreeMap<Location, Element> = BTreeMap::new();
        let mut consistent = true;
        for (l, v) in &ups {
            beta.insert(Update::new(l.clone(), v.clone()));
            if let Some(old) = seen.insert(l.clone(), v.clone()) {
                consistent &= old == *v;
            }
        }
        let firing = s.fire_update_set(&beta).unwrap();
        prop_assert_eq!(firing.fired, consistent);
        if consistent {
            for (l, v) in &seen {
                prop_assert_eq!(&firing.state.read(l).unwrap(), v);
            }
            // Firing one update at a time, in either order, gives the same state.
            let mut fwd = s.clone();
            let mut bwd = s.clone();
            for (l, v) in &seen {
                fwd = fwd.fire_update(&Update::new(l.clone(), v.clone())).unwrap();
            }
            for (l, v) in seen.iter().rev() {
                bwd = bwd.fire_update(&Update::new(l.clone(), v.clone())).unwrap();
            }
            prop_assert_eq!(&fwd, &firing.state);
            prop_assert_eq!(&bwd, &firing.state);
        } else {
            prop_assert_eq!(&firing.state, s);
        }
    }

    #[test]
    fn seeded_runs_are_reproducible(seed in any::<u64>(), si in 0..128usize, chooser in any::<u64>()) {
        let (_, p) = choose_program(seed, 3, 2, true);
        let s = &choose_states(&p.vocab)[si];
        let cfg = StepConfig::default();
        let a = run(&p, s, &mut Oracle::undef(), &mut SeededChooser::new(chooser), 6, &cfg);
        let b = run(&p, s, &mut Oracle::undef(), &mut SeededChooser::new(chooser), 6, &cfg);
        prop_assert_eq!(&a, &b);
        // Records survive serialization.
        let lines = parse_records(&trace_to_records(&a)).unwrap();
        let records: Vec<_> = lines
            .iter()
            .filter_map(|l| match l { TraceLine::Step(r) => Some(r.clone()), _ => None })
            .collect();
        prop_assert_eq!(&records, &a.records);
        prop_assert!(lines.contains(&TraceLine::Stop(a.stop.clone())));
    }

    #[test]
    fn fixpoints_are_stable(seed in any::<u64>(), si in 0..1024usize) {
        let (_, p) = basic_program(seed, 3);
        let s = &all_basic_states(&p.vocab)[si];
        let cfg = StepConfig::default();
        let t = run(&p, s, &mut Oracle::undef(), &mut FirstChooser, 8, &cfg);
        if let StopReason::Fixpoint { .. } = t.stop {
            let last = t.final_state();
            let (next, _) = step(&p, last, &mut Oracle::undef(), &mut FirstChooser, 0, &cfg).unwrap();
            prop_assert_eq!(&next, last);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn generated_certificates_round_trip(seed in any::<u64>(), moves in 0..7usize, sendrecv in any::<bool>()) {
        let (prog, state) = if sendrecv {
            ("sendrecv.ea", "sendrecv.east")
        } else {
            ("philosophers4.ea", "ring4.east")
        };
        let dp = corpus_distributed(prog);
        let s0 = corpus_state(state, dp.vocab.clone());
        let cfg = GeneratorConfig { moves, seed, step: StepConfig::default() };
        let pr = generate_partial_run(&dp, &s0, &cfg).unwrap();
        prop_assert!(check_partial_run(&dp, &pr).is_valid());
        let text = certificate_to_text(&pr);
        let back = parse_certificate(&text, dp.vocab.clone()).unwrap();
        prop_assert_eq!(&back, &pr, "{}", text);
    }

    #[test]
    fn views_agree_with_the_global_state(seed in any::<u64>(), moves in 0..6usize) {
        let dp = corpus_distributed("sendrecv.ea");
        let s0 = corpus_state("sendrecv.east", dp.vocab.clone());
        let cfg = GeneratorConfig { moves, seed, step: StepConfig::default() };
        let pr = generate_partial_run(&dp, &s0, &cfg).unwrap();
        for s in pr.sigma.values() {
            for agent in agents_of(&dp, s) {
                let v = view(&dp, s, &agent).unwrap();
                let own = v.apply(v.vocabulary().get(SELF).unwrap(), &[]);
                prop_assert_eq!(&own, &agent.element);
                for (l, x) in v.facts() {
                    if l.fname.as_ref() != SELF {
                        prop_assert_eq!(&s.read(l).unwrap(), x);
                    }
                }
            }
        }
    }
}
