use std::collections::BTreeSet;

use super::*;
use crate::state::{parse_state, FirstChooser, LoadOptions, Update};
use crate::syntax::parse_distributed;

fn philosophers(n: usize) -> DistributedSpec {
    let src = format!(
        "vocabulary:\n  dynamic Mode/1, Fork/1\npragma integers mod {n}\nalias Me = Self\n\
         module Phil:\n\
         \x20 if Mode(Me)=think and Fork(Me)=Fork(Me+1)=down then\n\
         \x20   Fork(Me):=up, Fork(Me+1):=up, Mode(Me):=eat\n\
         \x20 elseif Mode(Me)=eat then\n\
         \x20   Fork(Me):=down, Fork(Me+1):=down, Mode(Me):=think\n\
         \x20 endif\n"
    );
    parse_distributed(&src).unwrap()
}

fn load(dp: &DistributedSpec, text: &str) -> State {
    parse_state(text, dp.vocab.clone(), LoadOptions::default()).unwrap()
}

fn ring(dp: &DistributedSpec, n: usize) -> State {
    let mut text = String::new();
    for i in 0..n {
        text.push_str(&format!("Mod({i}) = Phil\nMode({i}) = think\nFork({i}) = down\n"));
    }
    load(dp, &text)
}

fn int(i: i64) -> Element {
    Element::Int(i)
}

fn read(s: &State, f: &str, arg: Element) -> Element {
    s.read(&Location::new(f, vec![arg])).unwrap()
}

const TEAM: &str = "
vocabulary:
  dynamic Val/1, f/1
  relation Ready/1
  static Member1/1, Member2/1
module Team:
  if Ready(Member1(Self)) and Ready(Member2(Self)) then
    f(Val(Member2(Self))) := Val(Member1(Self))
  endif
module Sender:
  if not Ready(Self) then Ready(Self) := true endif
";

#[test]
fn three_philosophers_are_agents() {
    let dp = philosophers(3);
    let s = ring(&dp, 3);
    let agents = agents_of(&dp, &s);
    let elems: Vec<Element> = agents.iter().map(|a| a.element.clone()).collect();
    assert_eq!(elems, vec![int(0), int(1), int(2)]);
    assert!(agents.iter().all(|a| a.module.as_ref() == "Phil"));
    assert!(agents_of(&dp, &load(&dp, "Mode(0) = think\n")).is_empty());
}

#[test]
fn team_members_are_agents_only_through_mod() {
    let dp = parse_distributed(TEAM).unwrap();
    let base = "Mod(team1) = Team\nMember1(team1) = s\nMember2(team1) = r\n";
    let s = load(&dp, base);
    let elems: Vec<Element> = agents_of(&dp, &s).into_iter().map(|a| a.element).collect();
    assert_eq!(elems, vec![Element::named("team1")]);
    let s = load(&dp, &format!("{base}Mod(s) = Sender\n"));
    let elems: BTreeSet<Element> = agents_of(&dp, &s).into_iter().map(|a| a.element).collect();
    assert!(elems.contains(&Element::named("s")));
    assert!(!elems.contains(&Element::named("r")));
}

#[test]
fn team_rule_writes_f_at_receiver_value() {
    let dp = parse_distributed(TEAM).unwrap();
    let s = load(
        &dp,
        "Mod(team1) = Team\nMember1(team1) = s\nMember2(team1) = r\n\
         Ready(s) = true\nReady(r) = true\nVal(s) = hello\nVal(r) = box\n",
    );
    let (next, set) = agent_move(&dp, &s, &Element::named("team1"), &mut FirstChooser, &StepConfig::default())
        .unwrap();
    let expected = UpdateSet::singleton(Update::new(
        Location::new("f", vec![Element::named("box")]),
        Element::named("hello"),
    ));
    assert_eq!(set, expected);
    assert_eq!(read(&next, "f", Element::named("box")), Element::named("hello"));
}

#[test]
fn views_differ_only_at_self() {
    let dp = philosophers(3);
    let s = ring(&dp, 3);
    let a0 = agent_at(&dp, &s, &int(0)).unwrap();
    let a1 = agent_at(&dp, &s, &int(1)).unwrap();
    let v0 = view(&dp, &s, &a0).unwrap();
    let v1 = view(&dp, &s, &a1).unwrap();
    assert_eq!(v1.read(&Location::nullary(SELF)).unwrap(), int(1));
    let strip = |v: &State| -> Vec<(Location, Element)> {
        v.facts()
            .filter(|(l, _)| l.fname.as_ref() != SELF)
            .map(|(l, e)| (l.clone(), e.clone()))
            .collect()
    };
    assert_eq!(strip(&v0), strip(&v1));
    assert_ne!(v0, v1);
    // Mod is not a name of the Phil program, so the view drops it.
    assert!(!v0.vocabulary().contains(MOD));
    assert!(matches!(
        agent_at(&dp, &s, &int(7)),
        Err(DistError::NotAnAgent(_))
    ));
}

#[test]
fn thinking_philosopher_with_free_forks_eats() {
    let dp = philosophers(3);
    let s = ring(&dp, 3);
    let (next, set) = agent_move(&dp, &s, &int(0), &mut FirstChooser, &StepConfig::default()).unwrap();
    assert_eq!(set.iter().count(), 3);
    assert_eq!(read(&next, "Mode", int(0)), Element::named("eat"));
    assert_eq!(read(&next, "Fork", int(0)), Element::named("up"));
    assert_eq!(read(&next, "Fork", int(1)), Element::named("up"));
    assert_eq!(read(&next, "Fork", int(2)), Element::named("down"));
}

#[test]
fn thinking_philosopher_with_busy_fork_does_nothing() {
    let dp = philosophers(3);
    let mut s = ring(&dp, 3);
    s.assign(Location::new("Fork", vec![int(1)]), Element::named("up")).unwrap();
    let (next, set) = agent_move(&dp, &s, &int(0), &mut FirstChooser, &StepConfig::default()).unwrap();
    assert!(set.is_empty());
    assert_eq!(next, s);
}

fn seq(dp: &DistributedSpec, s: &State, picks: &[i64]) -> RunTrace {
    let schedule = Schedule::Explicit(picks.iter().map(|&i| int(i)).collect());
    sequential_run(
        dp,
        s,
        &schedule,
        &mut Oracle::undef(),
        &mut FirstChooser,
        100,
        &StepConfig::default(),
    )
}

#[test]
fn p0_eats_then_thinks() {
    let dp = philosophers(3);
    let s = ring(&dp, 3);
    let t = seq(&dp, &s, &[0, 0]);
    assert!(t.error.is_none());
    assert_eq!(t.states.len(), 3);
    assert_eq!(read(&t.states[1], "Mode", int(0)), Element::named("eat"));
    assert_eq!(t.states[2], s);
    assert_eq!(t.records[1].agent, Some(int(0)));
}

#[test]
fn empty_schedule_keeps_initial_state() {
    let dp = philosophers(3);
    let s = ring(&dp, 3);
    let t = seq(&dp, &s, &[]);
    assert_eq!(t.states, vec![s]);
    assert!(t.records.is_empty());
}

#[test]
fn neighbour_blocked_by_shared_fork() {
    let dp = philosophers(3);
    let s = ring(&dp, 3);
    let t = seq(&dp, &s, &[0, 1]);
    assert_eq!(t.states[2], t.states[1]);
    assert!(t.records[1].updates.is_empty());
}

#[test]
fn scheduling_a_non_agent_aborts() {
    let dp = philosophers(3);
    let s = ring(&dp, 3);
    let schedule = Schedule::Explicit(vec![Element::named("nobody")]);
    let t = sequential_run(&dp, &s, &schedule, &mut Oracle::undef(), &mut FirstChooser, 5, &StepConfig::default());
    assert!(matches!(t.error, Some(RunError::Schedule(_))));
}

#[test]
fn opposite_philosophers_eat_together() {
    let dp = philosophers(4);
    let s = ring(&dp, 4);
    let (next, rec) = quasi_sequential_step(&dp, &s, &[int(0), int(2)], &StepConfig::default()).unwrap();
    assert!(rec.fired);
    for i in 0..4 {
        assert_eq!(read(&next, "Fork", int(i)), Element::named("up"));
    }
    assert_eq!(read(&next, "Mode", int(0)), Element::named("eat"));
    assert_eq!(read(&next, "Mode", int(2)), Element::named("eat"));
}

#[test]
fn simultaneous_neighbours_both_eat() {
    let dp = philosophers(3);
    let s = ring(&dp, 3);
    let (next, rec) = quasi_sequential_step(&dp, &s, &[int(0), int(1)], &StepConfig::default()).unwrap();
    assert!(rec.fired);
    assert!(rec.conflicts.is_empty());
    assert_eq!(read(&next, "Mode", int(0)), Element::named("eat"));
    assert_eq!(read(&next, "Mode", int(1)), Element::named("eat"));
}

#[test]
fn singleton_quasi_step_is_an_agent_move() {
    let dp = philosophers(3);
    let s = ring(&dp, 3);
    let (a, _) = quasi_sequential_step(&dp, &s, &[int(2)], &StepConfig::default()).unwrap();
    let (b, _) = agent_move(&dp, &s, &int(2), &mut FirstChooser, &StepConfig::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn creating_an_agent_by_import() {
    let src = "
vocabulary:
  dynamic Count/1
module Spawner:
  if Count(Self) != done then
    import b Mod(b) := Spawner endimport, Count(Self) := done
  endif
";
    let dp = parse_distributed(src).unwrap();
    let s = load(&dp, "Mod(root) = Spawner\n");
    let (next, _) = agent_move(&dp, &s, &Element::named("root"), &mut FirstChooser, &StepConfig::default())
        .unwrap();
    assert_eq!(agents_of(&dp, &next).len(), 2);
    next.audit_proviso().unwrap();
}

/// Two independent moves by 0 and 2 on a 4-ring, certified on all four segments.
fn antichain() -> (DistributedSpec, PartialRun) {
    let dp = philosophers(4);
    let s0 = ring(&dp, 4);
    let cfg = StepConfig::default();
    let (s1, _) = agent_move(&dp, &s0, &int(0), &mut FirstChooser, &cfg).unwrap();
    let (s2, _) = agent_move(&dp, &s0, &int(2), &mut FirstChooser, &cfg).unwrap();
    let (s12, _) = agent_move(&dp, &s1, &int(2), &mut FirstChooser, &cfg).unwrap();
    let mut pr = PartialRun::default();
    pr.add_move("x1", int(0));
    pr.add_move("x2", int(2));
    let key = |ids: &[&str]| ids.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    pr.sigma.insert(key(&[]), s0);
    pr.sigma.insert(key(&["x1"]), s1);
    pr.sigma.insert(key(&["x2"]), s2);
    pr.sigma.insert(key(&["x1", "x2"]), s12);
    (dp, pr)
}

#[test]
fn antichain_certificate_is_valid() {
    let (dp, pr) = antichain();
    assert_eq!(check_partial_run(&dp, &pr), Verdict::Valid { segments: 4 });
}

#[test]
fn corrupted_sigma_names_the_segment() {
    let (dp, mut pr) = antichain();
    let full: BTreeSet<String> = ["x1", "x2"].iter().map(|s| s.to_string()).collect();
    pr.sigma
        .get_mut(&full)
        .unwrap()
        .assign(Location::new("Mode", vec![int(3)]), Element::named("eat"))
        .unwrap();
    match check_partial_run(&dp, &pr) {
        Verdict::Invalid(v @ Violation::Coherence { .. }) => {
            assert_eq!(v.condition(), "4");
            let Violation::Coherence { segment, .. } = v else { unreachable!() };
            assert_eq!(segment, vec!["x1".to_string(), "x2".to_string()]);
        }
        other => panic!("expected a coherence violation, got {other:?}"),
    }
}

#[test]
fn unordered_moves_of_one_agent_break_condition_two() {
    let (dp, mut pr) = antichain();
    pr.agent.insert("x2".into(), int(0));
    let v = check_partial_run(&dp, &pr);
    let Verdict::Invalid(v) = v else { panic!("{v:?}") };
    assert_eq!(v.condition(), "2");
}

#[test]
fn certificate_text_round_trips() {
    let (dp, pr) = antichain();
    let text = certificate_to_text(&pr);
    let back = parse_certificate(&text, dp.vocab.clone()).unwrap();
    assert_eq!(back, pr);
}

#[test]
fn linearization_counts() {
    let dp = philosophers(4);
    let s0 = ring(&dp, 4);
    let gen = |moves| GeneratorConfig {
        moves,
        seed: 0,
        step: StepConfig::default(),
    };
    let (_, pr) = antichain();
    let all: BTreeSet<String> = pr.moves.iter().cloned().collect();
    let lins = linearizations(&dp, &pr, &all, 1000).unwrap();
    assert_eq!(lins.items.len(), 2);
    assert_eq!(corollary_one(&lins), Some(true));

    let chain = generate_partial_run(&dp, &s0, &gen(0)).unwrap();
    assert!(chain.moves.is_empty());

    // x1 < x3 by agent 0, x2 by agent 2 is independent of both.
    let cfg = StepConfig::default();
    let (s1, _) = agent_move(&dp, &s0, &int(0), &mut FirstChooser, &cfg).unwrap();
    let (s13, _) = agent_move(&dp, &s1, &int(0), &mut FirstChooser, &cfg).unwrap();
    let mut pr = PartialRun::default();
    pr.add_move("x1", int(0));
    pr.add_move("x2", int(2));
    pr.add_move("x3", int(0));
    pr.add_edge("x1", "x3");
    let key = |ids: &[&str]| ids.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    pr.sigma.insert(key(&[]), s0.clone());
    pr.sigma.insert(key(&["x1", "x3"]), s13);
    let all = key(&["x1", "x2", "x3"]);
    assert!(check_partial_run(&dp, &pr).is_valid());
    let lins = linearizations(&dp, &pr, &all, 1000).unwrap();
    assert_eq!(lins.items.len(), 3);
    assert_eq!(corollary_one(&lins), Some(true));
    assert_eq!(corollary_two(&dp, &pr, &all, &lins).unwrap(), Some(true));

    let mut chain = PartialRun::default();
    chain.add_move("x1", int(0));
    chain.add_move("x2", int(0));
    chain.add_edge("x1", "x2");
    chain.sigma.insert(BTreeSet::new(), s0);
    let lins = linearizations(&dp, &chain, &key(&["x1", "x2"]), 1000).unwrap();
    assert_eq!(lins.items.len(), 1);
}

#[test]
fn antichain_of_three_has_six_orders() {
    let dp = philosophers(6);
    let s0 = ring(&dp, 6);
    let mut pr = PartialRun::default();
    for (k, a) in [0, 2, 4].into_iter().enumerate() {
        pr.add_move(&format!("x{k}"), int(a));
    }
    pr.sigma.insert(BTreeSet::new(), s0);
    assert!(check_partial_run(&dp, &pr).is_valid());
    let all: BTreeSet<String> = pr.moves.iter().cloned().collect();
    let lins = linearizations(&dp, &pr, &all, 1000).unwrap();
    assert_eq!(lins.items.len(), 6);
    assert_eq!(corollary_one(&lins), Some(true));
    let small = linearizations(&dp, &pr, &all, 4).unwrap();
    assert!(small.partial);
    assert_eq!(corollary_one(&small), None);
}

#[test]
fn generated_runs_are_valid_and_every_mutation_is_caught() {
    let dp = philosophers(3);
    let s0 = ring(&dp, 3);
    let mut applied = BTreeSet::new();
    for seed in 0..5 {
        let cfg = GeneratorConfig {
            moves: 5,
            seed,
            step: StepConfig::default(),
        };
        let pr = generate_partial_run(&dp, &s0, &cfg).unwrap();
        assert!(check_partial_run(&dp, &pr).is_valid(), "seed {seed}");
        for m in MUTATIONS {
            let Some(bad) = mutate(&dp, &pr, m) else { continue };
            applied.insert(m);
            match check_partial_run(&dp, &bad) {
                Verdict::Invalid(v) => {
                    assert!(m.expected().contains(&v.condition()), "{} gave {v}", m.name())
                }
                other => panic!("{} gave {other:?}", m.name()),
            }
        }
    }
    assert_eq!(applied.len(), MUTATIONS.len());
}
