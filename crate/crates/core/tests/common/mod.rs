#![allow(dead_code)]

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeSet;
use std::hash::{Hash, Hasher};

use memrex::agents::{Agent, OracleAgent, OracleConfig, RandomAgent, RecAgent};
use memrex::catalog::{generate_scenario, synthesize_catalog, Catalog, CatalogConfig, Scenario};
use memrex::dialog::{AgentAct, DialogAction, Sentiment, UserAct};
use memrex::ids::mix_seed;
use memrex::memgraph::{EntityKind, MemoryGraph, Observation, RelationKind};
use memrex::simulator::{run_episode, user_respond, Branch, SimRng, SimulatorConfig, SimulatorState};
use memrex::{ItemId, SlotId, ValueId};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub fn catalog() -> Catalog {
    synthesize_catalog(&CatalogConfig::default()).unwrap()
}

pub fn scenario(cat: &Catalog, seed: u64) -> Scenario {
    generate_scenario(cat, &format!("u{seed}"), seed.is_multiple_of(2), seed).unwrap()
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct GraphSuite {
    pub sequences: usize,
    pub updates: usize,
    pub ontology_violations: usize,
    pub monotonicity_breaches: usize,
    pub mask_failures: usize,
    pub digest: u64,
}

impl GraphSuite {
    pub fn clean(&self) -> bool {
        self.ontology_violations == 0 && self.monotonicity_breaches == 0 && self.mask_failures == 0
    }
}

fn masks_sound(g: &MemoryGraph, s: &Scenario) -> bool {
    let m = g.policy_masks(s);
    let items_ok = m.items.len() == s.candidates.len()
        && s.candidates
            .iter()
            .all(|c| g.item_entity(*c).is_some_and(|e| m.items.contains(&e)))
        && s.ground_truth
            .iter()
            .all(|t| g.item_entity(*t).is_some_and(|e| m.items.contains(&e)));
    let kinds_ok = m.items.iter().all(|e| e.kind == EntityKind::Item && g.contains(*e))
        && m.slots.iter().all(|e| e.kind == EntityKind::Slot && g.contains(*e))
        && m.values.iter().all(|e| e.kind == EntityKind::Value && g.contains(*e));
    // Every candidate value is askable and every askable slot has a value.
    let values_ok = s
        .candidates
        .iter()
        .flat_map(|c| s.items[c].values.iter())
        .all(|v| g.value_entity(*v).is_some_and(|e| m.values.contains(&e)));
    let slots_ok = m
        .slots
        .iter()
        .all(|sl| m.values.iter().any(|v| g.slot_of(*v) == Some(*sl)));
    items_ok && kinds_ok && values_ok && slots_ok
}

/// Random construction and update sequences, checked after every step.
pub fn graph_suite(n: usize, seed: u64) -> GraphSuite {
    let cat = catalog();
    let mut rep = GraphSuite::default();
    let mut h = DefaultHasher::new();
    for i in 0..n {
        let s_seed = mix_seed(seed, i as u64);
        let s = scenario(&cat, s_seed);
        let mut rng = ChaCha8Rng::seed_from_u64(s_seed);
        let mut g = MemoryGraph::build_initial(&s).unwrap();
        rep.sequences += 1;
        if g.check_invariants().is_err() || g.sentiment_triples().next().is_some() {
            rep.ontology_violations += 1;
        }
        let masks0 = g.policy_masks(&s);
        if !masks_sound(&g, &s) {
            rep.mask_failures += 1;
        }
        let targets: Vec<_> = g
            .entities(EntityKind::Value)
            .chain(g.entities(EntityKind::Item))
            .collect();
        for _ in 0..rng.gen_range(0..12) {
            let before = g.triples().to_vec();
            let obs = Observation {
                sentiment: *[Sentiment::PosOn, Sentiment::NegOn, Sentiment::NeuOn]
                    .choose(&mut rng)
                    .unwrap(),
                target: *targets.choose(&mut rng).unwrap(),
            };
            let added = g.apply_observation(obs).unwrap();
            rep.updates += 1;
            if g.check_invariants().is_err() {
                rep.ontology_violations += 1;
            }
            let grew_by = g.triples().len() - before.len();
            if g.triples()[..before.len()] != before[..] || grew_by != added as usize {
                rep.monotonicity_breaches += 1;
            }
            if g.apply_observation(obs).unwrap() {
                rep.monotonicity_breaches += 1;
            }
            let last = g
                .triples()
                .iter()
                .find(|t| t.relation == RelationKind::from(obs.sentiment) && t.tail == obs.target);
            if last.is_none() {
                rep.ontology_violations += 1;
            }
            if g.policy_masks(&s) != masks0 || !masks_sound(&g, &s) {
                rep.mask_failures += 1;
            }
        }
        g.to_json().hash(&mut h);
    }
    rep.digest = h.finish();
    rep
}

#[derive(Debug, Default)]
pub struct LeakSuite {
    pub episodes: usize,
    pub leaks: usize,
    pub invalid: usize,
}

/// Episodes with assorted agents; the user may name a ground-truth item
/// only when accepting it.
pub fn leak_suite(n: usize, seed: u64) -> LeakSuite {
    let cat = catalog();
    let cfg = SimulatorConfig::default();
    let mut rep = LeakSuite::default();
    let mut agents: Vec<Box<dyn Agent>> = vec![
        Box::new(RandomAgent),
        Box::new(RecAgent),
        Box::new(OracleAgent::new(OracleConfig::default())),
    ];
    for i in 0..n {
        let s = scenario(&cat, mix_seed(seed, i as u64));
        let a = &mut agents[i % 3];
        let e = run_episode(a.as_mut(), &s, &cfg, seed).unwrap();
        rep.episodes += 1;
        if e.dialog.validate(cfg.max_turns, Some(&s.ground_truth)).is_err() {
            rep.invalid += 1;
        }
        let t = &e.dialog.turns;
        for (k, u) in t.iter().enumerate().filter(|(_, u)| u.user_act().is_some()) {
            let Some(item) = u.item.filter(|i| s.is_ground_truth(*i)) else {
                continue;
            };
            let accepted = k > 0
                && u.user_act() == Some(UserAct::Reply)
                && u.sentiment == Some(Sentiment::PosOn)
                && t[k - 1].agent_act() == Some(AgentAct::Recommendation)
                && t[k - 1].item == Some(item);
            if !accepted {
                rep.leaks += 1;
            }
        }
    }
    rep
}

pub type Expect = fn(&Scenario, &DialogAction, &DialogAction) -> bool;

fn greet_or_inform(s: &Scenario, _: &DialogAction, u: &DialogAction) -> bool {
    match u.user_act() {
        Some(UserAct::Greeting) => u.sentiment.is_none() && u.value.is_none(),
        Some(UserAct::Inform) => u.sentiment == Some(Sentiment::PosOn) && u.value.is_some_and(|v| s.prefers(v)),
        _ => false,
    }
}

fn value_not_preferred(s: &Scenario) -> ValueId {
    let all: BTreeSet<ValueId> = s.values.keys().copied().collect();
    *all.iter()
        .find(|v| !s.prefers(**v))
        .expect("some value outside the preference")
}

/// Every case of the user policy, one prompt each, with its required
/// (act, sentiment) shape.
pub fn branch_cases(s: &Scenario) -> Vec<(Option<DialogAction>, bool, Branch, Expect)> {
    let t = s.ground_truth[0];
    let wrong = *s.candidates.iter().find(|c| !s.is_ground_truth(**c)).unwrap();
    let p_slot = *s.preference.keys().next().unwrap();
    let other_slot = (0..10).map(SlotId).find(|x| !s.preference.contains_key(x));
    let liked = s.preferred_values()[0];
    let disliked = value_not_preferred(s);
    let mut out: Vec<(Option<DialogAction>, bool, Branch, Expect)> = vec![
        (None, false, Branch::Init, greet_or_inform),
        (
            Some(DialogAction::recommend(t)),
            false,
            Branch::RecommendHit,
            |_, a, u| u.user_act() == Some(UserAct::Reply) && u.sentiment == Some(Sentiment::PosOn) && u.item == a.item,
        ),
        (
            Some(DialogAction::recommend(wrong)),
            false,
            Branch::RecommendMiss,
            |s, a, u| {
                u.user_act() == Some(UserAct::OpenQuestion)
                    && u.slot.is_some_and(|x| s.preference.contains_key(&x))
                    && u.item == a.item
                    && u.sentiment == Some(Sentiment::NegOn)
            },
        ),
        (
            Some(DialogAction::open_question(p_slot)),
            false,
            Branch::OpenQuestion,
            |s, a, u| {
                u.user_act() == Some(UserAct::Answer)
                    && u.sentiment == Some(Sentiment::PosOn)
                    && u.value.is_some_and(|v| s.preference[&a.slot.unwrap()].contains(&v))
            },
        ),
        (
            Some(DialogAction::yes_no(liked)),
            false,
            Branch::YesNoQuestion,
            |_, a, u| {
                u.user_act() == Some(UserAct::Answer) && u.sentiment == Some(Sentiment::PosOn) && u.value == a.value
            },
        ),
        (
            Some(DialogAction::yes_no(disliked)),
            false,
            Branch::YesNoQuestion,
            |_, a, u| {
                u.user_act() == Some(UserAct::Answer) && u.sentiment == Some(Sentiment::NegOn) && u.value == a.value
            },
        ),
        (
            Some(DialogAction::agent_answer(liked)),
            false,
            Branch::AnswerValue,
            |_, a, u| {
                u.user_act() == Some(UserAct::Inform) && u.sentiment == Some(Sentiment::PosOn) && u.value == a.value
            },
        ),
        (
            Some(DialogAction::agent_answer(disliked)),
            false,
            Branch::AnswerValue,
            |_, a, u| {
                u.user_act() == Some(UserAct::Inform) && u.sentiment == Some(Sentiment::NegOn) && u.value == a.value
            },
        ),
        (
            Some(DialogAction {
                item: Some(wrong),
                ..agent(AgentAct::Answer)
            }),
            false,
            Branch::AnswerItem,
            |s, _, u| {
                u.user_act() == Some(UserAct::Inform)
                    && u.sentiment == Some(Sentiment::PosOn)
                    && u.value.is_some_and(|v| s.prefers(v))
            },
        ),
        (
            Some(agent(AgentAct::Thanks)),
            true,
            Branch::ThanksAfterSuccess,
            |_, _, u| u.user_act() == Some(UserAct::Thanks) && u.sentiment == Some(Sentiment::PosOn),
        ),
        (
            Some(agent(AgentAct::Thanks)),
            false,
            Branch::ThanksWithoutSuccess,
            greet_or_inform,
        ),
        (
            Some(agent(AgentAct::Greeting)),
            false,
            Branch::Greeting,
            greet_or_inform,
        ),
    ];
    // A slot outside the preference still gets a preferred value back.
    if let Some(o) = other_slot {
        out.push((
            Some(DialogAction::open_question(o)),
            false,
            Branch::OpenQuestion,
            |s, _, u| {
                u.user_act() == Some(UserAct::Answer)
                    && u.sentiment == Some(Sentiment::PosOn)
                    && u.value.is_some_and(|v| s.prefers(v))
            },
        ));
    }
    out
}

pub fn agent(act: AgentAct) -> DialogAction {
    DialogAction::agent(act)
}

/// Two candidates that differ only in which value of one slot they carry;
/// both share a price value.
pub fn symmetric() -> Scenario {
    use memrex::catalog::{ScenarioItem, ScenarioValue};
    use memrex::{SlotId, ValueId};
    use std::collections::{BTreeMap, BTreeSet};
    let item = |name: &str, vals: &[u32]| ScenarioItem {
        name: name.into(),
        values: vals.iter().map(|v| ValueId(*v)).collect(),
    };
    let value = |name: &str, slot: u32| ScenarioValue {
        name: name.into(),
        slot: SlotId(slot),
    };
    Scenario {
        id: "ann-n".into(),
        user_id: "Ann".into(),
        with_history: false,
        candidates: vec![ItemId(1), ItemId(2)],
        history: vec![],
        ground_truth: vec![ItemId(1)],
        preference: BTreeMap::from([(SlotId(0), BTreeSet::from([ValueId(0)]))]),
        items: BTreeMap::from([
            (ItemId(1), item("Lotus", &[0, 2])),
            (ItemId(2), item("Saigon", &[1, 2])),
        ]),
        values: BTreeMap::from([
            (ValueId(0), value("thai", 0)),
            (ValueId(1), value("vietnamese", 0)),
            (ValueId(2), value("cheap", 2)),
        ]),
        slots: BTreeMap::from([(SlotId(0), "category".into()), (SlotId(2), "price".into())]),
    }
}

/// Expected success of recommending untried candidates at random for five
/// agent turns: min(5, |C|) / |C| per scenario.
pub fn rec_closed_form(scenarios: &[Scenario]) -> Vec<f64> {
    scenarios
        .iter()
        .map(|s| {
            let c = s.candidates.len() as f64;
            c.min(5.0) / c
        })
        .collect()
}

/// Uniform act then uniform argument: each of five agent turns hits with
/// probability 1 / (6 |C|).
pub fn random_closed_form(scenarios: &[Scenario]) -> Vec<f64> {
    scenarios
        .iter()
        .map(|s| 1.0 - (1.0 - 1.0 / (6.0 * s.candidates.len() as f64)).powi(5))
        .collect()
}

/// Mean and the binomial standard deviation of a `runs`-fold mean.
pub fn binomial_band(p: &[f64], runs: usize) -> (f64, f64) {
    let n = p.len() as f64;
    let mean = p.iter().sum::<f64>() / n;
    let var: f64 = p.iter().map(|x| x * (1.0 - x)).sum::<f64>() / (n * n * runs as f64);
    (mean, var.sqrt())
}

/// Drives every user-policy case over `n` scenarios; returns the number of
/// responses with the wrong shape and the set of branches reached.
pub fn branch_coverage(n: u64) -> (usize, BTreeSet<Branch>) {
    let cat = catalog();
    let cfg = SimulatorConfig::default();
    let mut wrong = 0;
    let mut seen = BTreeSet::new();
    for seed in 0..n {
        let s = scenario(&cat, seed);
        let mut rng = SimRng::seed_from_u64(seed);
        for (prompt, success, branch, ok) in branch_cases(&s) {
            let mut st = SimulatorState {
                success,
                ..Default::default()
            };
            let (u, b) = user_respond(&mut st, prompt.as_ref(), &s, &cfg, &mut rng).unwrap();
            let a = prompt.unwrap_or_else(|| agent(AgentAct::Greeting));
            if b != branch || !ok(&s, &a, &u) || memrex::dialog::validate_action(&u).is_err() {
                wrong += 1;
            }
            seen.insert(b);
        }
    }
    (wrong, seen)
}
