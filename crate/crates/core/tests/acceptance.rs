//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Tolerances are pinned below.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use memrex::agents::{
    keyed_triples, train_transe, Agent, EmbeddingTable, OracleAgent, OracleConfig, RandomAgent, RecAgent, TransEAgent,
    TransEConfig,
};
use memrex::catalog::{generate_split, Scenario, ScenarioItem, ScenarioValue, SplitCounts};
use memrex::dialog::{AgentAct, Dialog, DialogAction, PolicyLabels, Sentiment, UserAct};
use memrex::eval::{
    act_metrics, emr_at_k, imr, offline_predictions, online_eval, salience_matrix, DialogPrediction, F1Average,
    ImrReading, MetricsReport, OnlineReport, Rate, TurnPrediction,
};
use memrex::memgraph::{MemoryGraph, Observation};
use memrex::simulator::{run_episode, SimulatorConfig};
use memrex::umgr::{build_examples, train_umgr, Batch, UmgrAgent, UmgrConfig};
use memrex::{ItemId, SlotId, Umgr64, ValueId};
use memrex_neural::{grad_check, GradCheckConfig};

const GRAD_TOL: f64 = 1e-4;
const GRAD_SECONDS: f64 = 60.0;
const BAND_SIGMAS: f64 = 3.0;
const BASELINE_RUNS: usize = 3;
const BASELINE_SECONDS: f64 = 120.0;
const ONLINE_RUNS: usize = 3;
const UMGR_MARGIN: f64 = 0.05;
const ABLATION_DROP: f64 = 0.15;
const DESK_TRAIN_MINUTES: f64 = 30.0;
const GRAPH_SEQUENCES: usize = 10_000;
const LEAK_EPISODES: usize = 10_000;
const SALIENCE_SHARE: f64 = 0.9;

const TRAIN_USERS: usize = 1000;
const TEST_USERS: usize = 300;
const SPLIT_SEED: u64 = 2024;

struct Outcome {
    failed: usize,
}

impl Outcome {
    fn line(&mut self, name: &str, ok: bool, detail: String) {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed += 1;
        }
    }
}

fn three_items() -> Scenario {
    let mut s = common::symmetric();
    s.id = "ann-h".into();
    s.with_history = true;
    s.candidates.push(ItemId(3));
    s.history = vec![ItemId(4)];
    s.items.insert(
        ItemId(3),
        ScenarioItem {
            name: "Pho Corner".into(),
            values: [ValueId(1), ValueId(3)].into(),
        },
    );
    s.items.insert(
        ItemId(4),
        ScenarioItem {
            name: "Bangkok Bowl".into(),
            values: [ValueId(0), ValueId(2)].into(),
        },
    );
    s.values.insert(
        ValueId(3),
        ScenarioValue {
            name: "patio".into(),
            slot: SlotId(1),
        },
    );
    s.slots.insert(SlotId(1), "seating".into());
    s
}

fn gradients(out: &mut Outcome) {
    let t0 = Instant::now();
    let s = three_items();
    let cfg = UmgrConfig {
        n_layers: 2,
        hidden: 8,
        ..UmgrConfig::desk()
    };
    let d = run_episode(
        &mut OracleAgent::new(OracleConfig::default()),
        &s,
        &SimulatorConfig::default(),
        5,
    )
    .unwrap()
    .dialog;
    let ex = build_examples(&[d], [&s], &cfg).unwrap();
    let inputs: Vec<_> = ex.iter().map(|e| &e.input).collect();
    let targets: Vec<_> = ex.iter().map(|e| e.targets).collect();
    let batch = Batch::new(&inputs, Some(&targets), true);
    let model = Umgr64::new(cfg).unwrap();
    let rep = grad_check(
        &model.params,
        |tape, b| model.loss(tape, b, &batch).total,
        &GradCheckConfig {
            coords_per_tensor: 16,
            ..Default::default()
        },
    )
    .unwrap();
    let secs = t0.elapsed().as_secs_f64();
    out.line(
        "gradient check",
        rep.max_relative_error < GRAD_TOL && secs < GRAD_SECONDS,
        format!(
            "max rel err {:.2e} < {GRAD_TOL:.0e} over {} coords ({}), {secs:.1}s < {GRAD_SECONDS}s",
            rep.max_relative_error, rep.coords_checked, rep.worst_param
        ),
    );
}

fn baselines(out: &mut Outcome, test: &[Scenario]) -> (OnlineReport, OnlineReport) {
    let cfg = SimulatorConfig::default();
    let mut reports = Vec::new();
    for (name, agent, expected) in [
        (
            "rec baseline closed form",
            Box::new(RecAgent) as Box<dyn Agent>,
            common::rec_closed_form(test),
        ),
        (
            "random baseline closed form",
            Box::new(RandomAgent),
            common::random_closed_form(test),
        ),
    ] {
        let mut agent = agent;
        let t0 = Instant::now();
        let r = online_eval(agent.as_mut(), test, BASELINE_RUNS, &cfg, 11).unwrap();
        let (mean, sd) = common::binomial_band(&expected, BASELINE_RUNS);
        let z = (r.success_mean - mean) / sd;
        let secs = t0.elapsed().as_secs_f64();
        out.line(
            name,
            z.abs() <= BAND_SIGMAS && test.len() >= 500 && secs < BASELINE_SECONDS,
            format!(
                "{:.4} vs {mean:.4} ± {sd:.4}, z = {z:+.2} (|z| ≤ {BAND_SIGMAS}), {} scenarios × {BASELINE_RUNS}, \
                 {secs:.1}s < {BASELINE_SECONDS}s",
                r.success_mean,
                test.len()
            ),
        );
        reports.push(r);
    }
    let random = reports.pop().unwrap();
    (reports.pop().unwrap(), random)
}

fn metric_fixtures(out: &mut Outcome, offline: &[(&str, MetricsReport)]) {
    let labels = |act| PolicyLabels {
        act,
        item: None,
        slot: None,
        value: None,
    };
    let pred = |act, gold| TurnPrediction {
        act,
        items: vec![],
        slots: vec![],
        values: vec![],
        gold,
    };
    let four = vec![
        TurnPrediction {
            slots: vec![SlotId(0), SlotId(2), SlotId(1)],
            ..pred(
                AgentAct::OpenQuestion,
                PolicyLabels {
                    slot: Some(SlotId(2)),
                    ..labels(AgentAct::OpenQuestion)
                },
            )
        },
        TurnPrediction {
            items: vec![ItemId(5), ItemId(6)],
            ..pred(
                AgentAct::Recommendation,
                PolicyLabels {
                    item: Some(ItemId(5)),
                    ..labels(AgentAct::Recommendation)
                },
            )
        },
        TurnPrediction {
            values: vec![ValueId(7)],
            ..pred(
                AgentAct::OpenQuestion,
                PolicyLabels {
                    value: Some(ValueId(7)),
                    ..labels(AgentAct::YesNoQuestion)
                },
            )
        },
        pred(AgentAct::Greeting, labels(AgentAct::Greeting)),
    ];
    let macro_f1 = act_metrics(&four, F1Average::Macro).unwrap();
    let micro_f1 = act_metrics(&four, F1Average::Micro).unwrap().f1;
    let four_ok = macro_f1.accuracy == 0.75
        && macro_f1.f1 == (1.0 + 2.0 / 3.0 + 1.0) / 6.0
        && micro_f1 == 0.75
        && emr_at_k(&four, 1) == Rate::new(1, 2)
        && emr_at_k(&four, 3) == Rate::new(2, 2)
        && emr_at_k(&four, 5) == Rate::new(2, 2);

    let tops: [&[u32]; 10] = [
        &[1],
        &[2, 1],
        &[1, 2],
        &[3, 1, 2],
        &[2],
        &[2, 3],
        &[3],
        &[],
        &[4, 4],
        &[5],
    ];
    let dialogs: Vec<_> = tops
        .iter()
        .enumerate()
        .map(|(i, t)| DialogPrediction {
            scenario_id: format!("d{i}"),
            ground_truth: vec![ItemId(1)],
            turns: t
                .iter()
                .map(|x| TurnPrediction {
                    items: vec![ItemId(*x)],
                    ..pred(
                        AgentAct::Recommendation,
                        PolicyLabels {
                            item: Some(ItemId(1)),
                            ..labels(AgentAct::Recommendation)
                        },
                    )
                })
                .collect(),
        })
        .collect();
    let ten_ok = imr(&dialogs, ImrReading::AnyTurn) == Rate::new(4, 10)
        && imr(&dialogs, ImrReading::FinalTurn) == Rate::new(2, 10);

    let monotone = offline
        .iter()
        .all(|(_, r)| r.emr[&1] <= r.emr[&3] && r.emr[&3] <= r.emr[&5]);
    let emr: Vec<String> = offline
        .iter()
        .map(|(n, r)| format!("{n} {:.3}/{:.3}/{:.3}", r.emr[&1], r.emr[&3], r.emr[&5]))
        .collect();
    out.line(
        "metric fixtures",
        four_ok && ten_ok && monotone,
        format!(
            "4-turn acc/macro/micro/EMR {}; 10-dialog IMR 4/10 final 2/10 {}; EMR@1≤@3≤@5 {} ({})",
            if four_ok { "exact" } else { "wrong" },
            if ten_ok { "exact" } else { "wrong" },
            if monotone { "holds" } else { "broken" },
            emr.join(", ")
        ),
    );
}

fn graph_suite(out: &mut Outcome) {
    let a = common::graph_suite(GRAPH_SEQUENCES, 77);
    let b = common::graph_suite(GRAPH_SEQUENCES, 77);
    out.line(
        "memory graph suite",
        a.clean() && a.sequences == GRAPH_SEQUENCES && a.digest == b.digest,
        format!(
            "{} sequences, {} updates, violations {}, monotonicity {}, masks {}, digest stable {}",
            a.sequences,
            a.updates,
            a.ontology_violations,
            a.monotonicity_breaches,
            a.mask_failures,
            a.digest == b.digest
        ),
    );
}

fn simulator(out: &mut Outcome) {
    let (wrong, seen) = common::branch_coverage(200);
    let leaks = common::leak_suite(LEAK_EPISODES, 31);
    out.line(
        "simulator fidelity",
        wrong == 0 && seen.len() == 10 && leaks.episodes == LEAK_EPISODES && leaks.leaks == 0 && leaks.invalid == 0,
        format!(
            "{}/10 branches reached, {wrong} off-shape responses; {} episodes, {} leaks, {} invalid",
            seen.len(),
            leaks.episodes,
            leaks.leaks,
            leaks.invalid
        ),
    );
}

struct Desk {
    test: Vec<Scenario>,
    test_dialogs: Vec<Dialog>,
    full: Umgr64,
    frozen: Umgr64,
    transe: EmbeddingTable,
    full_minutes: f64,
}

fn desk() -> Desk {
    let cat = common::catalog();
    let [train, _, test] = generate_split(
        &cat,
        SplitCounts {
            train: TRAIN_USERS,
            dev: 0,
            test: TEST_USERS,
        },
        SPLIT_SEED,
    )
    .unwrap();
    assert!(train.user_ids().is_disjoint(&test.user_ids()));
    let sim = SimulatorConfig::default();
    let oracle_corpus = |scenarios: &[Scenario]| -> Vec<Dialog> {
        let mut o = OracleAgent::new(OracleConfig::default());
        scenarios
            .iter()
            .enumerate()
            .map(|(i, s)| run_episode(&mut o, s, &sim, i as u64).unwrap().dialog)
            .collect()
    };
    let dialogs = oracle_corpus(&train.scenarios);
    let test_dialogs = oracle_corpus(&test.scenarios);

    let fit = |static_graph: bool| {
        let t0 = Instant::now();
        let cfg = UmgrConfig {
            static_graph,
            ..UmgrConfig::desk()
        };
        let ex = build_examples(&dialogs, train.scenarios.iter(), &cfg).unwrap();
        let mut m = Umgr64::new(cfg).unwrap();
        let rep = train_umgr(&mut m, &ex).unwrap();
        let minutes = t0.elapsed().as_secs_f64() / 60.0;
        println!(
            "info: {} UMGR trained on {} dialogs / {} turns, loss {:.3} -> {:.3} in {minutes:.1} min",
            if static_graph { "static" } else { "full" },
            dialogs.len(),
            rep.n_examples,
            rep.initial[4],
            rep.final_loss()
        );
        (m, minutes)
    };
    let (full, full_minutes) = fit(false);
    let (frozen, _) = fit(true);

    let triples: Vec<_> = train
        .scenarios
        .iter()
        .flat_map(|s| keyed_triples(&MemoryGraph::build_initial(s).unwrap()))
        .collect();
    let transe = train_transe(&triples, &TransEConfig::default()).unwrap();
    Desk {
        test: test.scenarios,
        test_dialogs,
        full,
        frozen,
        transe,
        full_minutes,
    }
}

fn ordering(out: &mut Outcome, d: &Desk, rec: &OnlineReport, random: &OnlineReport) -> OnlineReport {
    let sim = SimulatorConfig::default();
    let umgr = online_eval(&mut UmgrAgent::new(d.full.clone()), &d.test, ONLINE_RUNS, &sim, 11).unwrap();
    let transe = online_eval(&mut TransEAgent::new(d.transe.clone()), &d.test, ONLINE_RUNS, &sim, 11).unwrap();
    let [u, r, t, x] = [&umgr, rec, &transe, random].map(|r| r.success_mean);
    out.line(
        "zero-shot success ordering",
        u > r && r > t && t > x && u >= r + UMGR_MARGIN && d.full_minutes <= DESK_TRAIN_MINUTES,
        format!(
            "umgr {u:.3}±{:.3} > rec {r:.3} > transe {t:.3} > random {x:.3}; margin {:+.3} ≥ {UMGR_MARGIN}; \
             training {:.1} ≤ {DESK_TRAIN_MINUTES} min",
            umgr.success_stderr,
            u - r,
            d.full_minutes
        ),
    );
    umgr
}

fn ablation(out: &mut Outcome, d: &Desk, full_online: &OnlineReport) -> Vec<(&'static str, MetricsReport)> {
    let sim = SimulatorConfig::default();
    let frozen_online = online_eval(&mut UmgrAgent::new(d.frozen.clone()), &d.test, ONLINE_RUNS, &sim, 11).unwrap();
    let offline = |m: &Umgr64| {
        MetricsReport::from_predictions(&offline_predictions(m, &d.test_dialogs, d.test.iter()).unwrap()).unwrap()
    };
    let full_off = offline(&d.full);
    let frozen_off = offline(&d.frozen);
    let imr_drop = full_off.imr - frozen_off.imr;
    let success_drop = full_online.success_mean - frozen_online.success_mean;
    out.line(
        "static graph ablation",
        imr_drop >= ABLATION_DROP && success_drop >= ABLATION_DROP,
        format!(
            "IMR {:.3} -> {:.3} (drop {imr_drop:.3}), success {:.3} -> {:.3} (drop {success_drop:.3}), both ≥ {ABLATION_DROP}; \
             act acc {:.3} -> {:.3}",
            full_off.imr,
            frozen_off.imr,
            full_online.success_mean,
            frozen_online.success_mean,
            full_off.act_accuracy,
            frozen_off.act_accuracy
        ),
    );
    vec![("full", full_off), ("static", frozen_off)]
}

/// After the user likes the value only Lotus has, Lotus must lead.
fn symmetric_check(d: &Desk) {
    let s = common::symmetric();
    let mut g = MemoryGraph::build_initial(&s).unwrap();
    let thai = g.value_entity(ValueId(0)).unwrap();
    g.apply_observation(Observation {
        sentiment: Sentiment::PosOn,
        target: thai,
    })
    .unwrap();
    let acts = [
        DialogAction::agent(AgentAct::Greeting).act,
        DialogAction::user_on_value(UserAct::Inform, ValueId(0), Sentiment::PosOn).act,
    ];
    let p = d.full.predict_policy(&g, &g.policy_masks(&s), &acts).unwrap();
    let lotus = p.items[&g.item_entity(ItemId(1)).unwrap()];
    let saigon = p.items[&g.item_entity(ItemId(2)).unwrap()];
    println!(
        "{} symmetric fixture: Lotus {lotus:.3} vs Saigon {saigon:.3} after a liked unique value",
        if lotus > saigon { "info" } else { "warn" }
    );
}

/// Share of rejected recommendations whose item score does not rise at the
/// next agent turn.
fn salience_check(d: &Desk) {
    let sim = SimulatorConfig::default();
    let mut agent = UmgrAgent::new(d.full.clone());
    let (mut held, mut total) = (0usize, 0usize);
    for (i, s) in d.test.iter().enumerate() {
        let e = run_episode(&mut agent, s, &sim, i as u64).unwrap();
        let m = salience_matrix(&d.full, &e.dialog, s).unwrap();
        let col: BTreeMap<ItemId, usize> = m.items.iter().enumerate().map(|(c, i)| (*i, c)).collect();
        for w in 0..m.turns.len().saturating_sub(1) {
            let a = &e.dialog.turns[m.turns[w]];
            let Some(item) = a
                .item
                .filter(|x| a.agent_act() == Some(AgentAct::Recommendation) && !s.is_ground_truth(*x))
            else {
                continue;
            };
            total += 1;
            if m.rows[w + 1][col[&item]] <= m.rows[w][col[&item]] {
                held += 1;
            }
        }
    }
    let share = held as f64 / total.max(1) as f64;
    println!(
        "{} salience after rejection: score did not rise in {held}/{total} = {share:.3} (target ≥ {SALIENCE_SHARE})",
        if share >= SALIENCE_SHARE { "info" } else { "warn" }
    );
}

fn main() -> ExitCode {
    let mut out = Outcome { failed: 0 };
    gradients(&mut out);
    graph_suite(&mut out);
    simulator(&mut out);
    let d = desk();
    let (rec, random) = baselines(&mut out, &d.test);
    let umgr = ordering(&mut out, &d, &rec, &random);
    let offline = ablation(&mut out, &d, &umgr);
    metric_fixtures(&mut out, &offline);
    symmetric_check(&d);
    salience_check(&d);
    println!("acceptance: {} criteria failed", out.failed);
    if out.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
