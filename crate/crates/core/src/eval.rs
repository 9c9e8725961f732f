//! Offline turn-level metrics, online success rate and item salience.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::agents::Agent;
use crate::catalog::Scenario;
use crate::dialog::{AgentAct, Dialog, Policy, PolicyLabels};
use crate::error::{Error, Result};
use crate::ids::{mix_seed, ItemId, SlotId, ValueId};
use crate::memgraph::{EntityKind, MemoryGraph};
use crate::simulator::{run_episode, SimulatorConfig};
use crate::umgr::{labelled_turns, UmgrModel};

pub const EMR_KS: [usize; 3] = [1, 3, 5];

/// Predicted act plus ranked argument lists, against the gold labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnPrediction {
    pub act: AgentAct,
    pub items: Vec<ItemId>,
    pub slots: Vec<SlotId>,
    pub values: Vec<ValueId>,
    pub gold: PolicyLabels,
}

impl TurnPrediction {
    /// Keeps the top `k` of each score table (descending, ties by entity).
    pub fn from_policy(policy: &Policy, graph: &MemoryGraph, gold: PolicyLabels, k: usize) -> Self {
        let top = |kind| Policy::top_k(policy.scores(kind).expect("argument kind"), k);
        Self {
            act: policy.best_act(),
            items: top(EntityKind::Item)
                .into_iter()
                .filter_map(|e| graph.item_id(e))
                .collect(),
            slots: top(EntityKind::Slot)
                .into_iter()
                .filter_map(|e| graph.slot_id(e))
                .collect(),
            values: top(EntityKind::Value)
                .into_iter()
                .filter_map(|e| graph.value_id(e))
                .collect(),
            gold,
        }
    }

    /// Hit at `k` for the gold argument; `None` when the turn is outside
    /// the EMR denominator.
    pub fn argument_hit(&self, k: usize) -> Option<bool> {
        if self.act != self.gold.act {
            return None;
        }
        let g = &self.gold;
        let within = |pos: Option<usize>| pos.is_some_and(|p| p < k);
        if let Some(i) = g.item {
            return Some(within(self.items.iter().position(|x| *x == i)));
        }
        if let Some(s) = g.slot {
            return Some(within(self.slots.iter().position(|x| *x == s)));
        }
        if let Some(v) = g.value {
            return Some(within(self.values.iter().position(|x| *x == v)));
        }
        None
    }
}

/// All agent turns of one dialog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DialogPrediction {
    pub scenario_id: String,
    pub ground_truth: Vec<ItemId>,
    pub turns: Vec<TurnPrediction>,
}

impl DialogPrediction {
    pub fn item_hit(&self, reading: ImrReading) -> bool {
        let top = |t: &TurnPrediction| t.items.first().is_some_and(|i| self.ground_truth.contains(i));
        match reading {
            ImrReading::AnyTurn => self.turns.iter().any(top),
            ImrReading::FinalTurn => self.turns.last().is_some_and(top),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Average {
    #[default]
    Macro,
    Micro,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImrReading {
    /// Ground truth ranked first at some agent turn.
    #[default]
    AnyTurn,
    FinalTurn,
}

/// A ratio that remembers its counts. An empty denominator gives value 0
/// with `undefined` set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub value: f64,
    pub hits: usize,
    pub total: usize,
    pub undefined: bool,
}

impl Rate {
    pub fn new(hits: usize, total: usize) -> Self {
        Self {
            value: if total == 0 { 0.0 } else { hits as f64 / total as f64 },
            hits,
            total,
            undefined: total == 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActMetrics {
    pub accuracy: f64,
    pub f1: f64,
}

/// Act accuracy and F1. Macro F1 averages over all six agent acts, with a
/// class that is never predicted nor gold scoring 0.
pub fn act_metrics(preds: &[TurnPrediction], average: F1Average) -> Result<ActMetrics> {
    if preds.is_empty() {
        return Err(Error::Protocol("act metrics need at least one prediction".into()));
    }
    let n = AgentAct::COUNT;
    let (mut tp, mut fp, mut fneg) = (vec![0usize; n], vec![0usize; n], vec![0usize; n]);
    for p in preds {
        let (a, g) = (p.act.index(), p.gold.act.index());
        if a == g {
            tp[a] += 1;
        } else {
            fp[a] += 1;
            fneg[g] += 1;
        }
    }
    let f1 = |tp: usize, fp: usize, fneg: usize| {
        if tp == 0 {
            0.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fneg) as f64
        }
    };
    let accuracy = tp.iter().sum::<usize>() as f64 / preds.len() as f64;
    let f1 = match average {
        F1Average::Macro => (0..n).map(|c| f1(tp[c], fp[c], fneg[c])).sum::<f64>() / n as f64,
        F1Average::Micro => f1(tp.iter().sum(), fp.iter().sum(), fneg.iter().sum()),
    };
    Ok(ActMetrics { accuracy, f1 })
}

/// Top-k argument hit rate over turns whose act was predicted correctly
/// and carries an argument.
pub fn emr_at_k(preds: &[TurnPrediction], k: usize) -> Rate {
    let (mut hits, mut total) = (0, 0);
    for h in preds.iter().filter_map(|p| p.argument_hit(k)) {
        total += 1;
        hits += h as usize;
    }
    Rate::new(hits, total)
}

pub fn imr(dialogs: &[DialogPrediction], reading: ImrReading) -> Rate {
    Rate::new(dialogs.iter().filter(|d| d.item_hit(reading)).count(), dialogs.len())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub act_accuracy: f64,
    pub act_f1_macro: f64,
    pub act_f1_micro: f64,
    /// EMR at 1, 3 and 5.
    pub emr: BTreeMap<usize, f64>,
    /// No turn had a correct argument-bearing act.
    pub emr_undefined: bool,
    pub imr: f64,
    pub imr_final_turn: f64,
    pub n_turns: usize,
    pub n_dialogs: usize,
}

impl MetricsReport {
    pub fn from_predictions(dialogs: &[DialogPrediction]) -> Result<Self> {
        let turns: Vec<TurnPrediction> = dialogs.iter().flat_map(|d| d.turns.iter().cloned()).collect();
        let macro_ = act_metrics(&turns, F1Average::Macro)?;
        let micro = act_metrics(&turns, F1Average::Micro)?;
        let emrs: Vec<Rate> = EMR_KS.iter().map(|k| emr_at_k(&turns, *k)).collect();
        Ok(Self {
            act_accuracy: macro_.accuracy,
            act_f1_macro: macro_.f1,
            act_f1_micro: micro.f1,
            emr: EMR_KS.iter().zip(&emrs).map(|(k, r)| (*k, r.value)).collect(),
            emr_undefined: emrs[0].undefined,
            imr: imr(dialogs, ImrReading::AnyTurn).value,
            imr_final_turn: imr(dialogs, ImrReading::FinalTurn).value,
            n_turns: turns.len(),
            n_dialogs: dialogs.len(),
        })
    }
}

/// Teacher-forced predictions of `model` at every agent turn of the gold
/// dialogs.
pub fn offline_predictions<'a>(
    model: &UmgrModel<f64>,
    dialogs: &[Dialog],
    scenarios: impl IntoIterator<Item = &'a Scenario>,
) -> Result<Vec<DialogPrediction>> {
    let by_id: HashMap<&str, &Scenario> = scenarios.into_iter().map(|s| (s.id.as_str(), s)).collect();
    let k = *EMR_KS.last().expect("nonempty");
    dialogs
        .iter()
        .map(|d| {
            let s = by_id
                .get(d.scenario_id.as_str())
                .ok_or_else(|| Error::Lookup(format!("scenario {}", d.scenario_id)))?;
            let turns = labelled_turns(d, s, model.config.static_graph)?
                .into_iter()
                .map(|t| {
                    let p = model.predict_policy(&t.graph, &t.masks, &t.acts)?;
                    Ok(TurnPrediction::from_policy(&p, &t.graph, t.labels, k))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(DialogPrediction {
                scenario_id: d.scenario_id.clone(),
                ground_truth: s.ground_truth.clone(),
                turns,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfflineRow {
    pub scenario_id: String,
    pub agent_turns: usize,
    pub acts_correct: usize,
    pub imr_hit: bool,
}

pub fn offline_rows(dialogs: &[DialogPrediction]) -> Vec<OfflineRow> {
    dialogs
        .iter()
        .map(|d| OfflineRow {
            scenario_id: d.scenario_id.clone(),
            agent_turns: d.turns.len(),
            acts_correct: d.turns.iter().filter(|t| t.act == t.gold.act).count(),
            imr_hit: d.item_hit(ImrReading::AnyTurn),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub run: usize,
    pub scenario_id: String,
    pub success: bool,
    pub n_turns: usize,
    pub imr_hit: bool,
    pub failure_reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineReport {
    pub agent: String,
    pub n_scenarios: usize,
    pub runs: usize,
    pub per_run: Vec<f64>,
    pub success_mean: f64,
    /// Sample standard deviation of the per-run rates over `sqrt(runs)`.
    pub success_stderr: f64,
    /// Any-turn item match over all episodes; 0 for agents without scores.
    pub imr: f64,
    pub episodes: Vec<EpisodeRow>,
}

pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Runs every scenario `runs` times; run `r` uses seed `mix_seed(seed, r)`.
pub fn online_eval(
    agent: &mut dyn Agent,
    scenarios: &[Scenario],
    runs: usize,
    cfg: &SimulatorConfig,
    seed: u64,
) -> Result<OnlineReport> {
    if scenarios.is_empty() || runs == 0 {
        return Err(Error::Config("online evaluation needs scenarios and runs".into()));
    }
    let mut episodes = Vec::with_capacity(runs * scenarios.len());
    let mut per_run = Vec::with_capacity(runs);
    for r in 0..runs {
        let run_seed = mix_seed(seed, r as u64);
        let mut wins = 0;
        for s in scenarios {
            agent.reset();
            let e = run_episode(agent, s, cfg, run_seed)?;
            wins += e.success as usize;
            episodes.push(EpisodeRow {
                run: r,
                scenario_id: s.id.clone(),
                success: e.success,
                n_turns: e.n_turns,
                imr_hit: e.top_items.iter().any(|i| i.is_some_and(|i| s.is_ground_truth(i))),
                failure_reason: e.failure_reason,
            });
        }
        per_run.push(wins as f64 / scenarios.len() as f64);
    }
    let (success_mean, success_stderr) = mean_stderr(&per_run);
    let imr = episodes.iter().filter(|e| e.imr_hit).count() as f64 / episodes.len() as f64;
    Ok(OnlineReport {
        agent: agent.name().to_string(),
        n_scenarios: scenarios.len(),
        runs,
        per_run,
        success_mean,
        success_stderr,
        imr,
        episodes,
    })
}

/// Item scores per agent decision point, columns in candidate order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SalienceMatrix {
    pub scenario_id: String,
    pub items: Vec<ItemId>,
    pub item_names: Vec<String>,
    /// Utterance index of each row's agent turn.
    pub turns: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
}

impl SalienceMatrix {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["turn".to_string()];
        header.extend(self.item_names.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for (t, row) in self.turns.iter().zip(&self.rows) {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(|x| x.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv writes utf-8"))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Replays `dialog` and scores the candidates before every agent turn.
pub fn salience_matrix(model: &UmgrModel<f64>, dialog: &Dialog, scenario: &Scenario) -> Result<SalienceMatrix> {
    let mut out = SalienceMatrix {
        scenario_id: scenario.id.clone(),
        items: scenario.candidates.clone(),
        item_names: scenario
            .candidates
            .iter()
            .map(|i| {
                scenario
                    .items
                    .get(i)
                    .map(|x| x.name.clone())
                    .unwrap_or_else(|| i.to_string())
            })
            .collect(),
        turns: Vec::new(),
        rows: Vec::new(),
    };
    for t in labelled_turns(dialog, scenario, model.config.static_graph)? {
        let p = model.predict_policy(&t.graph, &t.masks, &t.acts)?;
        let row = scenario
            .candidates
            .iter()
            .map(|i| {
                let e = t.graph.item_entity(*i).ok_or_else(|| Error::Lookup(i.to_string()))?;
                Ok(p.items.get(&e).copied().unwrap_or(0.0))
            })
            .collect::<Result<Vec<_>>>()?;
        out.turns.push(t.turn);
        out.rows.push(row);
    }
    Ok(out)
}

/// Serializes rows as CSV with a header.
pub fn write_csv<R: Serialize>(rows: &[R], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{AgentDecision, AgentObservation, RecAgent};
    use crate::dialog::DialogAction;
    use crate::memgraph::fixtures::bob;
    use crate::simulator::SimRng;

    fn labels(act: AgentAct) -> PolicyLabels {
        PolicyLabels {
            act,
            item: None,
            slot: None,
            value: None,
        }
    }

    fn pred(act: AgentAct, gold: PolicyLabels) -> TurnPrediction {
        TurnPrediction {
            act,
            items: vec![],
            slots: vec![],
            values: vec![],
            gold,
        }
    }

    /// Open question on price ranked second, a top-1 recommendation, a
    /// wrong act and an argument-free greeting.
    fn four_turns() -> Vec<TurnPrediction> {
        vec![
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
        ]
    }

    #[test]
    fn four_turn_fixture() {
        let p = four_turns();
        let m = act_metrics(&p, F1Average::Macro).unwrap();
        assert_eq!(m.accuracy, 3.0 / 4.0);
        // Greeting 1, open question 2/3, recommendation 1, three classes at 0.
        assert_eq!(m.f1, (1.0 + 2.0 / 3.0 + 1.0) / 6.0);
        assert_eq!(act_metrics(&p, F1Average::Micro).unwrap().f1, 3.0 / 4.0);
        assert_eq!(emr_at_k(&p, 1), Rate::new(1, 2));
        assert_eq!(emr_at_k(&p, 3), Rate::new(2, 2));
        assert_eq!(emr_at_k(&p, 5), Rate::new(2, 2));
        assert_eq!(p[0].argument_hit(1), Some(false));
        assert_eq!(p[0].argument_hit(3), Some(true));
        assert_eq!(p[2].argument_hit(5), None);
        assert_eq!(p[3].argument_hit(5), None);
    }

    #[test]
    fn half_right_single_class() {
        let a = AgentAct::Recommendation;
        let b = AgentAct::OpenQuestion;
        let p = vec![
            pred(a, labels(a)),
            pred(a, labels(a)),
            pred(a, labels(b)),
            pred(a, labels(b)),
        ];
        let m = act_metrics(&p, F1Average::Macro).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.f1, (2.0 / 3.0) / 6.0);
        assert!(act_metrics(&[], F1Average::Macro).is_err());
        let all = AgentAct::ALL.iter().map(|x| pred(*x, labels(*x))).collect::<Vec<_>>();
        assert_eq!(
            act_metrics(&all, F1Average::Macro).unwrap(),
            ActMetrics { accuracy: 1.0, f1: 1.0 }
        );
    }

    #[test]
    fn empty_emr_is_flagged() {
        let p = vec![pred(
            AgentAct::OpenQuestion,
            PolicyLabels {
                slot: Some(SlotId(1)),
                ..labels(AgentAct::Recommendation)
            },
        )];
        let r = emr_at_k(&p, 1);
        assert!(r.undefined);
        assert_eq!(r.value, 0.0);
    }

    /// Ten dialogs; the ground truth is top-ranked at some turn in four,
    /// and at the final turn in two of those.
    fn ten_dialogs() -> Vec<DialogPrediction> {
        let turn = |top: u32| TurnPrediction {
            items: vec![ItemId(top)],
            ..pred(
                AgentAct::Recommendation,
                PolicyLabels {
                    item: Some(ItemId(1)),
                    ..labels(AgentAct::Recommendation)
                },
            )
        };
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
        tops.iter()
            .enumerate()
            .map(|(i, t)| DialogPrediction {
                scenario_id: format!("d{i}"),
                ground_truth: vec![ItemId(1)],
                turns: t.iter().map(|x| turn(*x)).collect(),
            })
            .collect()
    }

    #[test]
    fn ten_dialog_fixture() {
        let d = ten_dialogs();
        assert_eq!(imr(&d, ImrReading::AnyTurn), Rate::new(4, 10));
        assert_eq!(imr(&d, ImrReading::AnyTurn).value, 0.4);
        assert_eq!(imr(&d, ImrReading::FinalTurn), Rate::new(2, 10));
        let mut rev = d.clone();
        rev.reverse();
        assert_eq!(
            MetricsReport::from_predictions(&rev).unwrap(),
            MetricsReport::from_predictions(&d).unwrap()
        );
        let r = MetricsReport::from_predictions(&d).unwrap();
        assert_eq!((r.n_dialogs, r.n_turns), (10, 15));
        assert!(r.emr[&1] <= r.emr[&3] && r.emr[&3] <= r.emr[&5]);
    }

    struct Mute;
    impl Agent for Mute {
        fn name(&self) -> &str {
            "mute"
        }
        fn act(&mut self, _: &AgentObservation, _: &mut SimRng) -> Result<AgentDecision> {
            Ok(AgentDecision::plain(DialogAction::agent(AgentAct::Greeting)))
        }
    }

    #[test]
    fn online_basics() {
        let s = vec![bob()];
        let cfg = SimulatorConfig::default();
        let r = online_eval(&mut Mute, &s, 3, &cfg, 0).unwrap();
        assert_eq!(r.success_mean, 0.0);
        assert_eq!(r.episodes.len(), 3);
        // Two candidates and five agent turns: the recommender always finds it.
        let r = online_eval(&mut RecAgent, &s, 3, &cfg, 0).unwrap();
        assert_eq!((r.success_mean, r.success_stderr), (1.0, 0.0));
        assert_eq!(r, online_eval(&mut RecAgent, &s, 3, &cfg, 0).unwrap());
        assert!(online_eval(&mut RecAgent, &[], 3, &cfg, 0).is_err());
    }

    #[test]
    fn stderr_oracle() {
        let (m, se) = mean_stderr(&[0.2, 0.4, 0.6]);
        assert!((m - 0.4).abs() < 1e-15);
        // Sample variance 0.04, over three runs.
        assert!((se - (0.04f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn csv_rows() {
        let rows = offline_rows(&ten_dialogs());
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("scenario_id,agent_turns,acts_correct,imr_hit"));
        assert_eq!(lines.next(), Some("d0,1,1,true"));
        assert_eq!(text.lines().count(), 11);
    }
}
