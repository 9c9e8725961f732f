//! Translation embeddings trained on the static part of training graphs,
//! and an agent that ranks items by them without any graph convolution.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Agent, AgentDecision, AgentObservation};
use crate::dialog::{AgentAct, DialogAction, Policy};
use crate::error::{Error, Result};
use crate::memgraph::{EntityId, EntityKind, MemoryGraph, RelationKind, Triple, M_CUR_DIALOG, M_HISTORY};
use crate::simulator::SimRng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransEConfig {
    pub dim: usize,
    pub margin: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TransEConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            margin: 1.0,
            lr: 0.05,
            epochs: 100,
            batch_size: 256,
            seed: 0,
        }
    }
}

/// Scenario-independent name of a graph entity: catalog id for items,
/// slots and values, the display name otherwise.
pub fn entity_key(g: &MemoryGraph, e: EntityId) -> String {
    let id = match e.kind {
        EntityKind::Item => g.item_id(e).map(|i| i.to_string()),
        EntityKind::Slot => g.slot_id(e).map(|i| i.to_string()),
        EntityKind::Value => g.value_id(e).map(|i| i.to_string()),
        _ => None,
    };
    format!("{}:{}", e.kind.as_str(), id.unwrap_or_else(|| g.describe(e)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub margin: f64,
    pub entities: BTreeMap<String, Vec<f64>>,
    pub relations: BTreeMap<RelationKind, Vec<f64>>,
    /// Mean training loss per epoch.
    pub loss_trace: Vec<f64>,
}

fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl EmbeddingTable {
    /// Unseen entities map to the origin.
    pub fn entity(&self, key: &str) -> Vec<f64> {
        self.entities.get(key).cloned().unwrap_or_else(|| vec![0.0; self.dim])
    }

    pub fn relation(&self, r: RelationKind) -> &[f64] {
        &self.relations[&r]
    }

    /// ‖h + r − t‖.
    pub fn distance(&self, h: &str, r: RelationKind, t: &str) -> f64 {
        let (h, t, r) = (self.entity(h), self.entity(t), self.relation(r));
        let x: Vec<f64> = (0..self.dim).map(|i| h[i] + r[i] - t[i]).collect();
        l2(&x)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

type KeyTriple = (String, RelationKind, String);

/// Static triples of a graph under scenario-independent keys.
pub fn keyed_triples(g: &MemoryGraph) -> Vec<KeyTriple> {
    g.triples()
        .iter()
        .filter(|t| !t.relation.is_sentiment())
        .map(|t: &Triple| (entity_key(g, t.head), t.relation, entity_key(g, t.tail)))
        .collect()
}

fn project_unit_ball(v: &mut [f64]) {
    let n = l2(v);
    if n > 1.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Margin ranking training with one fixed corrupted triple per positive
/// (head or tail replaced by a uniform entity), drawn once from the seed.
pub fn train_transe(triples: &[KeyTriple], cfg: &TransEConfig) -> Result<EmbeddingTable> {
    let unique: BTreeSet<&KeyTriple> = triples.iter().collect();
    if unique.is_empty() {
        return Err(Error::Training("no triples to embed".into()));
    }
    if cfg.dim == 0 || cfg.batch_size == 0 {
        return Err(Error::Config("TransE dim and batch size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let names: Vec<String> = unique
        .iter()
        .flat_map(|(h, _, t)| [h.clone(), t.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let bound = 6.0 / (cfg.dim as f64).sqrt();
    let mut ent: Vec<Vec<f64>> = names
        .iter()
        .map(|_| {
            let mut v: Vec<f64> = (0..cfg.dim).map(|_| rng.gen_range(-bound..bound)).collect();
            project_unit_ball(&mut v);
            v
        })
        .collect();
    let mut rel: Vec<Vec<f64>> = RelationKind::ALL
        .iter()
        .map(|_| {
            let mut v: Vec<f64> = (0..cfg.dim).map(|_| rng.gen_range(-bound..bound)).collect();
            let n = l2(&v);
            v.iter_mut().for_each(|x| *x /= n);
            v
        })
        .collect();
    let pos: Vec<(usize, usize, usize)> = unique
        .iter()
        .map(|(h, r, t)| (index[h.as_str()], r.index(), index[t.as_str()]))
        .collect();
    let pos_set: BTreeSet<(usize, usize, usize)> = pos.iter().copied().collect();
    let n_ent = names.len();
    let neg: Vec<(usize, usize, usize)> = pos
        .iter()
        .map(|&(h, r, t)| {
            for _ in 0..32 {
                let e = rng.gen_range(0..n_ent);
                let c = if rng.gen_bool(0.5) { (e, r, t) } else { (h, r, e) };
                if !pos_set.contains(&c) {
                    return c;
                }
            }
            (h, r, t)
        })
        .collect();

    let dim = cfg.dim;
    let diff = |e: &[Vec<f64>], rl: &[Vec<f64>], (h, r, t): (usize, usize, usize)| -> Vec<f64> {
        (0..dim).map(|i| e[h][i] + rl[r][i] - e[t][i]).collect()
    };
    let mut order: Vec<usize> = (0..pos.len()).collect();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut ge: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            let mut gr = vec![vec![0.0; dim]; rel.len()];
            for &k in batch {
                let xp = diff(&ent, &rel, pos[k]);
                let xn = diff(&ent, &rel, neg[k]);
                let (dp, dn) = (l2(&xp), l2(&xn));
                let loss = cfg.margin + dp - dn;
                if loss <= 0.0 {
                    continue;
                }
                total += loss;
                let scale = 1.0 / batch.len() as f64;
                for (x, d, sign, (h, r, t)) in [(&xp, dp, 1.0, pos[k]), (&xn, dn, -1.0, neg[k])] {
                    if d < 1e-12 {
                        continue;
                    }
                    for i in 0..dim {
                        let g = sign * scale * x[i] / d;
                        ge.entry(h).or_insert_with(|| vec![0.0; dim])[i] += g;
                        ge.entry(t).or_insert_with(|| vec![0.0; dim])[i] -= g;
                        gr[r][i] += g;
                    }
                }
            }
            for (e, g) in ge {
                for i in 0..dim {
                    ent[e][i] -= cfg.lr * g[i];
                }
            }
            for (r, g) in gr.iter().enumerate() {
                for i in 0..dim {
                    rel[r][i] -= cfg.lr * g[i];
                }
            }
        }
        ent.iter_mut().for_each(|v| project_unit_ball(v));
        loss_trace.push(total / pos.len() as f64);
    }
    Ok(EmbeddingTable {
        dim,
        margin: cfg.margin,
        entities: names.into_iter().zip(ent).collect(),
        relations: RelationKind::ALL.into_iter().zip(rel).collect(),
        loss_trace,
    })
}

/// Two open questions on the most discriminating slots, then
/// recommendations in embedding-score order.
#[derive(Clone, Debug)]
pub struct TransEAgent {
    pub table: EmbeddingTable,
    pub questions: usize,
}

impl TransEAgent {
    pub fn new(table: EmbeddingTable) -> Self {
        Self { table, questions: 2 }
    }

    /// Mean of −‖e_item + r_HasAspect − e_v‖ over positively rated values;
    /// without any, −‖e_history + r_Visited − e_item‖.
    pub fn item_scores(&self, obs: &AgentObservation<'_>) -> BTreeMap<EntityId, f64> {
        let g = obs.graph;
        let liked: Vec<String> = g
            .sentiment_triples()
            .filter(|t| t.head == M_CUR_DIALOG && t.relation == RelationKind::PosOn && t.tail.kind == EntityKind::Value)
            .map(|t| entity_key(g, t.tail))
            .collect();
        let hist = entity_key(g, M_HISTORY);
        obs.masks
            .items
            .iter()
            .map(|e| {
                let ik = entity_key(g, *e);
                let s = if liked.is_empty() {
                    -self.table.distance(&hist, RelationKind::Visited, &ik)
                } else {
                    -liked
                        .iter()
                        .map(|v| self.table.distance(&ik, RelationKind::HasAspect, v))
                        .sum::<f64>()
                        / liked.len() as f64
                };
                (*e, s)
            })
            .collect()
    }

    /// Slots ordered by Gini impurity of their values across candidates.
    fn slot_order(&self, obs: &AgentObservation<'_>) -> Vec<EntityId> {
        let g = obs.graph;
        let mut scored: Vec<(f64, EntityId)> = obs
            .masks
            .slots
            .iter()
            .map(|s| {
                let mut counts: BTreeMap<Option<EntityId>, f64> = BTreeMap::new();
                let n = obs.masks.items.len() as f64;
                for it in &obs.masks.items {
                    let vs: Vec<EntityId> = g
                        .values_of(*it)
                        .into_iter()
                        .filter(|v| g.slot_of(*v) == Some(*s))
                        .collect();
                    if vs.is_empty() {
                        *counts.entry(None).or_default() += 1.0 / n;
                    } else {
                        for v in &vs {
                            *counts.entry(Some(*v)).or_default() += 1.0 / (n * vs.len() as f64);
                        }
                    }
                }
                (1.0 - counts.values().map(|p| p * p).sum::<f64>(), *s)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        scored.into_iter().map(|(_, s)| s).collect()
    }
}

impl Agent for TransEAgent {
    fn name(&self) -> &str {
        "transe"
    }

    fn act(&mut self, obs: &AgentObservation<'_>, _rng: &mut SimRng) -> Result<AgentDecision> {
        let g = obs.graph;
        let items = self.item_scores(obs);
        let mut policy = Policy {
            items: items.clone(),
            ..Policy::default()
        };
        let asked = obs
            .turns
            .iter()
            .filter(|a| a.agent_act() == Some(AgentAct::OpenQuestion))
            .count();
        if asked < self.questions {
            if let Some(slot) = self.slot_order(obs).get(asked) {
                policy.act_probs[AgentAct::OpenQuestion.index()] = 1.0;
                let action = DialogAction::open_question(g.slot_id(*slot).expect("slot entity"));
                return Ok(AgentDecision {
                    action,
                    policy: Some(policy),
                });
            }
        }
        let untried: BTreeMap<EntityId, f64> = items
            .iter()
            .filter(|(e, _)| g.item_id(**e).is_some_and(|i| !obs.tried_items.contains(&i)))
            .map(|(e, s)| (*e, *s))
            .collect();
        let pick = Policy::argmax(&untried)
            .or_else(|| Policy::argmax(&items))
            .ok_or_else(|| Error::DegeneratePolicy("no candidate items".into()))?;
        policy.act_probs[AgentAct::Recommendation.index()] = 1.0;
        Ok(AgentDecision {
            action: DialogAction::recommend(g.item_id(pick).expect("item entity")),
            policy: Some(policy),
        })
    }
}
