//! Teacher agent for self-play corpora. It sees only what any agent sees
//! (candidates, history and the user's stated opinions) and narrows the
//! consistent candidate set by greedy expected entropy reduction.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Agent, AgentDecision, AgentObservation};
use crate::dialog::{AgentAct, DialogAction, Sentiment, UserAct};
use crate::error::{Error, Result};
use crate::ids::ItemId;
use crate::memgraph::{Direction, EntityId, EntityKind, MemoryGraph, RelationKind, M_CUR_DIALOG, M_HISTORY};
use crate::simulator::{SimRng, MAX_TURNS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Recommend once at most this many candidates stay consistent.
    pub recommend_at: usize,
    /// Utterance cap the teacher plans against.
    pub max_turns: usize,
    /// Confirm with a yes/no question when history backs the value.
    pub use_history: bool,
    /// A yes/no question must gain at least this share of the best open
    /// question's expected information.
    pub yes_no_min_ratio: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            recommend_at: 2,
            max_turns: MAX_TURNS,
            use_history: true,
            yes_no_min_ratio: 0.3,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct OracleAgent {
    pub config: OracleConfig,
}

/// Opinions stated so far in the dialog.
#[derive(Clone, Debug, Default)]
pub(crate) struct Beliefs {
    pub pos_values: BTreeSet<EntityId>,
    pub neg_values: BTreeSet<EntityId>,
    pub neg_items: BTreeSet<EntityId>,
    /// Slots the target has no value in: asked, and answered elsewhere.
    pub absent_slots: BTreeSet<EntityId>,
}

impl Beliefs {
    pub fn read(g: &MemoryGraph) -> Self {
        let mut b = Self::default();
        for t in g.sentiment_triples().filter(|t| t.head == M_CUR_DIALOG) {
            match (t.relation, t.tail.kind) {
                (RelationKind::PosOn, EntityKind::Value) => {
                    b.pos_values.insert(t.tail);
                }
                (RelationKind::NegOn, EntityKind::Value) => {
                    b.neg_values.insert(t.tail);
                }
                (RelationKind::NegOn, EntityKind::Item) => {
                    b.neg_items.insert(t.tail);
                }
                _ => {}
            }
        }
        b
    }

    /// Adds what the exchanges reveal beyond the graph: an open question
    /// answered with a value of another slot means the slot is empty.
    pub fn read_turns(mut self, g: &MemoryGraph, turns: &[DialogAction]) -> Self {
        for w in turns.windows(2) {
            let (a, u) = (&w[0], &w[1]);
            if a.agent_act() != Some(AgentAct::OpenQuestion) || u.user_act() != Some(UserAct::Answer) {
                continue;
            }
            let asked = a.slot.and_then(|x| g.slot_entity(x));
            let answered = u.value.and_then(|v| g.value_entity(v)).and_then(|v| g.slot_of(v));
            if let (Some(x), Some(y)) = (asked, answered) {
                if x != y {
                    self.absent_slots.insert(x);
                }
            }
        }
        self
    }

    pub fn admits(&self, g: &MemoryGraph, item: EntityId, values: &BTreeSet<EntityId>) -> bool {
        !self.neg_items.contains(&item)
            && self.pos_values.is_subset(values)
            && self.neg_values.is_disjoint(values)
            && !values
                .iter()
                .any(|v| g.slot_of(*v).is_some_and(|x| self.absent_slots.contains(&x)))
    }
}

fn log2(n: usize) -> f64 {
    (n.max(1) as f64).log2()
}

/// Expected bits gained by an open question on `slot` over `s`. A target
/// with values in the slot names one of them uniformly; a target without
/// any reveals only that.
fn open_question_gain(
    g: &MemoryGraph,
    s: &[EntityId],
    values: &BTreeMap<EntityId, BTreeSet<EntityId>>,
    slot: EntityId,
) -> f64 {
    let n = s.len() as f64;
    let in_slot = |c: &EntityId| -> Vec<EntityId> {
        values[c]
            .iter()
            .copied()
            .filter(|v| g.slot_of(*v) == Some(slot))
            .collect()
    };
    let mut p_answer: BTreeMap<EntityId, f64> = BTreeMap::new();
    let mut lacking = 0usize;
    for c in s {
        let pool = in_slot(c);
        if pool.is_empty() {
            lacking += 1;
        }
        for v in &pool {
            *p_answer.entry(*v).or_default() += 1.0 / (n * pool.len() as f64);
        }
    }
    let expected: f64 = p_answer
        .iter()
        .map(|(v, p)| p * log2(s.iter().filter(|c| values[*c].contains(v)).count()))
        .sum::<f64>()
        + lacking as f64 / n * log2(lacking);
    log2(s.len()) - expected
}

fn yes_no_gain(s: &[EntityId], values: &BTreeMap<EntityId, BTreeSet<EntityId>>, v: EntityId) -> f64 {
    let k = s.iter().filter(|c| values[*c].contains(&v)).count();
    let n = s.len();
    if k == 0 || k == n {
        return 0.0;
    }
    let p = k as f64 / n as f64;
    log2(n) - (p * log2(k) + (1.0 - p) * log2(n - k))
}

impl OracleAgent {
    pub fn new(config: OracleConfig) -> Self {
        Self { config }
    }

    fn decide(&self, obs: &AgentObservation<'_>) -> Result<DialogAction> {
        let g = obs.graph;
        if obs.agent_turns_so_far() == 0 {
            return Ok(DialogAction::agent(AgentAct::Greeting));
        }
        if let Some(u) = obs.last_user() {
            if u.user_act() == Some(UserAct::Reply) && u.sentiment == Some(Sentiment::PosOn) {
                return Ok(DialogAction::agent(AgentAct::Thanks));
            }
        }
        let cands = obs.candidates();
        if cands.is_empty() {
            return Err(Error::DegeneratePolicy("no candidate items".into()));
        }
        let values: BTreeMap<EntityId, BTreeSet<EntityId>> = cands
            .iter()
            .map(|(e, _)| (*e, g.values_of(*e).into_iter().collect()))
            .collect();
        let beliefs = Beliefs::read(g).read_turns(g, obs.turns);
        let untried: Vec<(EntityId, ItemId)> = cands
            .iter()
            .copied()
            .filter(|(_, i)| !obs.tried_items.contains(i))
            .collect();
        let consistent: Vec<EntityId> = untried
            .iter()
            .filter(|(e, _)| beliefs.admits(g, *e, &values[e]))
            .map(|(e, _)| *e)
            .collect();

        let history_values: BTreeMap<EntityId, usize> = {
            let mut m = BTreeMap::new();
            for h in g.neighbors(M_HISTORY, RelationKind::Visited, Direction::Out)? {
                for v in g.values_of(h) {
                    *m.entry(v).or_default() += 1;
                }
            }
            m
        };
        let rank_key = |e: &EntityId| {
            let vs = &values[e];
            let matched = beliefs.pos_values.intersection(vs).count();
            let from_history: usize = vs.iter().map(|v| history_values.get(v).copied().unwrap_or(0)).sum();
            (std::cmp::Reverse(matched), std::cmp::Reverse(from_history), *e)
        };
        let recommend = |pool: &[EntityId]| -> Result<DialogAction> {
            let best = pool
                .iter()
                .min_by_key(|e| rank_key(e))
                .or_else(|| untried.iter().map(|(e, _)| e).min_by_key(|e| rank_key(e)))
                .or_else(|| cands.iter().map(|(e, _)| e).min_by_key(|e| rank_key(e)))
                .expect("candidates non-empty");
            Ok(DialogAction::recommend(g.item_id(*best).expect("item entity")))
        };

        let agent_turns_left = (self.config.max_turns / 2).saturating_sub(obs.agent_turns_so_far());
        if consistent.len() <= self.config.recommend_at || consistent.len() <= agent_turns_left || agent_turns_left <= 1
        {
            return recommend(&consistent);
        }

        // The user just asked about an attribute of a rejected item: answer
        // when that value still splits the consistent set.
        if let Some(u) = obs.last_user() {
            if let (Some(UserAct::OpenQuestion), Some(slot), Some(item)) = (u.user_act(), u.slot, u.item) {
                if let (Some(se), Some(ie)) = (g.slot_entity(slot), g.item_entity(item)) {
                    let answer = g
                        .values_of(ie)
                        .into_iter()
                        .filter(|v| g.slot_of(*v) == Some(se))
                        .find(|v| yes_no_gain(&consistent, &values, *v) > 0.0);
                    if let Some(v) = answer {
                        return Ok(DialogAction::agent_answer(g.value_id(v).expect("value entity")));
                    }
                }
            }
        }

        let asked: BTreeSet<EntityId> = obs
            .turns
            .iter()
            .filter(|a| a.agent_act() == Some(AgentAct::OpenQuestion))
            .filter_map(|a| a.slot.and_then(|s| g.slot_entity(s)))
            .chain(beliefs.pos_values.iter().filter_map(|v| g.slot_of(*v)))
            .collect();
        let mut best: Option<(f64, EntityId)> = None;
        for slot in obs.masks.slots.iter().filter(|s| !asked.contains(s)) {
            let gain = open_question_gain(g, &consistent, &values, *slot);
            if gain > 1e-12 && best.is_none_or(|(b, _)| gain > b + 1e-12) {
                best = Some((gain, *slot));
            }
        }
        let Some((oq_gain, slot)) = best else {
            return recommend(&consistent);
        };
        if self.config.use_history && !history_values.is_empty() {
            let mut counts: BTreeMap<EntityId, usize> = BTreeMap::new();
            for c in &consistent {
                for v in values[c].iter().filter(|v| g.slot_of(**v) == Some(slot)) {
                    *counts.entry(*v).or_default() += 1;
                }
            }
            let majority = counts
                .iter()
                .filter(|(v, _)| yes_no_gain(&consistent, &values, **v) > 0.0)
                .max_by_key(|(v, n)| (**n, std::cmp::Reverse(**v)))
                .map(|(v, _)| *v);
            let worth = |v: &EntityId| {
                history_values.contains_key(v)
                    && yes_no_gain(&consistent, &values, *v) >= self.config.yes_no_min_ratio * oq_gain
            };
            if let Some(v) = majority.filter(worth) {
                return Ok(DialogAction::yes_no(g.value_id(v).expect("value entity")));
            }
        }
        Ok(DialogAction::open_question(g.slot_id(slot).expect("slot entity")))
    }
}

impl Agent for OracleAgent {
    fn name(&self) -> &str {
        "oracle"
    }

    fn act(&mut self, obs: &AgentObservation<'_>, _rng: &mut SimRng) -> Result<AgentDecision> {
        Ok(AgentDecision::plain(self.decide(obs)?))
    }
}
