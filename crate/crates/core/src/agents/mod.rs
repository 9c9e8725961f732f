//! Agent interface and the non-neural agents.

mod oracle;
mod transe;

use std::collections::BTreeSet;

use rand::prelude::*;

use crate::dialog::{Act, AgentAct, DialogAction, Policy};
use crate::error::{Error, Result};
use crate::ids::ItemId;
use crate::memgraph::{EntityId, MemoryGraph, PolicyMasks};
use crate::simulator::SimRng;

pub use oracle::{OracleAgent, OracleConfig};
pub use transe::{entity_key, keyed_triples, train_transe, EmbeddingTable, TransEAgent, TransEConfig};

pub const MAX_ACT_HISTORY: usize = 10;

/// What an agent may see: the dialog so far and the memory graph. The
/// ground truth is never part of it.
#[derive(Clone, Debug)]
pub struct AgentObservation<'a> {
    pub turns: &'a [DialogAction],
    /// Up to the ten most recent acts, oldest first.
    pub act_history: Vec<Act>,
    pub graph: &'a MemoryGraph,
    pub masks: &'a PolicyMasks,
    pub tried_items: &'a BTreeSet<ItemId>,
}

impl<'a> AgentObservation<'a> {
    pub fn new(
        turns: &'a [DialogAction],
        graph: &'a MemoryGraph,
        masks: &'a PolicyMasks,
        tried_items: &'a BTreeSet<ItemId>,
    ) -> Self {
        let start = turns.len().saturating_sub(MAX_ACT_HISTORY);
        Self {
            turns,
            act_history: turns[start..].iter().map(|a| a.act).collect(),
            graph,
            masks,
            tried_items,
        }
    }

    pub fn agent_turns_so_far(&self) -> usize {
        self.turns.iter().filter(|a| a.agent_act().is_some()).count()
    }

    pub fn last_user(&self) -> Option<&DialogAction> {
        self.turns.iter().rev().find(|a| a.user_act().is_some())
    }

    /// Candidate items in mask order.
    pub fn candidates(&self) -> Vec<(EntityId, ItemId)> {
        self.masks
            .items
            .iter()
            .filter_map(|e| self.graph.item_id(*e).map(|i| (*e, i)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentDecision {
    pub action: DialogAction,
    /// Scores behind the action, for agents that rank entities.
    pub policy: Option<Policy>,
}

impl AgentDecision {
    pub fn plain(action: DialogAction) -> Self {
        Self { action, policy: None }
    }
}

pub trait Agent {
    fn name(&self) -> &str;

    /// Called before each episode.
    fn reset(&mut self) {}

    fn act(&mut self, obs: &AgentObservation<'_>, rng: &mut SimRng) -> Result<AgentDecision>;
}

pub const AGENT_NAMES: [&str; 5] = ["random", "rec", "oracle", "transe", "umgr"];

fn pick<T: Copy>(set: &BTreeSet<T>, rng: &mut SimRng) -> Option<T> {
    set.iter().copied().choose(rng)
}

/// Uniform act, uniform argument from the matching mask.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomAgent;

impl Agent for RandomAgent {
    fn name(&self) -> &str {
        "random"
    }

    fn act(&mut self, obs: &AgentObservation<'_>, rng: &mut SimRng) -> Result<AgentDecision> {
        let act = AgentAct::ALL[rng.gen_range(0..AgentAct::COUNT)];
        let g = obs.graph;
        let empty = || Error::DegeneratePolicy(format!("empty mask for {act:?}"));
        let action = match act {
            AgentAct::Greeting | AgentAct::Thanks => DialogAction::agent(act),
            AgentAct::Recommendation => {
                let e = pick(&obs.masks.items, rng).ok_or_else(empty)?;
                DialogAction::recommend(g.item_id(e).ok_or_else(empty)?)
            }
            AgentAct::OpenQuestion => {
                let e = pick(&obs.masks.slots, rng).ok_or_else(empty)?;
                DialogAction::open_question(g.slot_id(e).ok_or_else(empty)?)
            }
            AgentAct::YesNoQuestion | AgentAct::Answer => {
                let e = pick(&obs.masks.values, rng).ok_or_else(empty)?;
                let v = g.value_id(e).ok_or_else(empty)?;
                if act == AgentAct::Answer {
                    DialogAction::agent_answer(v)
                } else {
                    DialogAction::yes_no(v)
                }
            }
        };
        Ok(AgentDecision::plain(action))
    }
}

/// Recommends a uniformly random untried candidate every turn.
#[derive(Clone, Copy, Debug, Default)]
pub struct RecAgent;

impl Agent for RecAgent {
    fn name(&self) -> &str {
        "rec"
    }

    fn act(&mut self, obs: &AgentObservation<'_>, rng: &mut SimRng) -> Result<AgentDecision> {
        let all: Vec<ItemId> = obs.candidates().into_iter().map(|(_, i)| i).collect();
        let untried: Vec<ItemId> = all.iter().copied().filter(|i| !obs.tried_items.contains(i)).collect();
        let pool = if untried.is_empty() { &all } else { &untried };
        let item = *pool
            .choose(rng)
            .ok_or_else(|| Error::DegeneratePolicy("no candidate items".into()))?;
        Ok(AgentDecision::plain(DialogAction::recommend(item)))
    }
}
