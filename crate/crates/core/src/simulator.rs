//! Passive user simulator and the episode runner pairing it with an agent.

use std::collections::BTreeSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentObservation};
use crate::catalog::Scenario;
use crate::dialog::{validate_action, AgentAct, Dialog, DialogAction, Policy, Sentiment, UserAct};
use crate::error::{Error, Result};
use crate::ids::{mix_seed, seed_for, ItemId};
use crate::memgraph::{EntityId, MemoryGraph, Observation, PolicyMasks};

pub type SimRng = ChaCha8Rng;

pub const MAX_TURNS: usize = 11;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatorConfig {
    /// Chance that an opening (or a non-success closing) is an Inform
    /// rather than a Greeting.
    pub inform_prob: f64,
    /// Attach a NegOn on the rejected item to the user's follow-up question.
    pub reject_observation: bool,
    pub max_turns: usize,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        Self {
            inform_prob: 0.2,
            reject_observation: true,
            max_turns: MAX_TURNS,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SimulatorState {
    pub success: bool,
    pub turns_used: usize,
    pub pending: Option<DialogAction>,
}

/// Which case of the user policy produced a response.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Branch {
    Init,
    RecommendHit,
    RecommendMiss,
    OpenQuestion,
    YesNoQuestion,
    AnswerValue,
    AnswerItem,
    ThanksAfterSuccess,
    ThanksWithoutSuccess,
    Greeting,
}

fn random_preferred(scenario: &Scenario, rng: &mut SimRng) -> Result<crate::ids::ValueId> {
    scenario
        .preferred_values()
        .choose(rng)
        .copied()
        .ok_or_else(|| Error::Protocol(format!("scenario {} has an empty preference", scenario.id)))
}

fn random_greet_inform(scenario: &Scenario, cfg: &SimulatorConfig, rng: &mut SimRng) -> Result<DialogAction> {
    if rng.gen::<f64>() < 1.0 - cfg.inform_prob {
        Ok(DialogAction::user(UserAct::Greeting))
    } else {
        let v = random_preferred(scenario, rng)?;
        Ok(DialogAction::user_on_value(UserAct::Inform, v, Sentiment::PosOn))
    }
}

/// One user utterance in response to `agent` (`None` opens the dialog).
pub fn user_respond(
    state: &mut SimulatorState,
    agent: Option<&DialogAction>,
    scenario: &Scenario,
    cfg: &SimulatorConfig,
    rng: &mut SimRng,
) -> Result<(DialogAction, Branch)> {
    let Some(a) = agent else {
        return Ok((random_greet_inform(scenario, cfg, rng)?, Branch::Init));
    };
    validate_action(a).map_err(|e| Error::Protocol(e.to_string()))?;
    let act = a
        .agent_act()
        .ok_or_else(|| Error::Protocol(format!("user cannot respond to {}", a.act)))?;
    state.pending = Some(*a);
    let missing = |f: &str| Error::Protocol(format!("agent {act:?} without {f}"));
    Ok(match act {
        AgentAct::Recommendation => {
            let item = a.item.ok_or_else(|| missing("item"))?;
            if scenario.is_ground_truth(item) {
                state.success = true;
                (DialogAction::reply(item, Sentiment::PosOn), Branch::RecommendHit)
            } else {
                let slots: Vec<_> = scenario.preference.keys().copied().collect();
                let slot = *slots
                    .choose(rng)
                    .ok_or_else(|| Error::Protocol("empty preference".into()))?;
                let mut oq = DialogAction {
                    slot: Some(slot),
                    ..DialogAction::user(UserAct::OpenQuestion)
                };
                if cfg.reject_observation {
                    oq.item = Some(item);
                    oq.sentiment = Some(Sentiment::NegOn);
                }
                (oq, Branch::RecommendMiss)
            }
        }
        AgentAct::OpenQuestion => {
            let slot = a.slot.ok_or_else(|| missing("slot"))?;
            let v = match scenario.preference.get(&slot) {
                Some(vs) => **vs
                    .iter()
                    .collect::<Vec<_>>()
                    .choose(rng)
                    .expect("non-empty slot preference"),
                None => random_preferred(scenario, rng)?,
            };
            (
                DialogAction::user_on_value(UserAct::Answer, v, Sentiment::PosOn),
                Branch::OpenQuestion,
            )
        }
        AgentAct::YesNoQuestion => {
            let v = a.value.ok_or_else(|| missing("value"))?;
            let s = if scenario.prefers(v) {
                Sentiment::PosOn
            } else {
                Sentiment::NegOn
            };
            (
                DialogAction::user_on_value(UserAct::Answer, v, s),
                Branch::YesNoQuestion,
            )
        }
        AgentAct::Answer => match a.value {
            Some(v) => {
                let s = if scenario.prefers(v) {
                    Sentiment::PosOn
                } else {
                    Sentiment::NegOn
                };
                (DialogAction::user_on_value(UserAct::Inform, v, s), Branch::AnswerValue)
            }
            None => {
                let v = random_preferred(scenario, rng)?;
                (
                    DialogAction::user_on_value(UserAct::Inform, v, Sentiment::PosOn),
                    Branch::AnswerItem,
                )
            }
        },
        AgentAct::Thanks => {
            if state.success {
                let t = DialogAction {
                    sentiment: Some(Sentiment::PosOn),
                    ..DialogAction::user(UserAct::Thanks)
                };
                (t, Branch::ThanksAfterSuccess)
            } else {
                (random_greet_inform(scenario, cfg, rng)?, Branch::ThanksWithoutSuccess)
            }
        }
        AgentAct::Greeting => (random_greet_inform(scenario, cfg, rng)?, Branch::Greeting),
    })
}

/// Graph update carried by a user turn, if any.
pub fn observation_of(action: &DialogAction, graph: &MemoryGraph) -> Result<Option<Observation>> {
    let Some(sentiment) = action.sentiment else {
        return Ok(None);
    };
    let target: Option<EntityId> = match (action.value, action.item) {
        (Some(v), _) => Some(graph.value_entity(v).ok_or_else(|| Error::Lookup(v.to_string()))?),
        (None, Some(i)) => Some(graph.item_entity(i).ok_or_else(|| Error::Lookup(i.to_string()))?),
        (None, None) => None,
    };
    Ok(target.map(|target| Observation { sentiment, target }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub dialog: Dialog,
    pub success: bool,
    pub n_turns: usize,
    /// Utterances up to and including the accepted reply.
    pub success_turn: Option<usize>,
    pub failure_reason: Option<String>,
    /// Top-1 item of the agent's policy at each agent turn, when it exposes one.
    pub top_items: Vec<Option<ItemId>>,
    pub branches: Vec<Branch>,
}

/// Live state shared by the episode runner and the interactive service.
#[derive(Clone, Debug)]
pub struct DialogState {
    pub graph: MemoryGraph,
    pub masks: PolicyMasks,
    pub dialog: Dialog,
    pub tried: BTreeSet<ItemId>,
}

impl DialogState {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let graph = MemoryGraph::build_initial(scenario)?;
        let masks = graph.policy_masks(scenario);
        Ok(Self {
            graph,
            masks,
            dialog: Dialog::new(scenario.id.clone()),
            tried: BTreeSet::new(),
        })
    }

    /// Appends a user turn and applies its sentiment to the graph.
    pub fn push_user(&mut self, action: DialogAction) -> Result<Option<Observation>> {
        validate_action(&action)?;
        let obs = observation_of(&action, &self.graph)?;
        if let Some(o) = obs {
            self.graph.apply_observation(o)?;
        }
        self.dialog.turns.push(action);
        Ok(obs)
    }

    pub fn push_agent(&mut self, action: DialogAction) -> Result<()> {
        validate_action(&action)?;
        if let Some(i) = action
            .item
            .filter(|_| action.agent_act() == Some(AgentAct::Recommendation))
        {
            self.tried.insert(i);
        }
        self.dialog.turns.push(action);
        Ok(())
    }

    pub fn observation(&self) -> AgentObservation<'_> {
        AgentObservation::new(&self.dialog.turns, &self.graph, &self.masks, &self.tried)
    }
}

/// Per-episode generator streams derived from the run seed and scenario id.
pub fn episode_rngs(seed: u64, scenario_id: &str) -> (SimRng, SimRng) {
    let s = seed_for(seed, scenario_id);
    (
        SimRng::seed_from_u64(mix_seed(s, 1)),
        SimRng::seed_from_u64(mix_seed(s, 2)),
    )
}

pub fn run_episode(
    agent: &mut dyn Agent,
    scenario: &Scenario,
    cfg: &SimulatorConfig,
    seed: u64,
) -> Result<EpisodeResult> {
    let (mut user_rng, mut agent_rng) = episode_rngs(seed, &scenario.id);
    let mut st = DialogState::new(scenario)?;
    let mut sim = SimulatorState::default();
    let mut success_turn = None;
    let mut failure_reason = None;
    let mut top_items = Vec::new();
    let mut branches = Vec::new();
    agent.reset();
    let mut last_agent: Option<DialogAction> = None;
    loop {
        let (user, branch) = user_respond(&mut sim, last_agent.as_ref(), scenario, cfg, &mut user_rng)?;
        branches.push(branch);
        st.push_user(user)?;
        sim.turns_used = st.dialog.turns.len();
        if branch == Branch::RecommendHit && success_turn.is_none() {
            success_turn = Some(st.dialog.turns.len());
        }
        if user.user_act() == Some(UserAct::Thanks) || st.dialog.turns.len() >= cfg.max_turns {
            break;
        }
        let decision = match agent.act(&st.observation(), &mut agent_rng) {
            Ok(d) => d,
            Err(e @ (Error::DegeneratePolicy(_) | Error::Shape(_) | Error::Lookup(_))) => {
                failure_reason = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        if let Err(e) = validate_action(&decision.action) {
            failure_reason = Some(e.to_string());
            break;
        }
        top_items.push(
            decision
                .policy
                .as_ref()
                .and_then(|p| Policy::argmax(&p.items))
                .and_then(|e| st.graph.item_id(e)),
        );
        st.push_agent(decision.action)?;
        last_agent = Some(decision.action);
        if st.dialog.turns.len() >= cfg.max_turns {
            break;
        }
    }
    st.dialog.success = sim.success;
    if !sim.success && failure_reason.is_none() {
        failure_reason = Some("ground truth never recommended".into());
    }
    Ok(EpisodeResult {
        n_turns: st.dialog.turns.len(),
        success: sim.success,
        dialog: st.dialog,
        success_turn,
        failure_reason,
        top_items,
        branches,
    })
}
