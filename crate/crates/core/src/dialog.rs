//! Structured dialog vocabulary: acts, arguments, sentiment, dialogs,
//! supervision labels, the corpus format and the policy→action decoder.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::ids::{ItemId, SlotId, ValueId};
use crate::jsonl;
use crate::memgraph::{EntityId, MemoryGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    User,
    Agent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UserAct {
    Greeting,
    Inform,
    Answer,
    Reply,
    OpenQuestion,
    YesNoQuestion,
    Thanks,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgentAct {
    Greeting,
    OpenQuestion,
    YesNoQuestion,
    Recommendation,
    Answer,
    Thanks,
}

impl UserAct {
    pub const ALL: [UserAct; 7] = [
        UserAct::Greeting,
        UserAct::Inform,
        UserAct::Answer,
        UserAct::Reply,
        UserAct::OpenQuestion,
        UserAct::YesNoQuestion,
        UserAct::Thanks,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl AgentAct {
    pub const ALL: [AgentAct; 6] = [
        AgentAct::Greeting,
        AgentAct::OpenQuestion,
        AgentAct::YesNoQuestion,
        AgentAct::Recommendation,
        AgentAct::Answer,
        AgentAct::Thanks,
    ];
    pub const COUNT: usize = 6;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Entity type the act's argument is ranked over, if any. Answer is
    /// decoded as answering about a value.
    pub fn argument_kind(self) -> Option<crate::memgraph::EntityKind> {
        use crate::memgraph::EntityKind;
        match self {
            AgentAct::Recommendation => Some(EntityKind::Item),
            AgentAct::OpenQuestion => Some(EntityKind::Slot),
            AgentAct::YesNoQuestion | AgentAct::Answer => Some(EntityKind::Value),
            AgentAct::Greeting | AgentAct::Thanks => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sentiment {
    PosOn,
    NegOn,
    NeuOn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Act {
    User(UserAct),
    Agent(AgentAct),
}

impl Act {
    pub fn role(self) -> Role {
        match self {
            Act::User(_) => Role::User,
            Act::Agent(_) => Role::Agent,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Act::User(a) => match a {
                UserAct::Greeting => "Greeting",
                UserAct::Inform => "Inform",
                UserAct::Answer => "Answer",
                UserAct::Reply => "Reply",
                UserAct::OpenQuestion => "OpenQuestion",
                UserAct::YesNoQuestion => "YesNoQuestion",
                UserAct::Thanks => "Thanks",
            },
            Act::Agent(a) => match a {
                AgentAct::Greeting => "Greeting",
                AgentAct::OpenQuestion => "OpenQuestion",
                AgentAct::YesNoQuestion => "YesNoQuestion",
                AgentAct::Recommendation => "Recommendation",
                AgentAct::Answer => "Answer",
                AgentAct::Thanks => "Thanks",
            },
        }
    }

    pub fn parse(role: Role, name: &str) -> Option<Self> {
        match role {
            Role::User => UserAct::ALL.into_iter().map(Act::User).find(|a| a.name() == name),
            Role::Agent => AgentAct::ALL.into_iter().map(Act::Agent).find(|a| a.name() == name),
        }
    }

    /// Token id for the act-history encoder; [`Act::INIT_TOKEN`] is the
    /// empty-history token.
    pub fn token(self) -> usize {
        match self {
            Act::User(a) => a.index(),
            Act::Agent(a) => UserAct::ALL.len() + a.index(),
        }
    }

    pub const INIT_TOKEN: usize = 13;
    pub const N_TOKENS: usize = 14;
}

impl fmt::Display for Act {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} {}", self.role(), self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Missing,
    Unexpected,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{act}: {problem:?} {field}")]
pub struct ShapeError {
    pub act: String,
    pub field: &'static str,
    pub problem: Problem,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ActionWire", into = "ActionWire")]
pub struct DialogAction {
    pub act: Act,
    pub item: Option<ItemId>,
    pub slot: Option<SlotId>,
    pub value: Option<ValueId>,
    pub sentiment: Option<Sentiment>,
}

#[derive(Serialize, Deserialize)]
struct ActionWire {
    role: Role,
    act: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    item: Option<ItemId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slot: Option<SlotId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<ValueId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sentiment: Option<Sentiment>,
}

impl TryFrom<ActionWire> for DialogAction {
    type Error = String;

    fn try_from(w: ActionWire) -> std::result::Result<Self, String> {
        let act = Act::parse(w.role, &w.act).ok_or_else(|| format!("unknown {:?} act {:?}", w.role, w.act))?;
        Ok(DialogAction {
            act,
            item: w.item,
            slot: w.slot,
            value: w.value,
            sentiment: w.sentiment,
        })
    }
}

impl From<DialogAction> for ActionWire {
    fn from(a: DialogAction) -> Self {
        ActionWire {
            role: a.act.role(),
            act: a.act.name().to_string(),
            item: a.item,
            slot: a.slot,
            value: a.value,
            sentiment: a.sentiment,
        }
    }
}

impl DialogAction {
    pub fn bare(act: Act) -> Self {
        Self {
            act,
            item: None,
            slot: None,
            value: None,
            sentiment: None,
        }
    }

    pub fn agent(act: AgentAct) -> Self {
        Self::bare(Act::Agent(act))
    }

    pub fn user(act: UserAct) -> Self {
        Self::bare(Act::User(act))
    }

    pub fn recommend(item: ItemId) -> Self {
        Self {
            item: Some(item),
            ..Self::agent(AgentAct::Recommendation)
        }
    }

    pub fn open_question(slot: SlotId) -> Self {
        Self {
            slot: Some(slot),
            ..Self::agent(AgentAct::OpenQuestion)
        }
    }

    pub fn yes_no(value: ValueId) -> Self {
        Self {
            value: Some(value),
            ..Self::agent(AgentAct::YesNoQuestion)
        }
    }

    pub fn agent_answer(value: ValueId) -> Self {
        Self {
            value: Some(value),
            ..Self::agent(AgentAct::Answer)
        }
    }

    /// User act carrying `(value, sentiment)`.
    pub fn user_on_value(act: UserAct, value: ValueId, sentiment: Sentiment) -> Self {
        Self {
            value: Some(value),
            sentiment: Some(sentiment),
            ..Self::user(act)
        }
    }

    pub fn reply(item: ItemId, sentiment: Sentiment) -> Self {
        Self {
            item: Some(item),
            sentiment: Some(sentiment),
            ..Self::user(UserAct::Reply)
        }
    }

    pub fn role(&self) -> Role {
        self.act.role()
    }

    pub fn agent_act(&self) -> Option<AgentAct> {
        match self.act {
            Act::Agent(a) => Some(a),
            Act::User(_) => None,
        }
    }

    pub fn user_act(&self) -> Option<UserAct> {
        match self.act {
            Act::User(a) => Some(a),
            Act::Agent(_) => None,
        }
    }
}

/// Accepts iff the action's arguments fit its act.
pub fn validate_action(a: &DialogAction) -> Result<(), ShapeError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Need {
        No,
        Yes,
        Maybe,
    }
    use Need::*;
    let err = |field, problem| ShapeError {
        act: a.act.to_string(),
        field,
        problem,
    };
    let check = |field: &'static str, present: bool, need: Need| -> Result<(), ShapeError> {
        match (need, present) {
            (Yes, false) => Err(err(field, Problem::Missing)),
            (No, true) => Err(err(field, Problem::Unexpected)),
            _ => Ok(()),
        }
    };
    // "exactly one of item/value" acts
    let one_target = |sent: Need| -> Result<(), ShapeError> {
        check("slot", a.slot.is_some(), No)?;
        match (a.item.is_some(), a.value.is_some()) {
            (false, false) => return Err(err("value", Problem::Missing)),
            (true, true) => return Err(err("item", Problem::Unexpected)),
            _ => {}
        }
        check("sentiment", a.sentiment.is_some(), sent)
    };
    let (item, slot, value, sentiment) = match a.act {
        Act::Agent(AgentAct::Greeting | AgentAct::Thanks) => (No, No, No, No),
        Act::Agent(AgentAct::Recommendation) => (Yes, No, No, No),
        Act::Agent(AgentAct::OpenQuestion) => (No, Yes, No, No),
        Act::Agent(AgentAct::YesNoQuestion) => (No, No, Yes, No),
        Act::Agent(AgentAct::Answer) => return one_target(No),
        Act::User(UserAct::Greeting) => (No, No, No, No),
        Act::User(UserAct::Thanks) => (No, No, No, Maybe),
        Act::User(UserAct::Inform | UserAct::Answer) => return one_target(Yes),
        Act::User(UserAct::Reply) => (Yes, No, No, Yes),
        Act::User(UserAct::OpenQuestion) => {
            check("slot", a.slot.is_some(), Yes)?;
            check("value", a.value.is_some(), No)?;
            // Optional rejection of the previous recommendation.
            return match (a.item.is_some(), a.sentiment.is_some()) {
                (true, false) => Err(err("sentiment", Problem::Missing)),
                (false, true) => Err(err("item", Problem::Missing)),
                _ => Ok(()),
            };
        }
        Act::User(UserAct::YesNoQuestion) => (No, No, Yes, No),
    };
    check("item", a.item.is_some(), item)?;
    check("slot", a.slot.is_some(), slot)?;
    check("value", a.value.is_some(), value)?;
    check("sentiment", a.sentiment.is_some(), sentiment)
}

/// Gold arguments for one agent turn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolicyLabels {
    pub act: AgentAct,
    pub item: Option<ItemId>,
    pub slot: Option<SlotId>,
    pub value: Option<ValueId>,
}

impl PolicyLabels {
    pub fn from_action(a: &DialogAction) -> Result<Self> {
        let act = a
            .agent_act()
            .ok_or_else(|| Error::Label(format!("{} is not an agent act", a.act)))?;
        validate_action(a)?;
        Ok(Self {
            act,
            item: a.item,
            slot: a.slot,
            value: a.value,
        })
    }

    pub fn to_action(self) -> DialogAction {
        DialogAction {
            act: Act::Agent(self.act),
            item: self.item,
            slot: self.slot,
            value: self.value,
            sentiment: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialog {
    pub scenario_id: String,
    pub success: bool,
    pub turns: Vec<DialogAction>,
}

impl Dialog {
    pub fn new(scenario_id: impl Into<String>) -> Self {
        Self {
            scenario_id: scenario_id.into(),
            success: false,
            turns: Vec::new(),
        }
    }

    pub fn agent_turn_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.turns
            .iter()
            .enumerate()
            .filter(|(_, a)| a.role() == Role::Agent)
            .map(|(i, _)| i)
    }

    /// Roles alternate from the user, every action is shape-valid, the
    /// length is capped and success is witnessed by an accepted
    /// recommendation.
    pub fn validate(&self, max_turns: usize, ground_truth: Option<&[ItemId]>) -> Result<()> {
        if self.turns.len() > max_turns {
            return Err(Error::Protocol(format!(
                "{} turns exceed cap {max_turns}",
                self.turns.len()
            )));
        }
        for (i, a) in self.turns.iter().enumerate() {
            let want = if i % 2 == 0 { Role::User } else { Role::Agent };
            if a.role() != want {
                return Err(Error::Protocol(format!("turn {i} should be {want:?}")));
            }
            validate_action(a)?;
        }
        if self.success && !self.has_accepted_recommendation(ground_truth) {
            return Err(Error::Protocol("success without an accepted recommendation".into()));
        }
        Ok(())
    }

    /// An agent recommendation followed directly by a PosOn reply on the
    /// same item (restricted to `ground_truth` when given).
    pub fn has_accepted_recommendation(&self, ground_truth: Option<&[ItemId]>) -> bool {
        self.turns.windows(2).any(|w| {
            w[0].agent_act() == Some(AgentAct::Recommendation)
                && w[1].user_act() == Some(UserAct::Reply)
                && w[1].sentiment == Some(Sentiment::PosOn)
                && w[0].item == w[1].item
                && w[0]
                    .item
                    .is_some_and(|i| ground_truth.map(|t| t.contains(&i)).unwrap_or(true))
        })
    }
}

pub fn write_corpus<'a>(dialogs: impl IntoIterator<Item = &'a Dialog>, path: &Path) -> Result<()> {
    jsonl::write(path, dialogs)
}

pub fn read_corpus(path: &Path) -> Result<Vec<Dialog>> {
    jsonl::read_with(path, |d: &Dialog| {
        for a in &d.turns {
            validate_action(a).map_err(|e| e.to_string())?;
        }
        Ok(())
    })
}

/// Act distribution plus scores over masked-in entities.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub act_probs: [f64; 6],
    pub items: BTreeMap<EntityId, f64>,
    pub slots: BTreeMap<EntityId, f64>,
    pub values: BTreeMap<EntityId, f64>,
}

impl Policy {
    pub fn scores(&self, kind: crate::memgraph::EntityKind) -> Option<&BTreeMap<EntityId, f64>> {
        use crate::memgraph::EntityKind;
        match kind {
            EntityKind::Item => Some(&self.items),
            EntityKind::Slot => Some(&self.slots),
            EntityKind::Value => Some(&self.values),
            _ => None,
        }
    }

    pub fn best_act(&self) -> AgentAct {
        let mut best = 0;
        for i in 1..AgentAct::COUNT {
            if self.act_probs[i] > self.act_probs[best] {
                best = i;
            }
        }
        AgentAct::ALL[best]
    }

    /// Entities sorted by descending score, ties by id.
    pub fn ranked(scores: &BTreeMap<EntityId, f64>) -> Vec<(EntityId, f64)> {
        let mut v: Vec<(EntityId, f64)> = scores.iter().map(|(e, s)| (*e, *s)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }

    pub fn top_k(scores: &BTreeMap<EntityId, f64>, k: usize) -> Vec<EntityId> {
        Self::ranked(scores).into_iter().take(k).map(|(e, _)| e).collect()
    }

    pub fn argmax(scores: &BTreeMap<EntityId, f64>) -> Option<EntityId> {
        Self::top_k(scores, 1).first().copied()
    }
}

/// Argmax act, then argmax argument over the act's score table.
pub fn policy_to_action(policy: &Policy, graph: &MemoryGraph) -> Result<DialogAction> {
    let act = policy.best_act();
    let Some(kind) = act.argument_kind() else {
        return Ok(DialogAction::agent(act));
    };
    let scores = policy.scores(kind).expect("argument kinds have scores");
    let e = Policy::argmax(scores)
        .ok_or_else(|| Error::DegeneratePolicy(format!("no {} to fill {act:?}", kind.as_str())))?;
    let missing = || Error::Lookup(e.to_string());
    Ok(match act {
        AgentAct::Recommendation => DialogAction::recommend(graph.item_id(e).ok_or_else(missing)?),
        AgentAct::OpenQuestion => DialogAction::open_question(graph.slot_id(e).ok_or_else(missing)?),
        AgentAct::YesNoQuestion => DialogAction::yes_no(graph.value_id(e).ok_or_else(missing)?),
        AgentAct::Answer => DialogAction::agent_answer(graph.value_id(e).ok_or_else(missing)?),
        AgentAct::Greeting | AgentAct::Thanks => unreachable!("no argument"),
    })
}
