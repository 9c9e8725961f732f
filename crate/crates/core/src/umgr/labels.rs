//! Turning logged dialogs into supervised decision points.

use std::collections::HashMap;

use super::config::UmgrConfig;
use super::model::{GraphInput, LabelTargets};
use crate::catalog::Scenario;
use crate::dialog::{Act, Dialog, PolicyLabels, Role};
use crate::error::{Error, Result};
use crate::memgraph::{MemoryGraph, PolicyMasks};
use crate::simulator::DialogState;

/// What the agent saw before turn `turn`, and what it then did.
#[derive(Clone, Debug)]
pub struct LabelledTurn {
    pub turn: usize,
    pub graph: MemoryGraph,
    pub masks: PolicyMasks,
    pub acts: Vec<Act>,
    pub labels: PolicyLabels,
}

fn replay(dialog: &Dialog, scenario: &Scenario, upto: usize) -> Result<DialogState> {
    let mut st = DialogState::new(scenario)?;
    for a in &dialog.turns[..upto] {
        match a.role() {
            Role::User => {
                st.push_user(*a)?;
            }
            Role::Agent => st.push_agent(*a)?,
        }
    }
    Ok(st)
}

fn snapshot(
    st: &DialogState,
    turn: usize,
    action: &crate::dialog::DialogAction,
    static_graph: bool,
) -> Result<LabelledTurn> {
    let graph = if static_graph {
        st.graph.initial_view()
    } else {
        st.graph.clone()
    };
    Ok(LabelledTurn {
        turn,
        graph,
        masks: st.masks.clone(),
        acts: st.dialog.turns.iter().map(|a| a.act).collect(),
        labels: PolicyLabels::from_action(action)?,
    })
}

/// Replays `dialog` up to agent turn `turn` and reads off the labels.
pub fn derive_labels(dialog: &Dialog, scenario: &Scenario, turn: usize, static_graph: bool) -> Result<LabelledTurn> {
    let action = dialog
        .turns
        .get(turn)
        .ok_or_else(|| Error::Label(format!("turn {turn} out of range")))?;
    if action.role() != Role::Agent {
        return Err(Error::NotAgentTurn(turn));
    }
    let st = replay(dialog, scenario, turn)?;
    snapshot(&st, turn, action, static_graph)
}

/// Every agent turn of a dialog, in one replay.
pub fn labelled_turns(dialog: &Dialog, scenario: &Scenario, static_graph: bool) -> Result<Vec<LabelledTurn>> {
    let mut st = DialogState::new(scenario)?;
    let mut out = Vec::new();
    for (i, a) in dialog.turns.iter().enumerate() {
        match a.role() {
            Role::User => {
                st.push_user(*a)?;
            }
            Role::Agent => {
                out.push(snapshot(&st, i, a, static_graph)?);
                st.push_agent(*a)?;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct Example {
    pub scenario_id: String,
    pub turn: usize,
    pub input: GraphInput,
    pub targets: LabelTargets,
}

impl Example {
    pub fn new(scenario_id: &str, t: &LabelledTurn, cfg: &UmgrConfig) -> Result<Self> {
        Ok(Self {
            scenario_id: scenario_id.to_string(),
            turn: t.turn,
            input: GraphInput::new(&t.graph, &t.masks, &t.acts, cfg),
            targets: LabelTargets::new(&t.labels, &t.graph, &t.masks)?,
        })
    }
}

/// Supervised examples from a corpus; every dialog must name a known scenario.
pub fn build_examples<'a>(
    dialogs: &[Dialog],
    scenarios: impl IntoIterator<Item = &'a Scenario>,
    cfg: &UmgrConfig,
) -> Result<Vec<Example>> {
    let by_id: HashMap<&str, &Scenario> = scenarios.into_iter().map(|s| (s.id.as_str(), s)).collect();
    let mut out = Vec::new();
    for d in dialogs {
        let s = by_id
            .get(d.scenario_id.as_str())
            .ok_or_else(|| Error::Lookup(format!("scenario {}", d.scenario_id)))?;
        for t in labelled_turns(d, s, cfg.static_graph)? {
            out.push(Example::new(&d.scenario_id, &t, cfg)?);
        }
    }
    Ok(out)
}
