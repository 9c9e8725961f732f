use super::model::UmgrModel;
use crate::agents::{Agent, AgentDecision, AgentObservation};
use crate::dialog::{policy_to_action, Act};
use crate::error::Result;
use crate::simulator::SimRng;

/// Greedy policy of a trained model.
#[derive(Clone, Debug)]
pub struct UmgrAgent {
    pub model: UmgrModel<f64>,
}

impl UmgrAgent {
    pub fn new(model: UmgrModel<f64>) -> Self {
        Self { model }
    }
}

impl Agent for UmgrAgent {
    fn name(&self) -> &str {
        "umgr"
    }

    fn act(&mut self, obs: &AgentObservation, _rng: &mut SimRng) -> Result<AgentDecision> {
        let acts: Vec<Act> = obs.turns.iter().map(|a| a.act).collect();
        let policy = if self.model.config.static_graph {
            let g = obs.graph.initial_view();
            self.model.predict_policy(&g, obs.masks, &acts)?
        } else {
            self.model.predict_policy(obs.graph, obs.masks, &acts)?
        };
        let action = policy_to_action(&policy, obs.graph)?;
        Ok(AgentDecision {
            action,
            policy: Some(policy),
        })
    }
}
