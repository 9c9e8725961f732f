//! Live sessions in which a person plays the user against an agent.
//!
//! Transport-free: the HTTP server and the terminal chat both drive
//! [`SessionHub`].

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::agents::{
    Agent, EmbeddingTable, OracleAgent, OracleConfig, RandomAgent, RecAgent, TransEAgent, AGENT_NAMES,
};
use crate::catalog::{generate_scenario, Catalog, Scenario};
use crate::dialog::{AgentAct, DialogAction, Policy, Sentiment, UserAct};
use crate::error::{Error, Result};
use crate::ids::{seed_for, ItemId, SlotId, ValueId};
use crate::memgraph::{EntityId, EntityKind, GraphJson, Triple};
use crate::simulator::{DialogState, SimRng, MAX_TURNS};
use crate::umgr::{UmgrAgent, UmgrModel};

pub const EXPLANATION_HOPS: usize = 6;
const POLICY_TOP_K: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionStatus {
    Open,
    Succeeded,
    Ended,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioSource {
    Generate { seed: u64, with_history: bool },
    ScenarioId { id: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateSession {
    pub agent: String,
    pub scenario: ScenarioSource,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Named<I> {
    pub id: I,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueEntry {
    pub id: ValueId,
    pub name: String,
    pub slot: SlotId,
}

/// What the person may pick from; entities are exactly the policy masks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Menus {
    pub acts: Vec<UserAct>,
    pub sentiments: Vec<Sentiment>,
    pub items: Vec<Named<ItemId>>,
    pub slots: Vec<Named<SlotId>>,
    pub values: Vec<ValueEntry>,
}

/// The target the person is asked to steer towards.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub items: Vec<Named<ItemId>>,
    pub preferences: Vec<ValueEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub agent: String,
    pub scenario_id: String,
    pub status: SessionStatus,
    pub graph_version: usize,
    pub transcript: Vec<DialogAction>,
    pub history: Vec<Named<ItemId>>,
    pub goal: Goal,
    pub menus: Menus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub entity: EntityId,
    pub name: String,
    pub score: f64,
}

/// Act distribution and the top entities of each argument type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicySnapshot {
    pub acts: BTreeMap<String, f64>,
    pub items: Vec<Scored>,
    pub slots: Vec<Scored>,
    pub values: Vec<Scored>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnResponse {
    pub agent_action: Option<DialogAction>,
    pub policy: Option<PolicySnapshot>,
    /// Triples added by this exchange.
    pub graph_delta: Vec<Triple>,
    pub explanations: Vec<String>,
    pub status: SessionStatus,
    pub graph_version: usize,
}

/// Candidate scores at one agent turn; `None` for agents without scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SalienceRow {
    pub turn: usize,
    pub scores: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Salience {
    pub items: Vec<Named<ItemId>>,
    pub rows: Vec<SalienceRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationView {
    pub item: ItemId,
    pub paths: Vec<String>,
}

/// Shared, read-only models the agents are built from.
#[derive(Clone, Default)]
pub struct AgentResources {
    pub umgr: Option<Arc<UmgrModel<f64>>>,
    pub transe: Option<Arc<EmbeddingTable>>,
}

pub fn make_agent(name: &str, res: &AgentResources) -> Result<Box<dyn Agent + Send>> {
    Ok(match name {
        "random" => Box::new(RandomAgent),
        "rec" => Box::new(RecAgent),
        "oracle" => Box::new(OracleAgent::new(OracleConfig::default())),
        "transe" => {
            let t = res
                .transe
                .as_ref()
                .ok_or_else(|| Error::Session("agent transe needs an embedding table".into()))?;
            Box::new(TransEAgent::new((**t).clone()))
        }
        "umgr" => {
            let m = res
                .umgr
                .as_ref()
                .ok_or_else(|| Error::Session("agent umgr needs a checkpoint".into()))?;
            Box::new(UmgrAgent::new((**m).clone()))
        }
        other => {
            return Err(Error::Session(format!(
                "unknown agent {other:?}; expected one of {}",
                AGENT_NAMES.join(", ")
            )))
        }
    })
}

pub struct Session {
    pub id: String,
    pub agent_name: String,
    pub scenario: Scenario,
    pub status: SessionStatus,
    state: DialogState,
    agent: Box<dyn Agent + Send>,
    rng: SimRng,
    salience: Vec<SalienceRow>,
    last_policy: Option<PolicySnapshot>,
}

impl Session {
    pub fn new(id: String, agent_name: &str, scenario: Scenario, res: &AgentResources) -> Result<Self> {
        let agent = make_agent(agent_name, res)?;
        let state = DialogState::new(&scenario)?;
        Ok(Self {
            rng: SimRng::seed_from_u64(seed_for(0, &id)),
            id,
            agent_name: agent_name.to_string(),
            scenario,
            status: SessionStatus::Open,
            state,
            agent,
            salience: Vec::new(),
            last_policy: None,
        })
    }

    pub fn graph_version(&self) -> usize {
        self.state.graph.triples().len()
    }

    pub fn state(&self) -> &DialogState {
        &self.state
    }

    fn named_item(&self, i: ItemId) -> Named<ItemId> {
        let name = self
            .scenario
            .items
            .get(&i)
            .map(|x| x.name.clone())
            .unwrap_or_else(|| i.to_string());
        Named { id: i, name }
    }

    fn value_entry(&self, v: ValueId) -> Option<ValueEntry> {
        self.scenario.values.get(&v).map(|x| ValueEntry {
            id: v,
            name: x.name.clone(),
            slot: x.slot,
        })
    }

    pub fn menus(&self) -> Menus {
        let g = &self.state.graph;
        let m = &self.state.masks;
        Menus {
            acts: UserAct::ALL.to_vec(),
            sentiments: vec![Sentiment::PosOn, Sentiment::NegOn, Sentiment::NeuOn],
            items: m
                .items
                .iter()
                .filter_map(|e| g.item_id(*e))
                .map(|i| self.named_item(i))
                .collect(),
            slots: m
                .slots
                .iter()
                .filter_map(|e| {
                    g.slot_id(*e).map(|s| Named {
                        id: s,
                        name: g.describe(*e),
                    })
                })
                .collect(),
            values: m
                .values
                .iter()
                .filter_map(|e| g.value_id(*e))
                .filter_map(|v| self.value_entry(v))
                .collect(),
        }
    }

    pub fn view(&self) -> SessionView {
        let s = &self.scenario;
        SessionView {
            session_id: self.id.clone(),
            agent: self.agent_name.clone(),
            scenario_id: s.id.clone(),
            status: self.status,
            graph_version: self.graph_version(),
            transcript: self.state.dialog.turns.clone(),
            history: s.history.iter().map(|i| self.named_item(*i)).collect(),
            goal: Goal {
                items: s.ground_truth.iter().map(|i| self.named_item(*i)).collect(),
                preferences: s
                    .preferred_values()
                    .into_iter()
                    .filter_map(|v| self.value_entry(v))
                    .collect(),
            },
            menus: self.menus(),
        }
    }

    fn check_menu(&self, a: &DialogAction) -> Result<()> {
        let g = &self.state.graph;
        let m = &self.state.masks;
        let in_mask = |e: Option<EntityId>| e.is_some_and(|e| m.contains(e));
        if let Some(i) = a.item {
            if !in_mask(g.item_entity(i)) {
                return Err(Error::Session(format!("item {i} is not on the menu")));
            }
        }
        if let Some(s) = a.slot {
            if !in_mask(g.slot_entity(s)) {
                return Err(Error::Session(format!("slot {s} is not on the menu")));
            }
        }
        if let Some(v) = a.value {
            if !in_mask(g.value_entity(v)) {
                return Err(Error::Session(format!("value {v} is not on the menu")));
            }
        }
        Ok(())
    }

    /// Applies the person's turn, then lets the agent answer unless the
    /// dialog has just finished.
    pub fn post_user_turn(&mut self, action: DialogAction) -> Result<TurnResponse> {
        if self.status != SessionStatus::Open {
            return Err(Error::Session(format!("session {} is {:?}", self.id, self.status)));
        }
        if action.user_act().is_none() {
            return Err(Error::Session("turn must be a user act".into()));
        }
        crate::dialog::validate_action(&action)?;
        self.check_menu(&action)?;
        let before = self.graph_version();
        self.state.push_user(action)?;
        let accepted = self
            .state
            .dialog
            .has_accepted_recommendation(Some(&self.scenario.ground_truth));
        if accepted {
            self.state.dialog.success = true;
        }
        let n = self.state.dialog.turns.len();
        let finished = action.user_act() == Some(UserAct::Thanks) || n >= MAX_TURNS;
        let mut agent_action = None;
        let mut explanations = Vec::new();
        self.last_policy = None;
        if !finished {
            let decision = {
                let obs = self.state.observation();
                self.agent.act(&obs, &mut self.rng)
            };
            let decision = match decision {
                Ok(d) => d,
                Err(e) => {
                    self.status = SessionStatus::Ended;
                    return Err(e);
                }
            };
            let g = &self.state.graph;
            let scores = decision.policy.as_ref().map(|p| {
                self.scenario
                    .candidates
                    .iter()
                    .map(|i| g.item_entity(*i).and_then(|e| p.items.get(&e)).copied().unwrap_or(0.0))
                    .collect()
            });
            self.salience.push(SalienceRow { turn: n, scores });
            self.last_policy = decision.policy.as_ref().map(|p| snapshot(p, g));
            if decision.action.agent_act() == Some(AgentAct::Recommendation) {
                if let Some(e) = decision.action.item.and_then(|i| g.item_entity(i)) {
                    explanations = g
                        .explain_paths(e, EXPLANATION_HOPS)
                        .iter()
                        .map(|p| p.render(g))
                        .collect();
                }
            }
            self.state.push_agent(decision.action)?;
            agent_action = Some(decision.action);
        }
        if accepted {
            self.status = SessionStatus::Succeeded;
        } else if finished || self.state.dialog.turns.len() >= MAX_TURNS {
            self.status = SessionStatus::Ended;
        }
        Ok(TurnResponse {
            agent_action,
            policy: self.last_policy.clone(),
            graph_delta: self.state.graph.triples()[before..].to_vec(),
            explanations,
            status: self.status,
            graph_version: self.graph_version(),
        })
    }

    pub fn graph_json(&self) -> GraphJson {
        self.state.graph.to_json_value()
    }

    pub fn explanations(&self, item: ItemId) -> Result<ExplanationView> {
        let g = &self.state.graph;
        let e = g
            .item_entity(item)
            .ok_or_else(|| Error::Lookup(format!("item {item} is not in session {}", self.id)))?;
        Ok(ExplanationView {
            item,
            paths: g
                .explain_paths(e, EXPLANATION_HOPS)
                .iter()
                .map(|p| p.render(g))
                .collect(),
        })
    }

    pub fn salience(&self) -> Salience {
        Salience {
            items: self.scenario.candidates.iter().map(|i| self.named_item(*i)).collect(),
            rows: self.salience.clone(),
        }
    }
}

fn snapshot(p: &Policy, g: &crate::memgraph::MemoryGraph) -> PolicySnapshot {
    let top = |kind| {
        Policy::ranked(p.scores(kind).expect("argument kind"))
            .into_iter()
            .take(POLICY_TOP_K)
            .map(|(e, score)| Scored {
                entity: e,
                name: g.describe(e),
                score,
            })
            .collect()
    };
    PolicySnapshot {
        acts: AgentAct::ALL
            .iter()
            .map(|a| (format!("{a:?}"), p.act_probs[a.index()]))
            .collect(),
        items: top(EntityKind::Item),
        slots: top(EntityKind::Slot),
        values: top(EntityKind::Value),
    }
}

/// All live sessions. Each session has its own lock, so turns in one
/// session are serialized while different sessions proceed independently.
pub struct SessionHub {
    catalog: Arc<Catalog>,
    scenarios: HashMap<String, Scenario>,
    resources: AgentResources,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    next: AtomicU64,
}

impl SessionHub {
    pub fn new(catalog: Arc<Catalog>, scenarios: Vec<Scenario>, resources: AgentResources) -> Self {
        Self {
            catalog,
            scenarios: scenarios.into_iter().map(|s| (s.id.clone(), s)).collect(),
            resources,
            sessions: Mutex::new(HashMap::new()),
            next: AtomicU64::new(1),
        }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn create(&self, req: &CreateSession) -> Result<SessionView> {
        let scenario = match &req.scenario {
            ScenarioSource::Generate { seed, with_history } => {
                generate_scenario(&self.catalog, &format!("guest-{seed}"), *with_history, *seed)?
            }
            ScenarioSource::ScenarioId { id } => self
                .scenarios
                .get(id)
                .cloned()
                .ok_or_else(|| Error::Lookup(format!("scenario {id}")))?,
        };
        let id = format!("s{:06}", self.next.fetch_add(1, Ordering::Relaxed));
        let session = Session::new(id.clone(), &req.agent, scenario, &self.resources)?;
        let view = session.view();
        self.sessions
            .lock()
            .expect("session table lock")
            .insert(id, Arc::new(Mutex::new(session)));
        Ok(view)
    }

    /// Runs `f` with exclusive access to one session.
    pub fn with<R>(&self, id: &str, f: impl FnOnce(&mut Session) -> R) -> Result<R> {
        let s = self
            .sessions
            .lock()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| Error::Lookup(format!("session {id}")))?;
        let mut guard = s.lock().expect("session lock");
        Ok(f(&mut guard))
    }

    pub fn post_turn(&self, id: &str, action: DialogAction) -> Result<TurnResponse> {
        self.with(id, |s| s.post_user_turn(action))?
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().expect("session table lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{synthesize_catalog, CatalogConfig};
    use crate::dialog::Sentiment;
    use crate::memgraph::{fixtures::bob, RelationKind, M_CUR_DIALOG};

    fn hub() -> SessionHub {
        let cat = synthesize_catalog(&CatalogConfig {
            n_items: 120,
            ..CatalogConfig::default()
        })
        .unwrap();
        SessionHub::new(Arc::new(cat), vec![bob()], AgentResources::default())
    }

    fn bob_session(h: &SessionHub, agent: &str) -> String {
        h.create(&CreateSession {
            agent: agent.into(),
            scenario: ScenarioSource::ScenarioId { id: "bob-h".into() },
        })
        .unwrap()
        .session_id
    }

    fn greet() -> DialogAction {
        DialogAction::user(UserAct::Greeting)
    }

    #[test]
    fn rec_agent_opens_with_a_recommendation() {
        let h = hub();
        let id = bob_session(&h, "rec");
        let r = h.post_turn(&id, greet()).unwrap();
        assert_eq!(r.agent_action.unwrap().agent_act(), Some(AgentAct::Recommendation));
        assert!(!r.explanations.is_empty() || r.graph_delta.is_empty());
    }

    #[test]
    fn generated_menus_hold_candidate_values_only() {
        let h = hub();
        let v = h
            .create(&CreateSession {
                agent: "oracle".into(),
                scenario: ScenarioSource::Generate {
                    seed: 5,
                    with_history: false,
                },
            })
            .unwrap();
        assert!(v.history.is_empty());
        let s = h.with(&v.session_id, |s| s.scenario.clone()).unwrap();
        let cand_values: std::collections::BTreeSet<ValueId> = s
            .candidates
            .iter()
            .flat_map(|i| s.items[i].values.iter().copied())
            .collect();
        assert!(!v.menus.values.is_empty());
        assert!(v.menus.values.iter().all(|x| cand_values.contains(&x.id)));
        assert_eq!(v.menus.items.len(), s.candidates.len());
    }

    #[test]
    fn unknown_agent_lists_the_valid_names() {
        let h = hub();
        let e = h
            .create(&CreateSession {
                agent: "wizard".into(),
                scenario: ScenarioSource::ScenarioId { id: "bob-h".into() },
            })
            .unwrap_err()
            .to_string();
        for n in AGENT_NAMES {
            assert!(e.contains(n), "{e}");
        }
        let e = h.create(&CreateSession {
            agent: "umgr".into(),
            scenario: ScenarioSource::ScenarioId { id: "bob-h".into() },
        });
        assert!(e.unwrap_err().to_string().contains("checkpoint"));
    }

    #[test]
    fn inform_shows_up_as_a_delta() {
        let h = hub();
        let id = bob_session(&h, "oracle");
        let fresh = h.with(&id, |s| s.graph_json()).unwrap();
        assert!(fresh.triples.iter().all(|t| !t.1.is_sentiment()));
        h.post_turn(&id, greet()).unwrap();
        let r = h
            .post_turn(
                &id,
                DialogAction::user_on_value(UserAct::Inform, ValueId(0), Sentiment::PosOn),
            )
            .unwrap();
        let thai = h
            .with(&id, |s| s.state().graph.value_entity(ValueId(0)).unwrap())
            .unwrap();
        assert_eq!(
            r.graph_delta,
            vec![Triple {
                head: M_CUR_DIALOG,
                relation: RelationKind::PosOn,
                tail: thai
            }]
        );
        let v0 = fresh.triples.len();
        h.post_turn(
            &id,
            DialogAction::user_on_value(UserAct::Inform, ValueId(2), Sentiment::PosOn),
        )
        .ok();
        let after = h.with(&id, |s| s.graph_json()).unwrap();
        assert_eq!(after.triples.len(), v0 + 2);
    }

    #[test]
    fn accepting_the_target_succeeds() {
        let h = hub();
        let id = bob_session(&h, "rec");
        let mut r = h.post_turn(&id, greet()).unwrap();
        for _ in 0..2 {
            let item = r.agent_action.as_ref().unwrap().item.unwrap();
            if item == ItemId(10) {
                let done = h.post_turn(&id, DialogAction::reply(item, Sentiment::PosOn)).unwrap();
                assert_eq!(done.status, SessionStatus::Succeeded);
                assert!(h.post_turn(&id, greet()).is_err());
                let d = h.with(&id, |s| s.state().dialog.clone()).unwrap();
                d.validate(MAX_TURNS, Some(&[ItemId(10)])).unwrap();
                assert!(d.success);
                return;
            }
            r = h.post_turn(&id, DialogAction::reply(item, Sentiment::NegOn)).unwrap();
        }
        panic!("target never recommended");
    }

    #[test]
    fn eleventh_utterance_ends_the_session() {
        let h = hub();
        let id = bob_session(&h, "random");
        let neutral = DialogAction::user_on_value(UserAct::Inform, ValueId(1), Sentiment::NeuOn);
        let mut last = h.post_turn(&id, greet()).unwrap();
        for _ in 0..4 {
            assert_eq!(last.status, SessionStatus::Open);
            last = h.post_turn(&id, neutral).unwrap();
        }
        assert_eq!(h.with(&id, |s| s.state().dialog.turns.len()).unwrap(), 10);
        let end = h.post_turn(&id, neutral).unwrap();
        assert_eq!(end.status, SessionStatus::Ended);
        assert!(end.agent_action.is_none());
        let sal = h.with(&id, |s| s.salience()).unwrap();
        assert_eq!(sal.rows.len(), 5);
        assert!(sal.rows.iter().all(|r| r.scores.is_none()));
    }

    #[test]
    fn off_menu_and_malformed_turns_are_refused() {
        let h = hub();
        let id = bob_session(&h, "oracle");
        let off = DialogAction::user_on_value(UserAct::Inform, ValueId(99), Sentiment::PosOn);
        assert!(h.post_turn(&id, off).unwrap_err().to_string().contains("menu"));
        let bad = DialogAction::user(UserAct::Inform);
        assert!(matches!(h.post_turn(&id, bad), Err(Error::Shape(_))));
        assert!(h.post_turn(&id, DialogAction::recommend(ItemId(10))).is_err());
        assert_eq!(h.with(&id, |s| s.state().dialog.turns.len()).unwrap(), 0);
        assert!(h.post_turn("nope", greet()).is_err());
    }

    #[test]
    fn explanations_and_isolation() {
        let h = hub();
        let a = bob_session(&h, "oracle");
        let b = bob_session(&h, "oracle");
        assert_ne!(a, b);
        h.post_turn(&a, greet()).unwrap();
        h.post_turn(
            &a,
            DialogAction::user_on_value(UserAct::Inform, ValueId(0), Sentiment::PosOn),
        )
        .unwrap();
        let pa = h.with(&a, |s| s.explanations(ItemId(10)).unwrap()).unwrap();
        let pb = h.with(&b, |s| s.explanations(ItemId(10)).unwrap()).unwrap();
        assert!(pa.paths.iter().any(|p| p.contains("-PosOn->")));
        assert!(pb.paths.iter().all(|p| !p.contains("PosOn")));
        assert!(h.with(&a, |s| s.explanations(ItemId(404))).unwrap().is_err());
        assert_eq!(
            h.with(&b, |s| s.graph_version()).unwrap() + 1,
            h.with(&a, |s| s.graph_version()).unwrap()
        );
        assert_eq!(h.len(), 2);
    }

    #[test]
    fn menus_track_the_masks() {
        let h = hub();
        let id = bob_session(&h, "oracle");
        let (menus, masks) = h.with(&id, |s| (s.menus(), s.state().masks.clone())).unwrap();
        assert_eq!(menus.items.len(), masks.items.len());
        assert_eq!(menus.slots.len(), masks.slots.len());
        assert_eq!(menus.values.len(), masks.values.len());
        assert_eq!(menus.acts.len(), 7);
    }
}
