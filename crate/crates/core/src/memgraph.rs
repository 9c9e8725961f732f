//! Typed user memory graph: ontology, construction from a scenario,
//! append-only sentiment updates, neighborhood queries and explanation paths.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::Scenario;
use crate::dialog::Sentiment;
use crate::error::{Error, Result};
use crate::ids::{ItemId, SlotId, ValueId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    User,
    Memory,
    Item,
    Slot,
    Value,
}

impl EntityKind {
    pub const ALL: [EntityKind; 5] = [
        EntityKind::User,
        EntityKind::Memory,
        EntityKind::Item,
        EntityKind::Slot,
        EntityKind::Value,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::User => "user",
            EntityKind::Memory => "memory",
            EntityKind::Item => "item",
            EntityKind::Slot => "slot",
            EntityKind::Value => "value",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId {
    pub kind: EntityKind,
    pub index: u32,
}

impl EntityId {
    pub const fn new(kind: EntityKind, index: u32) -> Self {
        Self { kind, index }
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.as_str(), self.index)
    }
}

impl std::str::FromStr for EntityId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Lookup(format!("malformed entity id {s:?}"));
        let (k, i) = s.split_once(':').ok_or_else(bad)?;
        Ok(Self {
            kind: EntityKind::parse(k).ok_or_else(bad)?,
            index: i.parse().map_err(|_| bad())?,
        })
    }
}

impl Serialize for EntityId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EntityId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Forward relations. Reversed twins exist only in [`MessageGraph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelationKind {
    HasMemory,
    Visited,
    HasAspect,
    IsA,
    PosOn,
    NegOn,
    NeuOn,
}

impl RelationKind {
    pub const ALL: [RelationKind; 7] = [
        RelationKind::HasMemory,
        RelationKind::Visited,
        RelationKind::HasAspect,
        RelationKind::IsA,
        RelationKind::PosOn,
        RelationKind::NegOn,
        RelationKind::NeuOn,
    ];
    /// Forward plus reversed.
    pub const N_MESSAGE_TYPES: usize = 14;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_sentiment(self) -> bool {
        matches!(self, RelationKind::PosOn | RelationKind::NegOn | RelationKind::NeuOn)
    }

    /// Whether `(head, self, tail)` obeys the ontology signature.
    pub fn admits(self, head: EntityKind, tail: EntityKind) -> bool {
        use EntityKind::*;
        match self {
            RelationKind::HasMemory => head == User && tail == Memory,
            RelationKind::Visited => head == Memory && tail == Item,
            RelationKind::HasAspect => head == Item && tail == Value,
            RelationKind::IsA => head == Value && tail == Slot,
            _ => head == Memory && matches!(tail, Value | Item),
        }
    }
}

impl From<Sentiment> for RelationKind {
    fn from(s: Sentiment) -> Self {
        match s {
            Sentiment::PosOn => RelationKind::PosOn,
            Sentiment::NegOn => RelationKind::NegOn,
            Sentiment::NeuOn => RelationKind::NeuOn,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationKind,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationKind, tail: EntityId) -> Self {
        Self { head, relation, tail }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub sentiment: Sentiment,
    pub target: EntityId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Out,
    In,
}

/// Entities and catalog keys of one kind; the position is the entity index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Registry {
    names: Vec<String>,
    keys: Vec<Option<u32>>,
    by_key: BTreeMap<u32, u32>,
}

impl Registry {
    fn add(&mut self, name: String, key: Option<u32>) -> u32 {
        if let Some(k) = key {
            if let Some(&i) = self.by_key.get(&k) {
                return i;
            }
        }
        let i = self.names.len() as u32;
        self.names.push(name);
        self.keys.push(key);
        if let Some(k) = key {
            self.by_key.insert(k, i);
        }
        i
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MemoryGraph {
    registries: [Registry; 5],
    triples: Vec<Triple>,
    seen: HashSet<Triple>,
}

pub const USER: EntityId = EntityId::new(EntityKind::User, 0);
pub const M_HISTORY: EntityId = EntityId::new(EntityKind::Memory, 0);
pub const M_CUR_DIALOG: EntityId = EntityId::new(EntityKind::Memory, 1);

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyMasks {
    pub items: BTreeSet<EntityId>,
    pub slots: BTreeSet<EntityId>,
    pub values: BTreeSet<EntityId>,
}

impl PolicyMasks {
    pub fn for_kind(&self, kind: EntityKind) -> Option<&BTreeSet<EntityId>> {
        match kind {
            EntityKind::Item => Some(&self.items),
            EntityKind::Slot => Some(&self.slots),
            EntityKind::Value => Some(&self.values),
            _ => None,
        }
    }

    pub fn contains(&self, e: EntityId) -> bool {
        self.for_kind(e.kind).map(|s| s.contains(&e)).unwrap_or(false)
    }
}

impl MemoryGraph {
    /// A graph holding only the user and its two memory entities.
    pub fn skeleton(user_name: &str) -> Self {
        let mut g = Self {
            registries: Default::default(),
            triples: Vec::new(),
            seen: HashSet::new(),
        };
        g.reg_mut(EntityKind::User).add(user_name.to_string(), None);
        g.reg_mut(EntityKind::Memory).add("m_history".into(), None);
        g.reg_mut(EntityKind::Memory).add("m_cur_dialog".into(), None);
        g.push(Triple::new(USER, RelationKind::HasMemory, M_HISTORY));
        g.push(Triple::new(USER, RelationKind::HasMemory, M_CUR_DIALOG));
        g
    }

    /// Items are registered in candidate order, then history-only items;
    /// an item in both roles is one entity.
    pub fn build_initial(scenario: &Scenario) -> Result<Self> {
        let mut g = Self::skeleton(&scenario.user_id);
        let mut order: Vec<ItemId> = scenario.candidates.clone();
        for h in &scenario.history {
            if !order.contains(h) {
                order.push(*h);
            }
        }
        let mut item_entities = Vec::with_capacity(order.len());
        for id in &order {
            let item = scenario
                .items
                .get(id)
                .ok_or_else(|| Error::Ontology(format!("item {id} has no metadata")))?;
            if item.values.is_empty() {
                return Err(Error::Ontology(format!("item {id} has no values")));
            }
            let e = g.reg_mut(EntityKind::Item).add(item.name.clone(), Some(id.0));
            item_entities.push(EntityId::new(EntityKind::Item, e));
        }
        for h in &scenario.history {
            let e = g.item_entity(*h).expect("registered");
            g.push(Triple::new(M_HISTORY, RelationKind::Visited, e));
        }
        let mut value_order: Vec<ValueId> = Vec::new();
        for (id, e) in order.iter().zip(&item_entities) {
            for v in &scenario.items[id].values {
                let meta = scenario
                    .values
                    .get(v)
                    .ok_or_else(|| Error::Ontology(format!("value {v} has no slot")))?;
                let known = g.value_entity(*v).is_some();
                let ve = g.reg_mut(EntityKind::Value).add(meta.name.clone(), Some(v.0));
                if !known {
                    value_order.push(*v);
                }
                g.push(Triple::new(
                    *e,
                    RelationKind::HasAspect,
                    EntityId::new(EntityKind::Value, ve),
                ));
            }
        }
        for v in value_order {
            let slot = scenario.values[&v].slot;
            let name = scenario
                .slots
                .get(&slot)
                .ok_or_else(|| Error::Ontology(format!("value {v} points at unknown slot {slot}")))?;
            let se = g.reg_mut(EntityKind::Slot).add(name.clone(), Some(slot.0));
            let ve = g.value_entity(v).expect("registered");
            g.push(Triple::new(ve, RelationKind::IsA, EntityId::new(EntityKind::Slot, se)));
        }
        Ok(g)
    }

    fn reg(&self, kind: EntityKind) -> &Registry {
        &self.registries[kind as usize]
    }

    fn reg_mut(&mut self, kind: EntityKind) -> &mut Registry {
        &mut self.registries[kind as usize]
    }

    fn push(&mut self, t: Triple) -> bool {
        if self.seen.insert(t) {
            self.triples.push(t);
            true
        } else {
            false
        }
    }

    /// Appends `(m_cur_dialog, sentiment, target)`; returns whether the
    /// triple is new.
    pub fn apply_observation(&mut self, obs: Observation) -> Result<bool> {
        if !matches!(obs.target.kind, EntityKind::Value | EntityKind::Item) {
            return Err(Error::Ontology(format!(
                "sentiment target must be a value or item, got {}",
                obs.target
            )));
        }
        if !self.contains(obs.target) {
            return Err(Error::Lookup(obs.target.to_string()));
        }
        Ok(self.push(Triple::new(M_CUR_DIALOG, obs.sentiment.into(), obs.target)))
    }

    /// Value-semantic form of [`apply_observation`](Self::apply_observation).
    pub fn with_observation(&self, obs: Observation) -> Result<Self> {
        let mut g = self.clone();
        g.apply_observation(obs)?;
        Ok(g)
    }

    /// The graph as built, before any sentiment update.
    pub fn initial_view(&self) -> Self {
        let mut g = Self {
            registries: self.registries.clone(),
            triples: Vec::with_capacity(self.triples.len()),
            seen: HashSet::with_capacity(self.triples.len()),
        };
        for t in self.triples.iter().filter(|t| !t.relation.is_sentiment()) {
            g.push(*t);
        }
        g
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn has_triple(&self, t: &Triple) -> bool {
        self.seen.contains(t)
    }

    pub fn sentiment_triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter().filter(|t| t.relation.is_sentiment())
    }

    pub fn count(&self, kind: EntityKind) -> usize {
        self.reg(kind).names.len()
    }

    pub fn n_entities(&self) -> usize {
        self.registries.iter().map(|r| r.names.len()).sum()
    }

    pub fn contains(&self, e: EntityId) -> bool {
        (e.index as usize) < self.count(e.kind)
    }

    pub fn entities(&self, kind: EntityKind) -> impl Iterator<Item = EntityId> {
        (0..self.count(kind) as u32).map(move |i| EntityId::new(kind, i))
    }

    pub fn name(&self, e: EntityId) -> Option<&str> {
        self.reg(e.kind).names.get(e.index as usize).map(|s| s.as_str())
    }

    fn key(&self, e: EntityId) -> Option<u32> {
        self.reg(e.kind).keys.get(e.index as usize).copied().flatten()
    }

    fn by_key(&self, kind: EntityKind, key: u32) -> Option<EntityId> {
        self.reg(kind).by_key.get(&key).map(|&i| EntityId::new(kind, i))
    }

    pub fn item_entity(&self, id: ItemId) -> Option<EntityId> {
        self.by_key(EntityKind::Item, id.0)
    }

    pub fn value_entity(&self, id: ValueId) -> Option<EntityId> {
        self.by_key(EntityKind::Value, id.0)
    }

    pub fn slot_entity(&self, id: SlotId) -> Option<EntityId> {
        self.by_key(EntityKind::Slot, id.0)
    }

    pub fn item_id(&self, e: EntityId) -> Option<ItemId> {
        (e.kind == EntityKind::Item).then(|| self.key(e).map(ItemId)).flatten()
    }

    pub fn value_id(&self, e: EntityId) -> Option<ValueId> {
        (e.kind == EntityKind::Value)
            .then(|| self.key(e).map(ValueId))
            .flatten()
    }

    pub fn slot_id(&self, e: EntityId) -> Option<SlotId> {
        (e.kind == EntityKind::Slot).then(|| self.key(e).map(SlotId)).flatten()
    }

    pub fn neighbors(&self, e: EntityId, rel: RelationKind, direction: Direction) -> Result<Vec<EntityId>> {
        if !self.contains(e) {
            return Err(Error::Lookup(e.to_string()));
        }
        let mut out: Vec<EntityId> = self
            .triples
            .iter()
            .filter(|t| t.relation == rel)
            .filter_map(|t| match direction {
                Direction::Out if t.head == e => Some(t.tail),
                Direction::In if t.tail == e => Some(t.head),
                _ => None,
            })
            .collect();
        out.sort();
        out.dedup();
        Ok(out)
    }

    /// Slot a value belongs to (its unique IsA tail).
    pub fn slot_of(&self, value: EntityId) -> Option<EntityId> {
        self.triples
            .iter()
            .find(|t| t.relation == RelationKind::IsA && t.head == value)
            .map(|t| t.tail)
    }

    pub fn values_of(&self, item: EntityId) -> Vec<EntityId> {
        self.neighbors(item, RelationKind::HasAspect, Direction::Out)
            .unwrap_or_default()
    }

    pub fn policy_masks(&self, scenario: &Scenario) -> PolicyMasks {
        let items = scenario
            .candidates
            .iter()
            .filter_map(|c| self.item_entity(*c))
            .collect();
        let slots = self
            .triples
            .iter()
            .filter(|t| t.relation == RelationKind::IsA)
            .map(|t| t.tail)
            .collect();
        PolicyMasks {
            items,
            slots,
            values: self.entities(EntityKind::Value).collect(),
        }
    }

    /// Checks every structural invariant; used by property tests and on load.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Ontology(m));
        if self.count(EntityKind::User) != 1 {
            return fail(format!("{} user entities", self.count(EntityKind::User)));
        }
        if self.count(EntityKind::Memory) != 2 {
            return fail(format!("{} memory entities", self.count(EntityKind::Memory)));
        }
        if self.seen.len() != self.triples.len() {
            return fail("duplicate triple".into());
        }
        let mut is_a = vec![0usize; self.count(EntityKind::Value)];
        let mut aspects = vec![0usize; self.count(EntityKind::Item)];
        for t in &self.triples {
            if !self.contains(t.head) || !self.contains(t.tail) {
                return fail(format!("dangling triple {} {:?} {}", t.head, t.relation, t.tail));
            }
            if !t.relation.admits(t.head.kind, t.tail.kind) {
                return fail(format!("{:?} cannot link {} to {}", t.relation, t.head, t.tail));
            }
            match t.relation {
                RelationKind::IsA => is_a[t.head.index as usize] += 1,
                RelationKind::HasAspect => aspects[t.head.index as usize] += 1,
                _ => {}
            }
        }
        if let Some(i) = is_a.iter().position(|&n| n != 1) {
            return fail(format!("value:{i} has {} IsA edges", is_a[i]));
        }
        if let Some(i) = aspects.iter().position(|&n| n == 0) {
            return fail(format!("item:{i} has no values"));
        }
        Ok(())
    }

    /// Simple paths from the user to `item` of at most `max_hops` edges,
    /// walking triples in either direction; shortest first, then
    /// lexicographic.
    pub fn explain_paths(&self, item: EntityId, max_hops: usize) -> Vec<ExplanationPath> {
        if item.kind != EntityKind::Item || !self.contains(item) {
            return Vec::new();
        }
        let adj = self.undirected();
        let dist = bfs(&adj, item);
        let Some(&d0) = dist.get(&USER) else {
            return Vec::new();
        };
        if d0 > max_hops {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut path = ExplanationPath {
            entities: vec![USER],
            steps: Vec::new(),
        };
        let mut on_path: HashSet<EntityId> = HashSet::from([USER]);
        dfs(&adj, &dist, item, max_hops, &mut path, &mut on_path, &mut out);
        out.sort_by(|a, b| a.hops().cmp(&b.hops()).then_with(|| a.cmp(b)));
        out
    }

    fn undirected(&self) -> BTreeMap<EntityId, Vec<(Step, EntityId)>> {
        let mut adj: BTreeMap<EntityId, Vec<(Step, EntityId)>> = BTreeMap::new();
        for t in &self.triples {
            adj.entry(t.head).or_default().push((
                Step {
                    relation: t.relation,
                    reversed: false,
                },
                t.tail,
            ));
            adj.entry(t.tail).or_default().push((
                Step {
                    relation: t.relation,
                    reversed: true,
                },
                t.head,
            ));
        }
        for v in adj.values_mut() {
            v.sort();
        }
        adj
    }

    /// Per-relation incoming neighbor lists over a dense global index,
    /// including the reversed twin of every relation.
    pub fn message_graph(&self) -> MessageGraph {
        let mut offsets = [0usize; 5];
        let mut acc = 0;
        for k in EntityKind::ALL {
            offsets[k as usize] = acc;
            acc += self.count(k);
        }
        let n = acc;
        let mut kinds = Vec::with_capacity(n);
        for k in EntityKind::ALL {
            kinds.extend(std::iter::repeat_n(k, self.count(k)));
        }
        let gi = |e: EntityId| offsets[e.kind as usize] + e.index as usize;
        let mut incoming = vec![vec![Vec::new(); n]; RelationKind::N_MESSAGE_TYPES];
        for t in &self.triples {
            let r = t.relation.index();
            incoming[r][gi(t.tail)].push(gi(t.head));
            incoming[r + RelationKind::ALL.len()][gi(t.head)].push(gi(t.tail));
        }
        MessageGraph {
            offsets,
            kinds,
            incoming,
        }
    }

    pub fn to_json_value(&self) -> GraphJson {
        let mut entities = Vec::with_capacity(self.n_entities());
        for k in EntityKind::ALL {
            for e in self.entities(k) {
                entities.push(EntityJson {
                    kind: k,
                    index: e.index,
                    name: self.name(e).unwrap_or_default().to_string(),
                    key: self.key(e),
                });
            }
        }
        GraphJson {
            entities,
            triples: self.triples.iter().map(|t| (t.head, t.relation, t.tail)).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("graph serializes")
    }

    pub fn from_json_value(j: &GraphJson) -> Result<Self> {
        let mut g = Self {
            registries: Default::default(),
            triples: Vec::new(),
            seen: HashSet::new(),
        };
        for e in &j.entities {
            let reg = g.reg_mut(e.kind);
            if reg.names.len() as u32 != e.index {
                return Err(Error::Ontology(format!(
                    "{}:{} breaks dense indexing",
                    e.kind.as_str(),
                    e.index
                )));
            }
            if e.key.is_some_and(|k| reg.by_key.contains_key(&k)) {
                return Err(Error::Ontology(format!(
                    "duplicate catalog key on {}:{}",
                    e.kind.as_str(),
                    e.index
                )));
            }
            reg.add(e.name.clone(), e.key);
        }
        for &(h, r, t) in &j.triples {
            g.push(Triple::new(h, r, t));
        }
        g.check_invariants()?;
        Ok(g)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_json_value(&serde_json::from_str(s)?)
    }

    pub fn describe(&self, e: EntityId) -> String {
        self.name(e).map(str::to_string).unwrap_or_else(|| e.to_string())
    }
}

fn bfs(adj: &BTreeMap<EntityId, Vec<(Step, EntityId)>>, from: EntityId) -> BTreeMap<EntityId, usize> {
    let mut dist = BTreeMap::from([(from, 0)]);
    let mut q = VecDeque::from([from]);
    while let Some(u) = q.pop_front() {
        let d = dist[&u];
        for (_, v) in adj.get(&u).map(|v| v.as_slice()).unwrap_or_default() {
            if !dist.contains_key(v) {
                dist.insert(*v, d + 1);
                q.push_back(*v);
            }
        }
    }
    dist
}

fn dfs(
    adj: &BTreeMap<EntityId, Vec<(Step, EntityId)>>,
    dist: &BTreeMap<EntityId, usize>,
    target: EntityId,
    max_hops: usize,
    path: &mut ExplanationPath,
    on_path: &mut HashSet<EntityId>,
    out: &mut Vec<ExplanationPath>,
) {
    let here = *path.entities.last().expect("non-empty");
    if here == target {
        out.push(path.clone());
        return;
    }
    let used = path.steps.len();
    for &(step, next) in adj.get(&here).map(|v| v.as_slice()).unwrap_or_default() {
        let Some(&d) = dist.get(&next) else { continue };
        if used + 1 + d > max_hops || on_path.contains(&next) {
            continue;
        }
        path.steps.push(step);
        path.entities.push(next);
        on_path.insert(next);
        dfs(adj, dist, target, max_hops, path, on_path, out);
        on_path.remove(&next);
        path.entities.pop();
        path.steps.pop();
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Step {
    pub relation: RelationKind,
    /// Walked tail→head.
    pub reversed: bool,
}

/// `entities[i] --steps[i]--> entities[i+1]`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExplanationPath {
    pub entities: Vec<EntityId>,
    pub steps: Vec<Step>,
}

impl ExplanationPath {
    pub fn hops(&self) -> usize {
        self.steps.len()
    }

    /// The stored triple behind each hop.
    pub fn triples(&self) -> Vec<Triple> {
        self.steps
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let (a, b) = (self.entities[i], self.entities[i + 1]);
                if s.reversed {
                    Triple::new(b, s.relation, a)
                } else {
                    Triple::new(a, s.relation, b)
                }
            })
            .collect()
    }

    pub fn render(&self, g: &MemoryGraph) -> String {
        let mut s = g.describe(self.entities[0]);
        for (i, st) in self.steps.iter().enumerate() {
            let next = g.describe(self.entities[i + 1]);
            if st.reversed {
                s.push_str(&format!(" <-{:?}- {next}", st.relation));
            } else {
                s.push_str(&format!(" -{:?}-> {next}", st.relation));
            }
        }
        s
    }
}

/// Dense view for message passing: global index = offset of kind + index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MessageGraph {
    pub offsets: [usize; 5],
    pub kinds: Vec<EntityKind>,
    /// `incoming[r][j]` = sources of messages to `j` under type `r`; types
    /// `0..7` are forward relations, `7..14` their reversed twins.
    pub incoming: Vec<Vec<Vec<usize>>>,
}

impl MessageGraph {
    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn global(&self, e: EntityId) -> usize {
        self.offsets[e.kind as usize] + e.index as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityJson {
    pub kind: EntityKind,
    pub index: u32,
    pub name: String,
    pub key: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub entities: Vec<EntityJson>,
    pub triples: Vec<(EntityId, RelationKind, EntityId)>,
}
