//! Synthetic restaurant catalog and dialog scenario generation.
//!
//! A scenario is the tuple (user, candidates C, history H, value→slot map V,
//! preference P, ground truth T). Candidates share the ground truth's region
//! and at least half of the distractors share a non-location value with it.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{mix_seed, seed_for, ItemId, SlotId, ValueId};
use crate::jsonl;

pub const SLOT_NAMES: [&str; 10] = [
    "category", "location", "price", "parking", "alcohol", "wifi", "ambience", "noise", "attire", "good_for",
];
pub const CATEGORY: SlotId = SlotId(0);
pub const LOCATION: SlotId = SlotId(1);
pub const PRICE: SlotId = SlotId(2);

const PRICE_VALUES: [&str; 4] = ["cheap", "affordable", "expensive", "very_expensive"];
const PRICE_WEIGHTS: [f64; 4] = [0.3, 0.4, 0.22, 0.08];
const PARKING: [&str; 5] = ["street", "garage", "lot", "valet", "validated"];
const ALCOHOL: [&str; 3] = ["full_bar", "beer_and_wine", "none"];
const WIFI: [&str; 3] = ["free", "paid", "no"];
const AMBIENCE: [&str; 9] = [
    "casual", "romantic", "intimate", "classy", "hipster", "touristy", "trendy", "upscale", "divey",
];
const NOISE: [&str; 4] = ["quiet", "average", "loud", "very_loud"];
const ATTIRE: [&str; 3] = ["casual", "dressy", "formal"];
const GOOD_FOR: [&str; 6] = ["breakfast", "brunch", "lunch", "dinner", "dessert", "late_night"];
const CUISINES: [&str; 48] = [
    "thai",
    "italian",
    "mexican",
    "chinese",
    "japanese",
    "sushi_bars",
    "pizza",
    "burgers",
    "fast_food",
    "american_new",
    "american_traditional",
    "indian",
    "korean",
    "vietnamese",
    "french",
    "greek",
    "mediterranean",
    "middle_eastern",
    "spanish",
    "tapas",
    "seafood",
    "steakhouses",
    "barbeque",
    "sandwiches",
    "delis",
    "bakeries",
    "cafes",
    "coffee_and_tea",
    "breakfast_and_brunch",
    "diners",
    "vegan",
    "vegetarian",
    "gluten_free",
    "salad",
    "soup",
    "noodles",
    "ramen",
    "dim_sum",
    "cajun",
    "caribbean",
    "ethiopian",
    "peruvian",
    "brazilian",
    "german",
    "irish",
    "pubs",
    "wine_bars",
    "juice_bars_and_smoothies",
];
const REGIONS: [&str; 12] = ["AZ", "NV", "WI", "ON", "PA", "OH", "NC", "IL", "QC", "SC", "AB", "NY"];
const TOWNS: [&str; 16] = [
    "Springfield",
    "Riverside",
    "Fairview",
    "Madison",
    "Georgetown",
    "Franklin",
    "Clinton",
    "Salem",
    "Greenville",
    "Bristol",
    "Dover",
    "Hudson",
    "Milton",
    "Newport",
    "Oxford",
    "Ashland",
];
const NAME_A: [&str; 16] = [
    "Golden", "Blue", "Old", "Happy", "Little", "Red", "Silver", "Lucky", "Royal", "Green", "Rusty", "Sunny", "Wild",
    "Urban", "Hidden", "Twin",
];
const NAME_B: [&str; 16] = [
    "Basil", "Dragon", "Grill", "Bistro", "Kitchen", "Table", "Spoon", "Oven", "Garden", "Lantern", "Harbor", "Barrel",
    "Pepper", "Olive", "Tavern", "Noodle",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogSlot {
    pub id: SlotId,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogValue {
    pub id: ValueId,
    pub name: String,
    pub slot: SlotId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogItem {
    pub id: ItemId,
    pub name: String,
    pub region: String,
    pub values: BTreeSet<ValueId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Catalog {
    pub slots: Vec<CatalogSlot>,
    pub values: Vec<CatalogValue>,
    pub items: Vec<CatalogItem>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogConfig {
    pub n_items: usize,
    /// Number of values for each slot, in [`SLOT_NAMES`] order.
    pub values_per_slot: [usize; 10],
    pub n_regions: usize,
    /// Probability that an item carries a value for each optional slot.
    pub optional_slot_prob: f64,
    /// Zipf exponent of category popularity.
    pub category_skew: f64,
    pub seed: u64,
}

impl Default for CatalogConfig {
    fn default() -> Self {
        Self {
            n_items: 500,
            values_per_slot: [393, 40, 4, 5, 3, 3, 9, 4, 3, 6],
            n_regions: 8,
            optional_slot_prob: 0.5,
            category_skew: 1.0,
            seed: 7,
        }
    }
}

impl CatalogConfig {
    pub fn total_values(&self) -> usize {
        self.values_per_slot.iter().sum()
    }
}

/// Serialized catalog line.
#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum CatalogRecord {
    Slot(CatalogSlot),
    Value(CatalogValue),
    Item(CatalogItem),
}

fn value_names(slot: usize, n: usize, n_regions: usize) -> Vec<String> {
    let fixed: &[&str] = match slot {
        2 => &PRICE_VALUES,
        3 => &PARKING,
        4 => &ALCOHOL,
        5 => &WIFI,
        6 => &AMBIENCE,
        7 => &NOISE,
        8 => &ATTIRE,
        9 => &GOOD_FOR,
        _ => &[],
    };
    (0..n)
        .map(|i| match slot {
            0 => match CUISINES.get(i) {
                Some(c) => c.to_string(),
                None => format!("{}_fusion_{}", CUISINES[i % CUISINES.len()], i / CUISINES.len()),
            },
            1 => {
                let region = REGIONS[(i % n_regions) % REGIONS.len()];
                let k = i / n_regions;
                let town = TOWNS[k % TOWNS.len()];
                let suffix = if k >= TOWNS.len() {
                    format!("_{}", k / TOWNS.len())
                } else {
                    String::new()
                };
                format!("{town}{suffix},{}", region_tag(i % n_regions, region))
            }
            _ => match fixed.get(i) {
                Some(v) => v.to_string(),
                None => format!("{}_{}", SLOT_NAMES[slot], i),
            },
        })
        .collect()
}

fn region_tag(r: usize, base: &str) -> String {
    if r < REGIONS.len() {
        base.to_string()
    } else {
        format!("{base}{}", r / REGIONS.len())
    }
}

fn region_name(r: usize) -> String {
    region_tag(r, REGIONS[r % REGIONS.len()])
}

/// Deterministic catalog from `config`.
pub fn synthesize_catalog(config: &CatalogConfig) -> Result<Catalog> {
    let counts = &config.values_per_slot;
    if config.n_items == 0 {
        return Err(Error::Generation("catalog needs at least one item".into()));
    }
    if config.n_regions == 0 {
        return Err(Error::Generation("catalog needs at least one region".into()));
    }
    if counts[LOCATION.0 as usize] < config.n_regions {
        return Err(Error::Generation(format!(
            "{} location values cannot cover {} regions",
            counts[LOCATION.0 as usize], config.n_regions
        )));
    }
    if counts[PRICE.0 as usize] == 0 || counts[CATEGORY.0 as usize] == 0 {
        return Err(Error::Generation(
            "every item needs a price and a category value".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let slots: Vec<CatalogSlot> = SLOT_NAMES
        .iter()
        .enumerate()
        .map(|(i, n)| CatalogSlot {
            id: SlotId(i as u32),
            name: n.to_string(),
        })
        .collect();
    let mut values = Vec::with_capacity(config.total_values());
    let mut by_slot: Vec<Vec<ValueId>> = vec![Vec::new(); SLOT_NAMES.len()];
    for (s, &n) in counts.iter().enumerate() {
        for name in value_names(s, n, config.n_regions) {
            let id = ValueId(values.len() as u32);
            by_slot[s].push(id);
            values.push(CatalogValue {
                id,
                name,
                slot: SlotId(s as u32),
            });
        }
    }
    // Location value i belongs to region i % n_regions.
    let cities_of_region: Vec<Vec<ValueId>> = (0..config.n_regions)
        .map(|r| {
            by_slot[LOCATION.0 as usize]
                .iter()
                .enumerate()
                .filter(|(i, _)| i % config.n_regions == r)
                .map(|(_, v)| *v)
                .collect()
        })
        .collect();
    let cat_weights: Vec<f64> = (0..counts[0])
        .map(|r| 1.0 / ((r + 1) as f64).powf(config.category_skew))
        .collect();
    let price_weights: Vec<f64> = (0..counts[PRICE.0 as usize])
        .map(|i| PRICE_WEIGHTS.get(i).copied().unwrap_or(0.05))
        .collect();
    let price_dist = WeightedIndex::new(&price_weights).expect("positive weights");

    let mut items = Vec::with_capacity(config.n_items);
    for i in 0..config.n_items {
        let region = rng.gen_range(0..config.n_regions);
        let mut vals = BTreeSet::new();
        vals.insert(*cities_of_region[region].choose(&mut rng).expect("region has cities"));
        vals.insert(by_slot[PRICE.0 as usize][price_dist.sample(&mut rng)]);
        let n_cat = rng.gen_range(1..=3usize).min(counts[0]);
        let mut w = cat_weights.clone();
        for _ in 0..n_cat {
            let d = WeightedIndex::new(&w).expect("remaining category weight");
            let k = d.sample(&mut rng);
            w[k] = 0.0;
            vals.insert(by_slot[0][k]);
        }
        for slot in 3..SLOT_NAMES.len() {
            if !by_slot[slot].is_empty() && rng.gen_bool(config.optional_slot_prob) {
                vals.insert(*by_slot[slot].choose(&mut rng).expect("non-empty"));
            }
        }
        let name = format!(
            "{}_{}_{}",
            NAME_A[i % NAME_A.len()],
            NAME_B[(i / NAME_A.len()) % NAME_B.len()],
            i
        );
        items.push(CatalogItem {
            id: ItemId(i as u32),
            name,
            region: region_name(region),
            values: vals,
        });
    }
    Ok(Catalog { slots, values, items })
}

impl Catalog {
    pub fn item(&self, id: ItemId) -> Option<&CatalogItem> {
        self.items.get(id.0 as usize).filter(|i| i.id == id)
    }

    pub fn value(&self, id: ValueId) -> Option<&CatalogValue> {
        self.values.get(id.0 as usize).filter(|v| v.id == id)
    }

    pub fn slot(&self, id: SlotId) -> Option<&CatalogSlot> {
        self.slots.get(id.0 as usize).filter(|s| s.id == id)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let recs = self
            .slots
            .iter()
            .cloned()
            .map(CatalogRecord::Slot)
            .chain(self.values.iter().cloned().map(CatalogRecord::Value))
            .chain(self.items.iter().cloned().map(CatalogRecord::Item));
        jsonl::write(path, recs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut c = Catalog::default();
        for rec in jsonl::read::<CatalogRecord>(path)? {
            match rec {
                CatalogRecord::Slot(s) => c.slots.push(s),
                CatalogRecord::Value(v) => c.values.push(v),
                CatalogRecord::Item(i) => c.items.push(i),
            }
        }
        Ok(c)
    }

    fn non_location_overlap(&self, a: &CatalogItem, b: &CatalogItem) -> bool {
        a.values
            .intersection(&b.values)
            .any(|v| self.value(*v).map(|v| v.slot != LOCATION).unwrap_or(false))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioItem {
    pub name: String,
    pub values: BTreeSet<ValueId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioValue {
    pub name: String,
    pub slot: SlotId,
}

/// One dialog setting. Self-contained: it carries the value and slot
/// metadata of every item it mentions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub user_id: String,
    pub with_history: bool,
    pub candidates: Vec<ItemId>,
    pub history: Vec<ItemId>,
    pub ground_truth: Vec<ItemId>,
    pub preference: BTreeMap<SlotId, BTreeSet<ValueId>>,
    pub items: BTreeMap<ItemId, ScenarioItem>,
    pub values: BTreeMap<ValueId, ScenarioValue>,
    pub slots: BTreeMap<SlotId, String>,
}

impl Scenario {
    pub fn is_ground_truth(&self, item: ItemId) -> bool {
        self.ground_truth.contains(&item)
    }

    pub fn prefers(&self, value: ValueId) -> bool {
        self.preference.values().any(|vs| vs.contains(&value))
    }

    /// Every preferred value, ordered by (slot, value).
    pub fn preferred_values(&self) -> Vec<ValueId> {
        self.preference.values().flat_map(|vs| vs.iter().copied()).collect()
    }

    pub fn item_values(&self, item: ItemId) -> Option<&BTreeSet<ValueId>> {
        self.items.get(&item).map(|i| &i.values)
    }

    /// Candidates whose values include every preferred value.
    pub fn candidates_consistent_with_preference(&self) -> Vec<ItemId> {
        let pref = self.preferred_values();
        self.candidates
            .iter()
            .copied()
            .filter(|c| {
                self.item_values(*c)
                    .map(|vs| pref.iter().all(|p| vs.contains(p)))
                    .unwrap_or(false)
            })
            .collect()
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Error::InvalidScenario {
            id: self.id.clone(),
            reason,
        };
        if self.ground_truth.len() != 1 {
            return Err(fail(format!("|T| = {}", self.ground_truth.len())));
        }
        if !self.ground_truth.iter().all(|t| self.candidates.contains(t)) {
            return Err(fail("T not contained in C".into()));
        }
        if !(10..=20).contains(&self.candidates.len()) {
            return Err(fail(format!("|C| = {}", self.candidates.len())));
        }
        let h = self.history.len();
        if self.with_history && !(5..=20).contains(&h) || !self.with_history && h != 0 {
            return Err(fail(format!("|H| = {h} with_history={}", self.with_history)));
        }
        let uniq: BTreeSet<_> = self.candidates.iter().collect();
        if uniq.len() != self.candidates.len() {
            return Err(fail("duplicate candidate".into()));
        }
        for i in self.candidates.iter().chain(&self.history) {
            let Some(item) = self.items.get(i) else {
                return Err(fail(format!("item {i} has no metadata")));
            };
            for v in &item.values {
                let Some(val) = self.values.get(v) else {
                    return Err(fail(format!("value {v} has no slot")));
                };
                if !self.slots.contains_key(&val.slot) {
                    return Err(fail(format!("slot {} unknown", val.slot)));
                }
            }
        }
        let t = self.ground_truth[0];
        let mut expect: BTreeMap<SlotId, BTreeSet<ValueId>> = BTreeMap::new();
        for v in &self.items[&t].values {
            expect.entry(self.values[v].slot).or_default().insert(*v);
        }
        if expect != self.preference {
            return Err(fail("P differs from the ground truth's values".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioSet {
    pub split: Split,
    pub scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    pub fn save(&self, path: &Path) -> Result<()> {
        jsonl::write(path, &self.scenarios)
    }

    pub fn load(split: Split, path: &Path) -> Result<Self> {
        let scenarios = jsonl::read_with(path, |s: &Scenario| s.validate().map_err(|e| e.to_string()))?;
        Ok(Self { split, scenarios })
    }

    pub fn user_ids(&self) -> BTreeSet<&str> {
        self.scenarios.iter().map(|s| s.user_id.as_str()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.id == id)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitCounts {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

const MAX_TRUTH_ATTEMPTS: usize = 64;

/// Samples one scenario. The with/without-history pair for a user share
/// everything except H: H is drawn from an independent stream.
pub fn generate_scenario(catalog: &Catalog, user_id: &str, with_history: bool, seed: u64) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 1));
    let mut hist_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 2));

    let mut by_region: BTreeMap<&str, Vec<&CatalogItem>> = BTreeMap::new();
    for it in &catalog.items {
        by_region.entry(it.region.as_str()).or_default().push(it);
    }
    let n_candidates = rng.gen_range(10..=20usize);
    let eligible: Vec<&CatalogItem> = catalog
        .items
        .iter()
        .filter(|it| by_region[it.region.as_str()].len() >= n_candidates)
        .collect();
    if eligible.is_empty() {
        return Err(Error::Generation(format!(
            "similarity constraint: no region holds {n_candidates} items"
        )));
    }
    let n_distractors = n_candidates - 1;
    let need_shared = n_distractors.div_ceil(2);

    let mut chosen = None;
    for _ in 0..MAX_TRUTH_ATTEMPTS {
        let truth = *eligible.choose(&mut rng).expect("non-empty");
        let pool: Vec<&CatalogItem> = by_region[truth.region.as_str()]
            .iter()
            .copied()
            .filter(|it| it.id != truth.id)
            .collect();
        let (shared, other): (Vec<&CatalogItem>, Vec<&CatalogItem>) =
            pool.iter().partition(|it| catalog.non_location_overlap(truth, it));
        if shared.len() < need_shared {
            continue;
        }
        let mut picks: Vec<&CatalogItem> = shared.choose_multiple(&mut rng, need_shared).copied().collect();
        let taken: BTreeSet<ItemId> = picks.iter().map(|i| i.id).collect();
        let rest: Vec<&CatalogItem> = shared
            .iter()
            .chain(other.iter())
            .copied()
            .filter(|i| !taken.contains(&i.id))
            .collect();
        picks.extend(rest.choose_multiple(&mut rng, n_distractors - need_shared).copied());
        chosen = Some((truth, picks));
        break;
    }
    let Some((truth, distractors)) = chosen else {
        return Err(Error::Generation(format!(
            "similarity constraint: could not find {need_shared} distractors sharing a non-location value \
             with a ground truth in its region"
        )));
    };
    let mut candidates: Vec<ItemId> = distractors.iter().map(|i| i.id).collect();
    candidates.push(truth.id);
    candidates.shuffle(&mut rng);

    let history = if with_history {
        let n = hist_rng.gen_range(5..=20usize);
        let (similar, rest): (Vec<&CatalogItem>, Vec<&CatalogItem>) = catalog
            .items
            .iter()
            .filter(|it| it.id != truth.id)
            .partition(|it| catalog.non_location_overlap(truth, it));
        let n_sim = n.div_ceil(2).min(similar.len());
        let mut h: Vec<ItemId> = similar.choose_multiple(&mut hist_rng, n_sim).map(|i| i.id).collect();
        let taken: BTreeSet<ItemId> = h.iter().copied().collect();
        let remaining: Vec<ItemId> = similar
            .iter()
            .chain(rest.iter())
            .map(|i| i.id)
            .filter(|i| !taken.contains(i))
            .collect();
        h.extend(remaining.choose_multiple(&mut hist_rng, n - h.len()).copied());
        if h.len() < 5 {
            return Err(Error::Generation("catalog too small for a 5-item history".into()));
        }
        h.shuffle(&mut hist_rng);
        h
    } else {
        Vec::new()
    };

    let mut items = BTreeMap::new();
    let mut values = BTreeMap::new();
    let mut slots = BTreeMap::new();
    for id in candidates.iter().chain(&history) {
        let it = catalog.item(*id).ok_or_else(|| Error::Lookup(format!("item {id}")))?;
        for v in &it.values {
            let cv = catalog.value(*v).ok_or_else(|| Error::Lookup(format!("value {v}")))?;
            let slot = catalog
                .slot(cv.slot)
                .ok_or_else(|| Error::Lookup(format!("slot {}", cv.slot)))?;
            values.insert(
                *v,
                ScenarioValue {
                    name: cv.name.clone(),
                    slot: cv.slot,
                },
            );
            slots.insert(cv.slot, slot.name.clone());
        }
        items.insert(
            *id,
            ScenarioItem {
                name: it.name.clone(),
                values: it.values.clone(),
            },
        );
    }
    let mut preference: BTreeMap<SlotId, BTreeSet<ValueId>> = BTreeMap::new();
    for v in &truth.values {
        preference.entry(values[v].slot).or_default().insert(*v);
    }
    let suffix = if with_history { "h" } else { "n" };
    Ok(Scenario {
        id: format!("{user_id}-{suffix}"),
        user_id: user_id.to_string(),
        with_history,
        candidates,
        history,
        ground_truth: vec![truth.id],
        preference,
        items,
        values,
        slots,
    })
}

/// Three scenario sets with disjoint users; each user contributes a
/// with-history and a without-history scenario.
pub fn generate_split(catalog: &Catalog, counts: SplitCounts, seed: u64) -> Result<[ScenarioSet; 3]> {
    let n = [counts.train, counts.dev, counts.test];
    let mut out = Vec::with_capacity(3);
    for (split, n_users) in Split::ALL.into_iter().zip(n) {
        let mut scenarios = Vec::with_capacity(2 * n_users);
        for u in 0..n_users {
            let user_id = format!("{}-u{u:05}", split.as_str());
            let user_seed = seed_for(seed, &user_id);
            scenarios.push(generate_scenario(catalog, &user_id, true, user_seed)?);
            scenarios.push(generate_scenario(catalog, &user_id, false, user_seed)?);
        }
        out.push(ScenarioSet { split, scenarios });
    }
    let [a, b, c]: [ScenarioSet; 3] = out.try_into().expect("three splits");
    Ok([a, b, c])
}
