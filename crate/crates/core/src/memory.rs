//! Episodic memory: prior (possibly stale) knowledge of where things are,
//! corrected by what the agent sees during the episode.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{AttributeKind, LocationId, MemorySeedEntry, ObjectId, ObjectInstance, SceneError, SceneGraph};

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("invalid memory configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryKey {
    Category(String),
    Object(ObjectId),
}

impl fmt::Display for MemoryKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MemoryKey::Category(c) => write!(f, "category:{c}"),
            MemoryKey::Object(o) => write!(f, "object:{o}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactSource {
    Seed,
    Observed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryFact {
    pub object_id: ObjectId,
    pub category: String,
    pub attributes: BTreeMap<AttributeKind, String>,
    pub recorded_location_id: LocationId,
    pub stale: bool,
    pub source: FactSource,
}

impl MemoryFact {
    fn observed(obj: &ObjectInstance) -> Self {
        Self {
            object_id: obj.id,
            category: obj.category.clone(),
            attributes: obj.attributes.clone(),
            recorded_location_id: obj.location_id,
            stale: false,
            source: FactSource::Observed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MemoryConfig {
    /// Probability that an object has a prior fact at all.
    pub p_cover: f64,
    /// Probability that a prior fact points at the wrong location.
    pub p_stale: f64,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self { p_cover: 0.6, p_stale: 0.15 }
    }
}

impl MemoryConfig {
    pub fn validate(&self) -> Result<(), MemoryError> {
        for (name, p) in [("p_cover", self.p_cover), ("p_stale", self.p_stale)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(MemoryError::Config(format!("{name} = {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryStore {
    facts: BTreeMap<ObjectId, MemoryFact>,
}

/// Draw prior facts for a scene. Each object is covered independently; a
/// covered fact is stale with probability `p_stale`, in which case its
/// recorded location is drawn uniformly from the other locations.
pub fn seed_entries<R: Rng + ?Sized>(scene: &SceneGraph, config: &MemoryConfig, rng: &mut R) -> Vec<MemorySeedEntry> {
    let mut out = Vec::new();
    for obj in &scene.objects {
        if !rng.gen_bool(config.p_cover) {
            continue;
        }
        let stale = rng.gen_bool(config.p_stale);
        let recorded = if stale {
            let others: Vec<LocationId> = scene
                .locations
                .iter()
                .map(|l| l.id)
                .filter(|&l| l != obj.location_id)
                .collect();
            *others.choose(rng).unwrap_or(&obj.location_id)
        } else {
            obj.location_id
        };
        out.push(MemorySeedEntry {
            object_id: obj.id,
            recorded_location_id: recorded,
            is_stale: recorded != obj.location_id,
        });
    }
    out
}

pub fn seed_memory<R: Rng + ?Sized>(
    scene: &SceneGraph,
    config: &MemoryConfig,
    rng: &mut R,
) -> Result<MemoryStore, MemoryError> {
    config.validate()?;
    let entries = seed_entries(scene, config, rng);
    MemoryStore::from_seed(scene, &entries)
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_seed(scene: &SceneGraph, entries: &[MemorySeedEntry]) -> Result<Self, MemoryError> {
        let mut facts = BTreeMap::new();
        for e in entries {
            let obj = scene.object(e.object_id)?;
            scene.location(e.recorded_location_id)?;
            facts.insert(
                obj.id,
                MemoryFact {
                    object_id: obj.id,
                    category: obj.category.clone(),
                    attributes: obj.attributes.clone(),
                    recorded_location_id: e.recorded_location_id,
                    stale: e.recorded_location_id != obj.location_id,
                    source: FactSource::Seed,
                },
            );
        }
        Ok(Self { facts })
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn get(&self, id: ObjectId) -> Option<&MemoryFact> {
        self.facts.get(&id)
    }

    pub fn facts(&self) -> impl Iterator<Item = &MemoryFact> {
        self.facts.values()
    }

    /// Fraction of scene objects the store knows anything about.
    pub fn coverage(&self, scene: &SceneGraph) -> f64 {
        if scene.objects.is_empty() {
            return 0.0;
        }
        self.facts.len() as f64 / scene.objects.len() as f64
    }

    /// Whether the stored fact already matches a direct observation of `obj`.
    pub fn is_current(&self, obj: &ObjectInstance) -> bool {
        self.facts.get(&obj.id).is_some_and(|f| {
            f.source == FactSource::Observed
                && !f.stale
                && f.recorded_location_id == obj.location_id
                && f.category == obj.category
                && f.attributes == obj.attributes
        })
    }

    /// Upsert what was seen. Returns how many facts changed.
    pub fn write_observation<'a, I>(&mut self, seen: I) -> usize
    where
        I: IntoIterator<Item = &'a ObjectInstance>,
    {
        let mut changed = 0;
        for obj in seen {
            let fact = MemoryFact::observed(obj);
            if self.facts.get(&obj.id) != Some(&fact) {
                self.facts.insert(obj.id, fact);
                changed += 1;
            }
        }
        changed
    }

    /// All facts matching `key`, in object id order.
    pub fn retrieve(&self, key: &MemoryKey) -> Vec<MemoryFact> {
        match key {
            MemoryKey::Object(id) => self.facts.get(id).cloned().into_iter().collect(),
            MemoryKey::Category(c) => self.facts.values().filter(|f| &f.category == c).cloned().collect(),
        }
    }
}
