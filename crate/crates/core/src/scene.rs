//! Semantic world model: locations, objects with attributes, and the
//! ambiguous search tasks layered on top of a scene.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version stamped into every persisted scene and task document.
pub const FORMAT_VERSION: u32 = 1;

/// Minimum and maximum size of an ambiguity set.
pub const MIN_CANDIDATES: usize = 2;
pub const MAX_CANDIDATES: usize = 5;

/// The eight colors of the attribute registry.
pub const COLORS: [&str; 8] = [
    "red", "orange", "yellow", "green", "blue", "purple", "black", "white",
];

/// The three sizes of the attribute registry.
pub const SIZES: [&str; 3] = ["small", "medium", "large"];

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("unknown location id {0}")]
    UnknownLocation(LocationId),
    #[error("unknown object id {0}")]
    UnknownObject(ObjectId),
    #[error("invalid scene {scene_id}: {reason}")]
    InvalidScene { scene_id: String, reason: String },
    #[error("task {task_id} does not validate against scene {scene_id}: {reason}")]
    InvalidTask {
        task_id: String,
        scene_id: String,
        reason: String,
    },
    #[error("unsupported format_version {found} (expected {FORMAT_VERSION})")]
    FormatVersion { found: u32 },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed document {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LocationId(pub u32);

impl fmt::Display for LocationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "O{}", self.0)
    }
}

/// Attribute kinds, in registry order. The order is load-bearing: it breaks
/// ties when the oracle picks the most discriminating attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    Color,
    Size,
    Landmark,
}

impl AttributeKind {
    pub const ALL: [AttributeKind; 3] = [AttributeKind::Color, AttributeKind::Size, AttributeKind::Landmark];

    pub fn as_str(self) -> &'static str {
        match self {
            AttributeKind::Color => "color",
            AttributeKind::Size => "size",
            AttributeKind::Landmark => "landmark",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "color" | "colour" => Some(AttributeKind::Color),
            "size" => Some(AttributeKind::Size),
            "landmark" | "nearest_landmark" | "nearest-landmark" => Some(AttributeKind::Landmark),
            _ => None,
        }
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub id: LocationId,
    /// Position in abstract meters.
    pub coords: [f64; 2],
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: ObjectId,
    pub category: String,
    pub attributes: BTreeMap<AttributeKind, String>,
    pub location_id: LocationId,
}

impl ObjectInstance {
    pub fn attribute(&self, kind: AttributeKind) -> Option<&str> {
        self.attributes.get(&kind).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub scene_id: String,
    pub locations: Vec<Location>,
    pub objects: Vec<ObjectInstance>,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];

    /// Easy iff 2 candidates, Medium iff 3, Hard iff 4 or more.
    pub fn from_candidate_count(n: usize) -> Self {
        match n {
            0..=2 => Difficulty::Easy,
            3 => Difficulty::Medium,
            _ => Difficulty::Hard,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One entry of a task's prior memory: where the agent last recorded an object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemorySeedEntry {
    pub object_id: ObjectId,
    pub recorded_location_id: LocationId,
    pub is_stale: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    pub scene_id: String,
    pub instruction: String,
    pub candidate_ids: Vec<ObjectId>,
    /// Hidden from the agent.
    pub gt_target_id: ObjectId,
    pub start_location_id: LocationId,
    pub difficulty: Difficulty,
    pub memory_seed: Vec<MemorySeedEntry>,
}

pub fn instruction_for(category: &str) -> String {
    format!("Find the {category}")
}

impl SceneGraph {
    pub fn location(&self, id: LocationId) -> Result<&Location, SceneError> {
        self.locations
            .iter()
            .find(|l| l.id == id)
            .ok_or(SceneError::UnknownLocation(id))
    }

    pub fn object(&self, id: ObjectId) -> Result<&ObjectInstance, SceneError> {
        self.objects
            .iter()
            .find(|o| o.id == id)
            .ok_or(SceneError::UnknownObject(id))
    }

    pub fn location_index(&self, id: LocationId) -> Result<usize, SceneError> {
        self.locations
            .iter()
            .position(|l| l.id == id)
            .ok_or(SceneError::UnknownLocation(id))
    }

    /// Objects resting at a location, sorted by id.
    pub fn objects_at(&self, id: LocationId) -> Vec<&ObjectInstance> {
        let mut v: Vec<&ObjectInstance> = self.objects.iter().filter(|o| o.location_id == id).collect();
        v.sort_by_key(|o| o.id);
        v
    }

    /// Largest pairwise location distance; used to normalize features.
    pub fn diameter(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (i, a) in self.locations.iter().enumerate() {
            for b in &self.locations[i + 1..] {
                best = best.max(euclid(a.coords, b.coords));
            }
        }
        best
    }

    pub fn categories(&self) -> BTreeSet<&str> {
        self.objects.iter().map(|o| o.category.as_str()).collect()
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |reason: String| SceneError::InvalidScene {
            scene_id: self.scene_id.clone(),
            reason,
        };
        if self.locations.len() < 2 {
            return Err(bad("fewer than 2 locations".into()));
        }
        let mut loc_ids = BTreeSet::new();
        for l in &self.locations {
            if !loc_ids.insert(l.id) {
                return Err(bad(format!("duplicate location id {}", l.id)));
            }
            if !l.coords.iter().all(|c| c.is_finite()) {
                return Err(bad(format!("non-finite coords at {}", l.id)));
            }
        }
        let mut obj_ids = BTreeSet::new();
        for o in &self.objects {
            if !obj_ids.insert(o.id) {
                return Err(bad(format!("duplicate object id {}", o.id)));
            }
            if o.category.is_empty() {
                return Err(bad(format!("object {} has empty category", o.id)));
            }
            if !loc_ids.contains(&o.location_id) {
                return Err(bad(format!("object {} references unknown location {}", o.id, o.location_id)));
            }
            for (kind, value) in &o.attributes {
                let ok = match kind {
                    AttributeKind::Color => COLORS.contains(&value.as_str()),
                    AttributeKind::Size => SIZES.contains(&value.as_str()),
                    AttributeKind::Landmark => self.locations.iter().any(|l| &l.name == value),
                };
                if !ok {
                    return Err(bad(format!("object {} has unregistered {kind} value {value:?}", o.id)));
                }
            }
        }
        Ok(())
    }
}

fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Euclidean distance between two locations of a scene.
pub fn distance(scene: &SceneGraph, a: LocationId, b: LocationId) -> Result<f64, SceneError> {
    let la = scene.location(a)?;
    let lb = scene.location(b)?;
    if a == b {
        return Ok(0.0);
    }
    Ok(euclid(la.coords, lb.coords))
}

/// Ids of every object of the given category, sorted by id.
pub fn candidates_of(scene: &SceneGraph, category: &str) -> Vec<ObjectId> {
    let mut ids: Vec<ObjectId> = scene
        .objects
        .iter()
        .filter(|o| o.category == category)
        .map(|o| o.id)
        .collect();
    ids.sort();
    ids
}

impl Task {
    /// The coarse category the instruction refers to.
    pub fn category<'s>(&self, scene: &'s SceneGraph) -> Result<&'s str, SceneError> {
        let first = self.candidate_ids.first().ok_or_else(|| SceneError::InvalidTask {
            task_id: self.task_id.clone(),
            scene_id: self.scene_id.clone(),
            reason: "empty candidate set".into(),
        })?;
        Ok(scene.object(*first)?.category.as_str())
    }

    pub fn validate(&self, scene: &SceneGraph) -> Result<(), SceneError> {
        let bad = |reason: String| SceneError::InvalidTask {
            task_id: self.task_id.clone(),
            scene_id: self.scene_id.clone(),
            reason,
        };
        if self.scene_id != scene.scene_id {
            return Err(bad(format!("task references scene {}", self.scene_id)));
        }
        let n = self.candidate_ids.len();
        if !(MIN_CANDIDATES..=MAX_CANDIDATES).contains(&n) {
            return Err(bad(format!("{n} candidates outside [{MIN_CANDIDATES}, {MAX_CANDIDATES}]")));
        }
        let unique: BTreeSet<_> = self.candidate_ids.iter().collect();
        if unique.len() != n {
            return Err(bad("duplicate candidate ids".into()));
        }
        if !self.candidate_ids.contains(&self.gt_target_id) {
            return Err(bad("ground-truth target is not a candidate".into()));
        }
        let category = &scene
            .object(self.candidate_ids[0])
            .map_err(|e| bad(e.to_string()))?
            .category;
        for id in &self.candidate_ids {
            let o = scene.object(*id).map_err(|e| bad(e.to_string()))?;
            if &o.category != category {
                return Err(bad(format!("candidate {id} has category {} not {category}", o.category)));
            }
        }
        if self.instruction != instruction_for(category) {
            return Err(bad(format!("instruction {:?} does not name {category}", self.instruction)));
        }
        scene
            .location(self.start_location_id)
            .map_err(|e| bad(e.to_string()))?;
        if self.difficulty != Difficulty::from_candidate_count(n) {
            return Err(bad(format!("difficulty {} inconsistent with {n} candidates", self.difficulty)));
        }
        for entry in &self.memory_seed {
            let o = scene.object(entry.object_id).map_err(|e| bad(e.to_string()))?;
            scene
                .location(entry.recorded_location_id)
                .map_err(|e| bad(e.to_string()))?;
            if entry.is_stale != (entry.recorded_location_id != o.location_id) {
                return Err(bad(format!("memory entry for {} has wrong staleness flag", o.id)));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct Versioned<T> {
    format_version: u32,
    #[serde(flatten)]
    body: T,
}

pub fn scene_to_string(scene: &SceneGraph) -> String {
    serde_json::to_string_pretty(&Versioned {
        format_version: FORMAT_VERSION,
        body: scene,
    })
    .expect("scene serializes")
}

pub fn task_to_string(task: &Task) -> String {
    serde_json::to_string_pretty(&Versioned {
        format_version: FORMAT_VERSION,
        body: task,
    })
    .expect("task serializes")
}

fn parse_versioned<T: for<'de> Deserialize<'de>>(text: &str, path: &str) -> Result<T, SceneError> {
    let v: Versioned<T> = serde_json::from_str(text).map_err(|source| SceneError::Parse {
        path: path.to_string(),
        source,
    })?;
    if v.format_version != FORMAT_VERSION {
        return Err(SceneError::FormatVersion {
            found: v.format_version,
        });
    }
    Ok(v.body)
}

pub fn scene_from_str(text: &str) -> Result<SceneGraph, SceneError> {
    parse_versioned(text, "<memory>")
}

pub fn task_from_str(text: &str) -> Result<Task, SceneError> {
    parse_versioned(text, "<memory>")
}

fn read(path: &Path) -> Result<String, SceneError> {
    std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), SceneError> {
    std::fs::write(path, text).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_scene(path: &Path) -> Result<SceneGraph, SceneError> {
    parse_versioned(&read(path)?, &path.display().to_string())
}

pub fn save_scene(path: &Path, scene: &SceneGraph) -> Result<(), SceneError> {
    write(path, &scene_to_string(scene))
}

pub fn load_task(path: &Path) -> Result<Task, SceneError> {
    parse_versioned(&read(path)?, &path.display().to_string())
}

pub fn save_task(path: &Path, task: &Task) -> Result<(), SceneError> {
    write(path, &task_to_string(task))
}
