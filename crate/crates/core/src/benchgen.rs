//! Procedural scenes and ambiguous tasks, split into training and test
//! sets with a set of object categories that only ever appear at test time.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::derive_seed;
use crate::memory::{seed_entries, MemoryConfig};
use crate::scene::{
    self, instruction_for, AttributeKind, Difficulty, Location, LocationId, ObjectId, ObjectInstance, SceneError,
    SceneGraph, Task, COLORS, MAX_CANDIDATES, MIN_CANDIDATES, SIZES,
};

pub const MANIFEST_VERSION: u32 = 1;
pub const MAX_RETRIES: usize = 100;

pub const CATEGORIES: [&str; 20] = [
    "mug", "book", "apple", "towel", "bottle", "pillow", "remote", "plate", "lamp", "vase", "bowl", "box",
    "spoon", "cup", "candle", "phone", "key", "pen", "sponge", "basket",
];
/// Categories reserved for test scenes.
pub const N_WITHHELD: usize = 3;

const PLACE_NAMES: [&str; 16] = [
    "kitchen counter", "workbench", "sink", "shelf", "sofa", "desk", "bed", "dining table", "window", "door",
    "cabinet", "fridge", "stove", "bookcase", "dresser", "armchair",
];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid benchmark configuration: {0}")]
    Config(String),
    #[error("scene {scene_id}: constraints unsatisfied after {MAX_RETRIES} attempts")]
    Unsatisfiable { scene_id: String },
    #[error("scene {scene_id} has no {size}-object cluster of an allowed category")]
    NoCluster { scene_id: String, size: usize },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("benchmark i/o at {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub n_train_scenes: usize,
    pub n_test_scenes: usize,
    /// Training tasks generated per training scene.
    pub tasks_per_scene: usize,
    pub n_test_tasks: usize,
    /// Inclusive range of locations per scene.
    pub locations_per_scene: (usize, usize),
    /// Inclusive range of extra single objects per scene.
    pub extra_objects: (usize, usize),
    /// Sizes of the same-category clusters placed in every scene.
    pub cluster_sizes: Vec<usize>,
    /// Relative weights of candidate counts 2, 3, 4, 5.
    pub candidate_count_weights: [f64; 4],
    pub unseen_category_fraction: f64,
    /// Side of the square the locations are scattered in, in meters.
    pub scene_diameter: f64,
    pub memory: MemoryConfig,
    pub master_seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl BenchConfig {
    pub fn desk() -> Self {
        Self {
            n_train_scenes: 40,
            n_test_scenes: 15,
            tasks_per_scene: 10,
            n_test_tasks: 200,
            locations_per_scene: (8, 12),
            extra_objects: (2, 4),
            cluster_sizes: vec![2, 3, 4, 5],
            candidate_count_weights: [1.0; 4],
            unseen_category_fraction: 0.15,
            scene_diameter: 0.25,
            memory: MemoryConfig::default(),
            master_seed: 2024,
        }
    }

    pub fn paper() -> Self {
        Self {
            n_train_scenes: 80,
            n_test_scenes: 30,
            tasks_per_scene: 10,
            n_test_tasks: 330,
            ..Self::desk()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "desk" => Some(Self::desk()),
            "paper" => Some(Self::paper()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        let (lo, hi) = self.locations_per_scene;
        if lo < 2 || lo > hi || hi > PLACE_NAMES.len() {
            return bad(format!("locations_per_scene {lo}..={hi} must lie in 2..={}", PLACE_NAMES.len()));
        }
        if self.extra_objects.0 > self.extra_objects.1 {
            return bad("extra_objects range is inverted".into());
        }
        if self.cluster_sizes.is_empty() {
            return bad("at least one cluster size is required".into());
        }
        for &s in &self.cluster_sizes {
            if !(MIN_CANDIDATES..=MAX_CANDIDATES).contains(&s) {
                return bad(format!("cluster size {s} outside {MIN_CANDIDATES}..={MAX_CANDIDATES}"));
            }
            if s > lo {
                return bad(format!("cluster size {s} exceeds the minimum location count {lo}"));
            }
        }
        if self.cluster_sizes.len() + N_WITHHELD > CATEGORIES.len() - self.extra_objects.1 {
            return bad("too many clusters for the category vocabulary".into());
        }
        let w = &self.candidate_count_weights;
        if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return bad("candidate count weights must be finite and nonnegative".into());
        }
        let usable: f64 = (0..4)
            .filter(|i| self.cluster_sizes.contains(&(i + 2)))
            .map(|i| w[i])
            .sum();
        if !(usable > 0.0) {
            return bad("no candidate count with positive weight has a cluster size".into());
        }
        if !(0.0..=1.0).contains(&self.unseen_category_fraction) {
            return bad(format!("unseen_category_fraction {} outside [0, 1]", self.unseen_category_fraction));
        }
        if !(self.scene_diameter > 0.0) || !self.scene_diameter.is_finite() {
            return bad(format!("scene_diameter {} must be positive", self.scene_diameter));
        }
        if self.n_train_scenes == 0 || self.n_test_scenes == 0 {
            return bad("both splits need at least one scene".into());
        }
        self.memory
            .validate()
            .map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn seen_categories() -> &'static [&'static str] {
        &CATEGORIES[..CATEGORIES.len() - N_WITHHELD]
    }

    pub fn withheld_categories() -> &'static [&'static str] {
        &CATEGORIES[CATEGORIES.len() - N_WITHHELD..]
    }

    fn draw_count<R: Rng>(&self, rng: &mut R) -> usize {
        let weights: Vec<f64> = (0..4)
            .map(|i| {
                if self.cluster_sizes.contains(&(i + 2)) {
                    self.candidate_count_weights[i]
                } else {
                    0.0
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.gen::<f64>() * total;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                return i + 2;
            }
            u -= w;
        }
        weights.iter().rposition(|w| *w > 0.0).unwrap() + 2
    }
}

/// Name of the location nearest to `at` other than itself; ties go to the
/// lower id.
pub fn nearest_landmark(locations: &[Location], at: LocationId) -> String {
    let here = locations.iter().find(|l| l.id == at).expect("location exists");
    locations
        .iter()
        .filter(|l| l.id != at)
        .min_by(|a, b| {
            let da = (a.coords[0] - here.coords[0]).hypot(a.coords[1] - here.coords[1]);
            let db = (b.coords[0] - here.coords[0]).hypot(b.coords[1] - here.coords[1]);
            da.total_cmp(&db).then(a.id.cmp(&b.id))
        })
        .map(|l| l.name.clone())
        .unwrap_or_default()
}

/// True when every member is the only one in the group with its value of
/// some attribute kind.
pub fn uniquely_identifiable(members: &[&ObjectInstance]) -> bool {
    members.iter().all(|m| {
        AttributeKind::ALL.iter().any(|k| {
            members
                .iter()
                .filter(|o| o.id != m.id)
                .all(|o| o.attribute(*k) != m.attribute(*k))
        })
    })
}

/// Generate one scene with a cluster of each configured size per category in
/// `cluster_categories`, plus single objects of `extra_categories`.
pub fn generate_scene<R: Rng>(
    config: &BenchConfig,
    scene_id: &str,
    cluster_plan: &[(&str, usize)],
    extra_categories: &[&str],
    rng_seed: u64,
    rng: &mut R,
) -> Result<SceneGraph, BenchError> {
    let (lo, hi) = config.locations_per_scene;
    for _ in 0..MAX_RETRIES {
        let n_loc = rng.gen_range(lo..=hi);
        let mut names: Vec<&str> = PLACE_NAMES.to_vec();
        names.shuffle(rng);
        let locations: Vec<Location> = (0..n_loc)
            .map(|i| Location {
                id: LocationId(i as u32),
                coords: [rng.gen_range(0.0..config.scene_diameter), rng.gen_range(0.0..config.scene_diameter)],
                name: names[i].to_string(),
            })
            .collect();
        let mut objects = Vec::new();
        let mut ok = true;
        for (category, size) in cluster_plan {
            let mut placed = false;
            for _ in 0..MAX_RETRIES {
                let mut locs: Vec<LocationId> = locations.iter().map(|l| l.id).collect();
                locs.shuffle(rng);
                let members: Vec<ObjectInstance> = (0..*size)
                    .map(|j| make_object(ObjectId((objects.len() + j) as u32), category, locs[j], &locations, rng))
                    .collect();
                let refs: Vec<&ObjectInstance> = members.iter().collect();
                if uniquely_identifiable(&refs) {
                    objects.extend(members);
                    placed = true;
                    break;
                }
            }
            if !placed {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }
        for category in extra_categories {
            let at = LocationId(rng.gen_range(0..n_loc) as u32);
            let id = ObjectId(objects.len() as u32);
            objects.push(make_object(id, category, at, &locations, rng));
        }
        let scene = SceneGraph {
            scene_id: scene_id.to_string(),
            locations,
            objects,
            rng_seed,
        };
        scene.validate()?;
        return Ok(scene);
    }
    Err(BenchError::Unsatisfiable {
        scene_id: scene_id.to_string(),
    })
}

fn make_object<R: Rng>(id: ObjectId, category: &str, at: LocationId, locations: &[Location], rng: &mut R) -> ObjectInstance {
    let attributes = BTreeMap::from([
        (AttributeKind::Color, COLORS[rng.gen_range(0..COLORS.len())].to_string()),
        (AttributeKind::Size, SIZES[rng.gen_range(0..SIZES.len())].to_string()),
        (AttributeKind::Landmark, nearest_landmark(locations, at)),
    ]);
    ObjectInstance {
        id,
        category: category.to_string(),
        attributes,
        location_id: at,
    }
}

/// Turn a cluster of the requested size into a task. With `categories`
/// given, only clusters of those categories qualify.
pub fn inject_ambiguity<R: Rng>(
    scene: &SceneGraph,
    count: usize,
    categories: Option<&[&str]>,
    task_id: &str,
    memory: &MemoryConfig,
    rng: &mut R,
) -> Result<Task, BenchError> {
    let mut clusters: Vec<&str> = scene
        .categories()
        .into_iter()
        .filter(|c| scene::candidates_of(scene, c).len() == count)
        .filter(|c| categories.map_or(true, |allowed| allowed.contains(c)))
        .collect();
    clusters.sort();
    let Some(category) = clusters.choose(rng).copied() else {
        return Err(BenchError::NoCluster {
            scene_id: scene.scene_id.clone(),
            size: count,
        });
    };
    let candidate_ids = scene::candidates_of(scene, category);
    let gt = *candidate_ids.choose(rng).unwrap();
    let occupied: Vec<LocationId> = candidate_ids
        .iter()
        .map(|id| scene.object(*id).unwrap().location_id)
        .collect();
    let starts: Vec<LocationId> = scene
        .locations
        .iter()
        .map(|l| l.id)
        .filter(|l| !occupied.contains(l))
        .collect();
    let start = match starts.choose(rng) {
        Some(s) => *s,
        None => scene.locations.choose(rng).unwrap().id,
    };
    let memory_seed = seed_entries(scene, memory, rng);
    let task = Task {
        task_id: task_id.to_string(),
        scene_id: scene.scene_id.clone(),
        instruction: instruction_for(category),
        candidate_ids,
        gt_target_id: gt,
        start_location_id: start,
        difficulty: Difficulty::from_candidate_count(count),
        memory_seed,
    };
    task.validate(scene)?;
    Ok(task)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub master_seed: u64,
    pub config: BenchConfig,
    pub train_scene_ids: Vec<String>,
    pub test_scene_ids: Vec<String>,
    pub train_task_ids: Vec<String>,
    pub test_task_ids: Vec<String>,
    pub unseen_test_task_ids: Vec<String>,
    pub withheld_categories: Vec<String>,
    pub train_difficulty: BTreeMap<Difficulty, usize>,
    pub test_difficulty: BTreeMap<Difficulty, usize>,
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub manifest: Manifest,
    pub scenes: BTreeMap<String, Arc<SceneGraph>>,
    pub train: Vec<Arc<Task>>,
    pub test: Vec<Arc<Task>>,
}

impl Benchmark {
    pub fn scene_of(&self, task: &Task) -> Arc<SceneGraph> {
        self.scenes[&task.scene_id].clone()
    }

    pub fn pairs(&self, tasks: &[Arc<Task>]) -> Vec<(Arc<SceneGraph>, Arc<Task>)> {
        tasks.iter().map(|t| (self.scene_of(t), t.clone())).collect()
    }

    pub fn train_pairs(&self) -> Vec<(Arc<SceneGraph>, Arc<Task>)> {
        self.pairs(&self.train)
    }

    pub fn test_pairs(&self) -> Vec<(Arc<SceneGraph>, Arc<Task>)> {
        self.pairs(&self.test)
    }
}

fn histogram(tasks: &[Arc<Task>]) -> BTreeMap<Difficulty, usize> {
    let mut h: BTreeMap<Difficulty, usize> = Difficulty::ALL.iter().map(|d| (*d, 0)).collect();
    for t in tasks {
        *h.entry(t.difficulty).or_default() += 1;
    }
    h
}

pub fn build_benchmark(config: &BenchConfig) -> Result<Benchmark, BenchError> {
    config.validate()?;
    let seen = BenchConfig::seen_categories();
    let withheld = BenchConfig::withheld_categories();
    let master = config.master_seed;

    let make_scene = |split: &str, i: usize, with_withheld: bool| -> Result<SceneGraph, BenchError> {
        let seed = derive_seed(master, if split == "train" { 1_000 + i as u64 } else { 2_000 + i as u64 });
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cats: Vec<&str> = seen.to_vec();
        cats.shuffle(&mut rng);
        let n_clusters = config.cluster_sizes.len();
        let mut plan: Vec<(&str, usize)> = config.cluster_sizes.iter().enumerate().map(|(j, s)| (cats[j], *s)).collect();
        if with_withheld {
            let mut sizes = config.cluster_sizes.clone();
            sizes.shuffle(&mut rng);
            plan.extend(withheld.iter().copied().zip(sizes));
        }
        let n_extra = rng.gen_range(config.extra_objects.0..=config.extra_objects.1);
        let extras: Vec<&str> = cats[n_clusters..n_clusters + n_extra].to_vec();
        generate_scene(config, &format!("{split}-scene-{i:03}"), &plan, &extras, seed, &mut rng)
    };

    let train_scenes: Vec<SceneGraph> = (0..config.n_train_scenes)
        .into_par_iter()
        .map(|i| make_scene("train", i, false))
        .collect::<Result<_, _>>()?;
    let test_scenes: Vec<SceneGraph> = (0..config.n_test_scenes)
        .into_par_iter()
        .map(|i| make_scene("test", i, true))
        .collect::<Result<_, _>>()?;

    let train: Vec<Arc<Task>> = train_scenes
        .par_iter()
        .enumerate()
        .map(|(i, scene)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master, 3_000 + i as u64));
            (0..config.tasks_per_scene)
                .map(|j| {
                    let count = config.draw_count(&mut rng);
                    let id = format!("train-{i:03}-{j:02}");
                    inject_ambiguity(scene, count, Some(seen), &id, &config.memory, &mut rng).map(Arc::new)
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut split_rng = ChaCha8Rng::seed_from_u64(derive_seed(master, 4_000));
    let n_unseen = (config.unseen_category_fraction * config.n_test_tasks as f64).round() as usize;
    let mut unseen_flags: Vec<bool> = (0..config.n_test_tasks).map(|i| i < n_unseen).collect();
    unseen_flags.shuffle(&mut split_rng);
    let test: Vec<Arc<Task>> = unseen_flags
        .par_iter()
        .enumerate()
        .map(|(k, unseen)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master, 5_000 + k as u64));
            let count = config.draw_count(&mut rng);
            let allowed = if *unseen { withheld } else { seen };
            // Withheld clusters do not cover every size in every scene, so
            // walk forward from this task's home scene to one that has it.
            let n = test_scenes.len();
            let scene = (0..n)
                .map(|d| &test_scenes[(k + d) % n])
                .find(|s| {
                    s.categories()
                        .into_iter()
                        .any(|c| allowed.contains(&c) && scene::candidates_of(s, c).len() == count)
                })
                .unwrap_or(&test_scenes[k % n]);
            inject_ambiguity(scene, count, Some(allowed), &format!("test-{k:04}"), &config.memory, &mut rng)
                .map(Arc::new)
        })
        .collect::<Result<_, _>>()?;

    let unseen_test_task_ids = test
        .iter()
        .zip(&unseen_flags)
        .filter(|(_, u)| **u)
        .map(|(t, _)| t.task_id.clone())
        .collect();
    let manifest = Manifest {
        format_version: MANIFEST_VERSION,
        master_seed: master,
        config: config.clone(),
        train_scene_ids: train_scenes.iter().map(|s| s.scene_id.clone()).collect(),
        test_scene_ids: test_scenes.iter().map(|s| s.scene_id.clone()).collect(),
        train_task_ids: train.iter().map(|t| t.task_id.clone()).collect(),
        test_task_ids: test.iter().map(|t| t.task_id.clone()).collect(),
        unseen_test_task_ids,
        withheld_categories: withheld.iter().map(|s| s.to_string()).collect(),
        train_difficulty: histogram(&train),
        test_difficulty: histogram(&test),
    };
    let scenes = train_scenes
        .into_iter()
        .chain(test_scenes)
        .map(|s| (s.scene_id.clone(), Arc::new(s)))
        .collect();
    Ok(Benchmark {
        manifest,
        scenes,
        train,
        test,
    })
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> BenchError {
    BenchError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn save_benchmark(bench: &Benchmark, dir: &Path) -> Result<(), BenchError> {
    let scenes_dir = dir.join("scenes");
    let tasks_dir = dir.join("tasks");
    fs::create_dir_all(&scenes_dir).map_err(|e| io_err(&scenes_dir, e))?;
    fs::create_dir_all(&tasks_dir).map_err(|e| io_err(&tasks_dir, e))?;
    for scene in bench.scenes.values() {
        scene::save_scene(&scenes_dir.join(format!("{}.json", scene.scene_id)), scene)?;
    }
    for task in bench.train.iter().chain(&bench.test) {
        scene::save_task(&tasks_dir.join(format!("{}.json", task.task_id)), task)?;
    }
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&bench.manifest).map_err(|e| io_err(&path, e))?;
    fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
    Ok(())
}

pub fn load_benchmark(dir: &Path) -> Result<Benchmark, BenchError> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| io_err(&path, e))?;
    if manifest.format_version != MANIFEST_VERSION {
        return Err(io_err(&path, format!("unsupported manifest format_version {}", manifest.format_version)));
    }
    let mut scenes = BTreeMap::new();
    for id in manifest.train_scene_ids.iter().chain(&manifest.test_scene_ids) {
        let s = scene::load_scene(&dir.join("scenes").join(format!("{id}.json")))?;
        s.validate()?;
        scenes.insert(id.clone(), Arc::new(s));
    }
    let load = |ids: &[String]| -> Result<Vec<Arc<Task>>, BenchError> {
        ids.iter()
            .map(|id| {
                let t = scene::load_task(&dir.join("tasks").join(format!("{id}.json")))?;
                let s = scenes.get(&t.scene_id).ok_or_else(|| {
                    io_err(dir, format!("task {id} references scene {} not in the manifest", t.scene_id))
                })?;
                t.validate(s)?;
                Ok(Arc::new(t))
            })
            .collect()
    };
    let train = load(&manifest.train_task_ids)?;
    let test = load(&manifest.test_task_ids)?;
    Ok(Benchmark {
        manifest,
        scenes,
        train,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn small() -> BenchConfig {
        BenchConfig {
            n_train_scenes: 6,
            n_test_scenes: 3,
            tasks_per_scene: 5,
            n_test_tasks: 40,
            ..BenchConfig::desk()
        }
    }

    #[test]
    fn scenes_valid_and_clusters_identifiable() {
        let b = build_benchmark(&small()).unwrap();
        for scene in b.scenes.values() {
            scene.validate().unwrap();
            for cat in scene.categories() {
                let ids = scene::candidates_of(scene, cat);
                let members: Vec<&ObjectInstance> = ids.iter().map(|i| scene.object(*i).unwrap()).collect();
                if members.len() >= 2 {
                    // brute-force pairwise check
                    for m in &members {
                        let unique = AttributeKind::ALL.iter().any(|k| {
                            members.iter().all(|o| o.id == m.id || o.attribute(*k) != m.attribute(*k))
                        });
                        assert!(unique, "{} in {}", m.id, scene.scene_id);
                    }
                    let locs: BTreeSet<_> = members.iter().map(|m| m.location_id).collect();
                    assert_eq!(locs.len(), members.len());
                }
            }
        }
    }

    #[test]
    fn landmark_is_nearest_other_location() {
        let b = build_benchmark(&small()).unwrap();
        for scene in b.scenes.values() {
            for o in &scene.objects {
                let here = scene.location(o.location_id).unwrap();
                let best = scene
                    .locations
                    .iter()
                    .filter(|l| l.id != here.id)
                    .map(|l| scene::distance(scene, here.id, l.id).unwrap())
                    .fold(f64::INFINITY, f64::min);
                let named = scene.locations.iter().find(|l| Some(l.name.as_str()) == o.attribute(AttributeKind::Landmark)).unwrap();
                assert_eq!(scene::distance(scene, here.id, named.id).unwrap(), best);
            }
        }
    }

    #[test]
    fn same_seed_same_scene() {
        let c = small();
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let plan = [("mug", 3), ("book", 2)];
        let a = generate_scene(&c, "s", &plan, &["lamp"], 9, &mut r1).unwrap();
        let b = generate_scene(&c, "s", &plan, &["lamp"], 9, &mut r2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn difficulty_follows_count() {
        let c = small();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scene = generate_scene(&c, "s", &[("mug", 2), ("book", 5)], &[], 1, &mut rng).unwrap();
        let t2 = inject_ambiguity(&scene, 2, None, "a", &c.memory, &mut rng).unwrap();
        assert_eq!(t2.difficulty, Difficulty::Easy);
        let t5 = inject_ambiguity(&scene, 5, None, "b", &c.memory, &mut rng).unwrap();
        assert_eq!(t5.difficulty, Difficulty::Hard);
        assert!(inject_ambiguity(&scene, 3, None, "c", &c.memory, &mut rng).is_err());
        let occupied: Vec<_> = t5.candidate_ids.iter().map(|i| scene.object(*i).unwrap().location_id).collect();
        assert!(!occupied.contains(&t5.start_location_id));
        assert_eq!(t5.instruction, "Find the book");
    }

    #[test]
    fn gt_is_uniform_over_cluster() {
        let c = small();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let scene = generate_scene(&c, "s", &[("mug", 4)], &[], 2, &mut rng).unwrap();
        let n = 10_000;
        let mut counts: BTreeMap<ObjectId, usize> = BTreeMap::new();
        let mem = MemoryConfig { p_cover: 0.0, p_stale: 0.0 };
        for _ in 0..n {
            *counts.entry(inject_ambiguity(&scene, 4, None, "t", &mem, &mut rng).unwrap().gt_target_id).or_default() += 1;
        }
        let p = 0.25;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert_eq!(counts.len(), 4);
        for c in counts.values() {
            assert!((*c as f64 - n as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn splits_disjoint_and_unseen_audit() {
        let b = build_benchmark(&small()).unwrap();
        let train: BTreeSet<_> = b.manifest.train_scene_ids.iter().collect();
        assert!(b.manifest.test_scene_ids.iter().all(|s| !train.contains(s)));
        let train_cats: BTreeSet<String> = b
            .manifest
            .train_scene_ids
            .iter()
            .flat_map(|id| b.scenes[id].categories().into_iter().map(String::from).collect::<Vec<_>>())
            .collect();
        let unseen: BTreeSet<_> = b.manifest.unseen_test_task_ids.iter().collect();
        assert_eq!(unseen.len(), 6);
        for t in &b.test {
            let cat = t.category(&b.scene_of(t)).unwrap().to_string();
            assert_eq!(unseen.contains(&t.task_id), !train_cats.contains(&cat), "{}", t.task_id);
        }
    }

    #[test]
    fn regenerates_byte_identically_and_round_trips() {
        let c = small();
        let a = build_benchmark(&c).unwrap();
        let b = build_benchmark(&a.manifest.config).unwrap();
        for (x, y) in a.test.iter().zip(&b.test) {
            assert_eq!(scene::task_to_string(x), scene::task_to_string(y));
        }
        let dir = tempfile::tempdir().unwrap();
        save_benchmark(&a, dir.path()).unwrap();
        let back = load_benchmark(dir.path()).unwrap();
        assert_eq!(back.manifest, a.manifest);
        assert_eq!(back.train.len(), a.train.len());
        for (x, y) in back.train.iter().zip(&a.train) {
            assert_eq!(x, y);
        }
    }
}
