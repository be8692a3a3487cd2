//! The episode engine: executes actions, prices them, tracks what the agent
//! knows, and decides when an episode ends.
//!
//! The agent never sees the ground-truth target. It learns candidate
//! locations only by looking (a candidate standing at a visited location is
//! *verified*) or by recalling memory (a *recorded* location, which may be
//! stale). Useful oracle replies prune the candidate set; nothing else does.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{action_cost, trajectory_return, ActionKind, CostError, CostParams, Outcome, StepRecord, Trajectory};
use crate::memory::{MemoryError, MemoryFact, MemoryKey, MemoryStore};
pub use crate::oracle::Query;
use crate::oracle::{OracleConfig, OracleError, OracleReply, OracleState};
use crate::policy::{Policy, PolicyError};
use crate::scene::{
    distance, AttributeKind, Difficulty, LocationId, ObjectId, ObjectInstance, SceneError, SceneGraph, Task,
};
use crate::derive_seed;

pub const DEFAULT_HORIZON: u32 = 12;
/// Version stamp of the line-delimited episode log.
pub const LOG_FORMAT_VERSION: u32 = 1;
/// Consecutive malformed actions that end an episode.
pub const MAX_FORMAT_STRIKES: u32 = 2;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("episode for task {0} is already over")]
    Done(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error("policy failed on task {task_id} (seed {seed}): {source}")]
    Policy {
        task_id: String,
        seed: u64,
        #[source]
        source: PolicyError,
    },
    #[error("invalid environment configuration: {0}")]
    Config(String),
    #[error("log i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("log line {line}: {message}")]
    Log { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    Navigate { location: LocationId },
    Ask { query: Query },
    GetMemory { key: MemoryKey },
    Found { object: ObjectId },
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Navigate { .. } => ActionKind::Navigate,
            Action::Ask { .. } => ActionKind::Ask,
            Action::GetMemory { .. } => ActionKind::GetMemory,
            Action::Found { .. } => ActionKind::Found,
        }
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Action::Navigate { location } => write!(f, "Navigate({location})"),
            Action::Ask { query } => write!(f, "Ask({query})"),
            Action::GetMemory { key } => write!(f, "GetMemory({key})"),
            Action::Found { object } => write!(f, "Found({object})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub cost: CostParams,
    pub oracle: OracleConfig,
    /// Maximum number of decisions per episode.
    pub horizon: u32,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            cost: CostParams::default(),
            oracle: OracleConfig::default(),
            horizon: DEFAULT_HORIZON,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        self.cost.validate()?;
        self.oracle.validate()?;
        if self.horizon == 0 {
            return Err(EnvError::Config("horizon must be at least 1".into()));
        }
        Ok(())
    }
}

/// Where the agent thinks a candidate is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "status", content = "location", rename_all = "snake_case")]
pub enum LocationBelief {
    /// Seen there.
    Verified(LocationId),
    /// Memory says so; may be stale.
    Recorded(LocationId),
    Unknown,
}

impl LocationBelief {
    pub fn location(self) -> Option<LocationId> {
        match self {
            LocationBelief::Verified(l) | LocationBelief::Recorded(l) => Some(l),
            LocationBelief::Unknown => None,
        }
    }

    pub fn is_verified(self) -> bool {
        matches!(self, LocationBelief::Verified(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeliefState {
    /// Candidates still consistent with everything learned, sorted by id.
    pub remaining: Vec<ObjectId>,
    pub agent_location: LocationId,
    pub n_asks: u32,
    pub n_mems: u32,
    pub known_attributes: BTreeMap<AttributeKind, String>,
    pub steps_elapsed: u32,
    pub format_strikes: u32,
    pub visited: BTreeSet<LocationId>,
    /// Candidate locations recalled from memory.
    pub recalled: BTreeMap<ObjectId, LocationId>,
    pub memory_queried: bool,
    pub last_ask_useful: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibleObject {
    pub id: ObjectId,
    pub category: String,
    pub attributes: BTreeMap<AttributeKind, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateView {
    pub id: ObjectId,
    pub location: LocationBelief,
    /// Distance from the agent to the believed location, when one is known.
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceView {
    pub id: LocationId,
    pub name: String,
    pub distance: f64,
}

/// Everything the agent is allowed to see at a decision point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub instruction: String,
    pub category: String,
    pub agent_location: LocationId,
    pub visible_objects: Vec<VisibleObject>,
    pub last_reply: Option<OracleReply>,
    pub last_memory: Option<Vec<MemoryFact>>,
    /// Remaining candidates sorted by (location known first, distance, id).
    pub candidates: Vec<CandidateView>,
    pub initial_candidates: usize,
    /// Unvisited locations sorted by (distance, id).
    pub unvisited: Vec<PlaceView>,
    pub known_attributes: BTreeMap<AttributeKind, String>,
    pub n_asks: u32,
    pub n_mems: u32,
    pub memory_queried: bool,
    pub last_ask_useful: Option<bool>,
    pub steps_elapsed: u32,
    pub horizon: u32,
    pub format_strikes: u32,
    pub scene_diameter: f64,
}

impl Observation {
    pub fn summary(&self) -> String {
        let mut s = format!("at {}; {} candidate(s) left", self.agent_location, self.candidates.len());
        if let Some(r) = &self.last_reply {
            s.push_str(&format!("; reply: {}", r.text));
        }
        if let Some(m) = &self.last_memory {
            s.push_str(&format!("; recalled {} fact(s)", m.len()));
        }
        s
    }

    /// Candidates verified to stand at the agent's location.
    pub fn colocated(&self) -> impl Iterator<Item = &CandidateView> {
        self.candidates
            .iter()
            .filter(move |c| c.location == LocationBelief::Verified(self.agent_location))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub cost: f64,
    pub done: bool,
    pub outcome: Option<Outcome>,
    /// Why the engine rejected the action, if it did.
    pub malformed: Option<String>,
}

/// One episode. Cheap to clone, which planners rely on to explore branches.
#[derive(Debug, Clone)]
pub struct Episode {
    scene: Arc<SceneGraph>,
    task: Arc<Task>,
    config: EnvConfig,
    category: Arc<str>,
    oracle: OracleState,
    memory: Arc<MemoryStore>,
    belief: BeliefState,
    gt_location: LocationId,
    last_reply: Option<OracleReply>,
    last_memory: Option<Arc<Vec<MemoryFact>>>,
    total_cost: f64,
    outcome: Option<Outcome>,
}

impl Episode {
    pub fn reset(
        scene: Arc<SceneGraph>,
        task: Arc<Task>,
        config: EnvConfig,
        seed: u64,
    ) -> Result<(Self, Observation), EnvError> {
        config.validate()?;
        task.validate(&scene)?;
        let category: Arc<str> = task.category(&scene)?.into();
        let target = scene.object(task.gt_target_id)?.clone();
        let gt_location = target.location_id;
        let memory = Arc::new(MemoryStore::from_seed(&scene, &task.memory_seed)?);
        let mut remaining = task.candidate_ids.clone();
        remaining.sort();
        let belief = BeliefState {
            remaining,
            agent_location: task.start_location_id,
            n_asks: 0,
            n_mems: 0,
            known_attributes: BTreeMap::new(),
            steps_elapsed: 0,
            format_strikes: 0,
            visited: BTreeSet::new(),
            recalled: BTreeMap::new(),
            memory_queried: false,
            last_ask_useful: None,
        };
        let mut ep = Self {
            oracle: OracleState::new(target, config.oracle, derive_seed(seed, 1)),
            scene,
            task,
            config,
            category,
            memory,
            belief,
            gt_location,
            last_reply: None,
            last_memory: None,
            total_cost: 0.0,
            outcome: None,
        };
        ep.look_around();
        let obs = ep.observation();
        Ok((ep, obs))
    }

    pub fn scene(&self) -> &SceneGraph {
        &self.scene
    }

    pub fn task(&self) -> &Task {
        &self.task
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn belief(&self) -> &BeliefState {
        &self.belief
    }

    pub fn memory(&self) -> &MemoryStore {
        &self.memory
    }

    pub fn oracle(&self) -> &OracleState {
        &self.oracle
    }

    pub fn oracle_mut(&mut self) -> &mut OracleState {
        &mut self.oracle
    }

    pub fn total_cost(&self) -> f64 {
        self.total_cost
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    pub fn is_done(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn category(&self) -> &str {
        &self.category
    }

    /// Rebind the hidden target. Planners use this to evaluate what would
    /// happen under each hypothesis; the candidate set is left untouched.
    pub fn assume_target(&mut self, target: ObjectId) -> Result<(), EnvError> {
        let obj = self.scene.object(target)?.clone();
        self.gt_location = obj.location_id;
        self.oracle.retarget(obj);
        Ok(())
    }

    fn look_around(&mut self) {
        let here = self.belief.agent_location;
        self.belief.visited.insert(here);
        let seen = self.scene.objects_at(here);
        if !seen.iter().all(|o| self.memory.is_current(o)) {
            Arc::make_mut(&mut self.memory).write_observation(seen);
        }
    }

    pub fn believed_location(&self, id: ObjectId) -> LocationBelief {
        let Ok(obj) = self.scene.object(id) else {
            return LocationBelief::Unknown;
        };
        if self.belief.visited.contains(&obj.location_id) {
            return LocationBelief::Verified(obj.location_id);
        }
        match self.belief.recalled.get(&id) {
            Some(r) if !self.belief.visited.contains(r) => LocationBelief::Recorded(*r),
            _ => LocationBelief::Unknown,
        }
    }

    fn dist(&self, a: LocationId, b: LocationId) -> f64 {
        distance(&self.scene, a, b).unwrap_or(f64::INFINITY)
    }

    pub fn observation(&self) -> Observation {
        let here = self.belief.agent_location;
        let visible_objects = self
            .scene
            .objects_at(here)
            .into_iter()
            .map(|o| VisibleObject {
                id: o.id,
                category: o.category.clone(),
                attributes: o.attributes.clone(),
            })
            .collect();
        let mut candidates: Vec<CandidateView> = self
            .belief
            .remaining
            .iter()
            .map(|&id| {
                let location = self.believed_location(id);
                CandidateView {
                    id,
                    location,
                    distance: location.location().map(|l| self.dist(here, l)),
                }
            })
            .collect();
        candidates.sort_by(|a, b| {
            a.distance
                .is_none()
                .cmp(&b.distance.is_none())
                .then(a.distance.unwrap_or(0.0).total_cmp(&b.distance.unwrap_or(0.0)))
                .then(a.id.cmp(&b.id))
        });
        let mut unvisited: Vec<PlaceView> = self
            .scene
            .locations
            .iter()
            .filter(|l| !self.belief.visited.contains(&l.id))
            .map(|l| PlaceView {
                id: l.id,
                name: l.name.clone(),
                distance: self.dist(here, l.id),
            })
            .collect();
        unvisited.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id)));
        Observation {
            instruction: self.task.instruction.clone(),
            category: self.category.to_string(),
            agent_location: here,
            visible_objects,
            last_reply: self.last_reply.clone(),
            last_memory: self.last_memory.as_deref().cloned(),
            candidates,
            initial_candidates: self.task.candidate_ids.len(),
            unvisited,
            known_attributes: self.belief.known_attributes.clone(),
            n_asks: self.belief.n_asks,
            n_mems: self.belief.n_mems,
            memory_queried: self.belief.memory_queried,
            last_ask_useful: self.belief.last_ask_useful,
            steps_elapsed: self.belief.steps_elapsed,
            horizon: self.config.horizon,
            format_strikes: self.belief.format_strikes,
            scene_diameter: self.scene.diameter(),
        }
    }

    fn remaining_objects(&self) -> Vec<&ObjectInstance> {
        self.belief
            .remaining
            .iter()
            .filter_map(|id| self.scene.object(*id).ok())
            .collect()
    }

    fn check_active(&self) -> Result<(), EnvError> {
        if self.outcome.is_some() {
            return Err(EnvError::Done(self.task.task_id.clone()));
        }
        Ok(())
    }

    /// Why `action` cannot be executed, if it cannot.
    fn malformed_reason(&self, action: &Action) -> Option<String> {
        match action {
            Action::Navigate { location } => self
                .scene
                .location(*location)
                .err()
                .map(|e| format!("{action}: {e}")),
            Action::Found { object } => self.scene.object(*object).err().map(|e| format!("{action}: {e}")),
            Action::GetMemory { key: MemoryKey::Object(o) } => {
                self.scene.object(*o).err().map(|e| format!("{action}: {e}"))
            }
            Action::GetMemory { key: MemoryKey::Category(c) } if c.trim().is_empty() => {
                Some(format!("{action}: empty memory key"))
            }
            _ => None,
        }
    }

    /// Execute an action with the simulated oracle.
    pub fn step(&mut self, action: &Action) -> Result<StepResult, EnvError> {
        self.step_with_reply(action, None)
    }

    /// Execute an action; an `Ask` uses `reply` instead of the simulated
    /// oracle when one is given.
    pub fn step_with_reply(&mut self, action: &Action, reply: Option<OracleReply>) -> Result<StepResult, EnvError> {
        self.check_active()?;
        if let Some(reason) = self.malformed_reason(action) {
            return self.reject(&reason);
        }
        let cost = self.apply(action, reply)?;
        Ok(StepResult {
            observation: self.observation(),
            cost,
            done: self.outcome.is_some(),
            outcome: self.outcome,
            malformed: None,
        })
    }

    /// Charge for an action the engine could not interpret. The second
    /// consecutive one ends the episode as a failure.
    pub fn reject(&mut self, reason: &str) -> Result<StepResult, EnvError> {
        self.check_active()?;
        let cost = self.config.cost.c_format;
        self.total_cost += cost;
        self.belief.format_strikes += 1;
        if self.belief.format_strikes >= MAX_FORMAT_STRIKES {
            self.finish(Outcome::Failure);
        } else {
            self.tick();
        }
        Ok(StepResult {
            observation: self.observation(),
            cost,
            done: self.outcome.is_some(),
            outcome: self.outcome,
            malformed: Some(reason.to_string()),
        })
    }

    /// State transition for a well-formed action; returns its cost. Does not
    /// build an observation.
    pub fn apply(&mut self, action: &Action, reply: Option<OracleReply>) -> Result<f64, EnvError> {
        self.check_active()?;
        self.belief.format_strikes = 0;
        let cost = match action {
            Action::Navigate { location } => {
                let d = distance(&self.scene, self.belief.agent_location, *location)?;
                let cost = action_cost(action, self.belief.n_asks, Some(d), &self.config.cost)?;
                self.belief.agent_location = *location;
                self.last_reply = None;
                self.last_memory = None;
                self.look_around();
                cost
            }
            Action::Ask { query } => {
                let cost = action_cost(action, self.belief.n_asks, None, &self.config.cost)?;
                let reply = match reply {
                    Some(r) => {
                        self.oracle.record_external_answer()?;
                        r
                    }
                    None => {
                        let scene = Arc::clone(&self.scene);
                        let remaining: Vec<&ObjectInstance> = self
                            .belief
                            .remaining
                            .iter()
                            .filter_map(|id| scene.object(*id).ok())
                            .collect();
                        self.oracle.answer(*query, &remaining)?
                    }
                };
                self.belief.n_asks += 1;
                self.belief.last_ask_useful = Some(reply.useful);
                if let Some(d) = &reply.disclosed {
                    self.constrain(d.kind, &d.value);
                }
                self.last_reply = Some(reply);
                self.last_memory = None;
                cost
            }
            Action::GetMemory { key } => {
                let cost = action_cost(action, self.belief.n_asks, None, &self.config.cost)?;
                let facts = self.memory.retrieve(key);
                for f in &facts {
                    if self.task.candidate_ids.contains(&f.object_id) {
                        self.belief.recalled.insert(f.object_id, f.recorded_location_id);
                    }
                }
                self.belief.n_mems += 1;
                self.belief.memory_queried = true;
                self.last_reply = None;
                self.last_memory = Some(Arc::new(facts));
                cost
            }
            Action::Found { object } => {
                let success = *object == self.task.gt_target_id && self.belief.agent_location == self.gt_location;
                let cost = action_cost(action, self.belief.n_asks, None, &self.config.cost)?;
                self.total_cost += cost;
                self.belief.steps_elapsed += 1;
                self.finish(if success { Outcome::Success } else { Outcome::Failure });
                return Ok(cost);
            }
        };
        self.total_cost += cost;
        self.tick();
        Ok(cost)
    }

    /// Success check under the current target binding, without ending anything.
    pub fn would_succeed(&self, object: ObjectId) -> bool {
        object == self.oracle.target().id && self.belief.agent_location == self.gt_location
    }

    fn constrain(&mut self, kind: AttributeKind, value: &str) {
        let keep: Vec<ObjectId> = self
            .remaining_objects()
            .into_iter()
            .filter(|o| o.attribute(kind) == Some(value))
            .map(|o| o.id)
            .collect();
        // A disclosure that contradicts every candidate (possible only with a
        // human respondent) is ignored rather than emptying the belief.
        if keep.is_empty() {
            return;
        }
        self.belief.known_attributes.insert(kind, value.to_string());
        self.belief.remaining = keep;
    }

    fn tick(&mut self) {
        self.belief.steps_elapsed += 1;
        if self.outcome.is_none() && self.belief.steps_elapsed >= self.config.horizon {
            self.finish(Outcome::Timeout);
        }
    }

    fn finish(&mut self, outcome: Outcome) {
        self.outcome = Some(outcome);
        self.oracle.end();
    }
}

/// Run one episode to termination.
pub fn run_episode(
    policy: &mut dyn Policy,
    scene: &Arc<SceneGraph>,
    task: &Arc<Task>,
    config: &EnvConfig,
    seed: u64,
) -> Result<Trajectory, EnvError> {
    let (mut ep, mut obs) = Episode::reset(scene.clone(), task.clone(), *config, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
    let mut steps = Vec::new();
    while !ep.is_done() {
        let decision = policy.decide(&obs, &mut rng).map_err(|source| EnvError::Policy {
            task_id: task.task_id.clone(),
            seed,
            source,
        })?;
        let (res, action) = match decision.action {
            Ok(a) => {
                let r = ep.step(&a)?;
                let action = if r.malformed.is_some() { None } else { Some(a) };
                (r, action)
            }
            Err(reason) => (ep.reject(&reason)?, None),
        };
        steps.push(StepRecord {
            action,
            malformed: res.malformed.clone(),
            cost: res.cost,
            observation: res.observation.summary(),
            log_prob: decision.log_prob,
            decision: decision.trace,
        });
        obs = res.observation;
    }
    finish_trajectory(&ep, seed, steps)
}

pub(crate) fn finish_trajectory(ep: &Episode, seed: u64, steps: Vec<StepRecord>) -> Result<Trajectory, EnvError> {
    let mut traj = Trajectory {
        task_id: ep.task().task_id.clone(),
        seed,
        steps,
        outcome: ep.outcome(),
        total_cost: ep.total_cost(),
        return_value: 0.0,
    };
    traj.return_value = trajectory_return(&traj, &ep.config().cost)?;
    Ok(traj)
}

/// One line of an episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub format_version: u32,
    pub policy: String,
    pub difficulty: Difficulty,
    #[serde(flatten)]
    pub trajectory: Trajectory,
    /// Memory contents at the end of the episode.
    #[serde(default)]
    pub memory: Vec<MemoryFact>,
}

impl EpisodeLog {
    pub fn new(policy: &str, difficulty: Difficulty, trajectory: Trajectory, memory: Vec<MemoryFact>) -> Self {
        Self {
            format_version: LOG_FORMAT_VERSION,
            policy: policy.to_string(),
            difficulty,
            trajectory,
            memory,
        }
    }
}

pub fn write_logs<W: Write>(out: &mut W, logs: &[EpisodeLog]) -> Result<(), EnvError> {
    for log in logs {
        let line = serde_json::to_string(log).map_err(|e| EnvError::Log {
            line: 0,
            message: e.to_string(),
        })?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_logs<R: BufRead>(input: R) -> Result<Vec<EpisodeLog>, EnvError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let log: EpisodeLog = serde_json::from_str(&line).map_err(|e| EnvError::Log {
            line: i + 1,
            message: e.to_string(),
        })?;
        if log.format_version != LOG_FORMAT_VERSION {
            return Err(EnvError::Log {
                line: i + 1,
                message: format!("unsupported log format_version {}", log.format_version),
            });
        }
        out.push(log);
    }
    Ok(out)
}
