//! Exact belief-space planning for demonstrations.
//!
//! The planner minimizes `lambda * E[cost] + P(fail) * (r_success - r_fail)`,
//! which is the same as maximizing expected return, over policies that only
//! declare a target once it is the single candidate left. Guessing is left
//! to the learner. Decision nodes range over the valid templates; chance nodes average over whether the respondent is
//! helpful and, if so, over which remaining candidate is the target (taken
//! as uniform over the remaining set). The planner knows the scene layout
//! and the memory contents, so walking and recalling are deterministic; it
//! never uses the identity of the true target when valuing a node.

pub mod brute;

use std::collections::HashMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::cost::{DecisionTrace, Outcome, StepRecord, Trajectory};
use crate::derive_seed;
use crate::env::{finish_trajectory, Action, EnvConfig, EnvError, Episode, EpisodeLog};
use crate::policy::features::features;
use crate::policy::templates::{resolve_all, Template, TemplateFilter, N_TEMPLATES};
use crate::scene::{SceneGraph, Task, MAX_CANDIDATES};

pub use brute::brute_force_value;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("task {task_id}: no plan reaches success within the horizon")]
    Unsolvable { task_id: String },
    #[error("planner argument error: {0}")]
    Argument(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Expected-value bookkeeping of one node under the optimal policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeValue {
    /// Objective to go: weighted cost plus failure penalty.
    pub value: f64,
    pub p_success: f64,
    pub expected_asks: f64,
}

impl NodeValue {
    fn timeout(delta: f64) -> Self {
        Self {
            value: delta,
            p_success: 0.0,
            expected_asks: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    pub template: usize,
    pub label: String,
    pub q_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertStep {
    pub belief: String,
    pub action: Action,
    pub template: usize,
    /// Planner objective to go before taking the action.
    pub expected_remaining: f64,
    /// Every valid template with its action value, by template index.
    pub alternatives: Vec<Alternative>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertTrace {
    pub task_id: String,
    pub root_value: f64,
    pub steps: Vec<ExpertStep>,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct StateKey {
    remaining: u8,
    known_kinds: u8,
    agent: u8,
    visited: u32,
    n_asks: u8,
    memory_queried: bool,
    steps: u8,
}

/// `1 - 1/n` of the failure penalty, for declaring one of `n` equally
/// likely candidates.
pub(crate) fn found_value(n: usize, delta: f64) -> f64 {
    (n - 1) as f64 / n as f64 * delta
}

/// The demonstrator only declares a target once a single candidate is left,
/// so every failure it suffers comes from running out of time.
pub(crate) fn admissible(ep: &Episode, action: &Action) -> bool {
    !matches!(action, Action::Found { .. }) || ep.belief().remaining.len() == 1
}

/// Combine the branches of a question.
pub(crate) fn ask_value(immediate: f64, p_useful: f64, useful_sum: f64, useless: Option<f64>) -> f64 {
    match useless {
        Some(v) => immediate + (p_useful * useful_sum + (1.0 - p_useful) * v),
        None => immediate + p_useful * useful_sum,
    }
}

/// Successor states of taking `action` in `ep`, each with its probability,
/// in a fixed order. `Found` has no successors; it is valued analytically.
pub(crate) fn successors(ep: &Episode, action: &Action) -> Result<Successors, EnvError> {
    match action {
        Action::Ask { .. } => {
            let p = ep.oracle().next_usefulness();
            let remaining = ep.belief().remaining.clone();
            let mut useful = Vec::with_capacity(remaining.len());
            for g in &remaining {
                let mut child = ep.clone();
                child.assume_target(*g)?;
                child.oracle_mut().force_next(true);
                child.apply(action, None)?;
                useful.push(child);
            }
            let useless = if p < 1.0 {
                let mut child = ep.clone();
                child.oracle_mut().force_next(false);
                child.apply(action, None)?;
                Some(child)
            } else {
                None
            };
            Ok(Successors::Ask { p, useful, useless })
        }
        Action::Found { .. } => Ok(Successors::Terminal),
        _ => {
            let mut child = ep.clone();
            child.apply(action, None)?;
            Ok(Successors::Deterministic(child))
        }
    }
}

pub(crate) enum Successors {
    Deterministic(Episode),
    Ask {
        p: f64,
        useful: Vec<Episode>,
        useless: Option<Episode>,
    },
    Terminal,
}

pub(crate) fn immediate_cost(ep: &Episode, action: &Action) -> Result<f64, EnvError> {
    let c = &ep.config().cost;
    Ok(match action {
        Action::Navigate { location } => c.c_nav * crate::scene::distance(ep.scene(), ep.belief().agent_location, *location)?,
        Action::Ask { .. } => c.ask_cost(ep.belief().n_asks),
        Action::GetMemory { .. } => c.c_mem,
        Action::Found { .. } => 0.0,
    })
}

/// Whether `(q, cost, index)` beats the incumbent: lower value, then lower
/// immediate cost, then lower template index (implied by scan order).
pub(crate) fn better(q: f64, cost: f64, best: Option<(f64, f64)>) -> bool {
    match best {
        None => true,
        Some((bq, bc)) => q < bq || (q == bq && cost < bc),
    }
}

pub struct Planner {
    filter: TemplateFilter,
    memo: HashMap<StateKey, NodeValue>,
    candidate_index: Vec<crate::scene::ObjectId>,
}

impl Planner {
    pub fn new(task: &Task, filter: TemplateFilter) -> Result<Self, PlanError> {
        if task.candidate_ids.len() > MAX_CANDIDATES {
            return Err(PlanError::Argument(format!(
                "task {} has {} candidates; at most {MAX_CANDIDATES} supported",
                task.task_id,
                task.candidate_ids.len()
            )));
        }
        let mut candidate_index = task.candidate_ids.clone();
        candidate_index.sort();
        Ok(Self {
            filter,
            memo: HashMap::new(),
            candidate_index,
        })
    }

    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }

    fn key(&self, ep: &Episode) -> Result<StateKey, PlanError> {
        let b = ep.belief();
        let scene = ep.scene();
        let mut remaining = 0u8;
        for id in &b.remaining {
            let i = self.candidate_index.binary_search(id).map_err(|_| {
                PlanError::Argument(format!("remaining candidate {id} not in the task's candidate set"))
            })?;
            remaining |= 1 << i;
        }
        if scene.locations.len() > 32 {
            return Err(PlanError::Argument("planner supports at most 32 locations".into()));
        }
        let mut visited = 0u32;
        for l in &b.visited {
            visited |= 1 << scene.location_index(*l).map_err(EnvError::from)?;
        }
        let mut known_kinds = 0u8;
        for (i, k) in crate::scene::AttributeKind::ALL.iter().enumerate() {
            if b.known_attributes.contains_key(k) {
                known_kinds |= 1 << i;
            }
        }
        Ok(StateKey {
            remaining,
            known_kinds,
            agent: scene.location_index(b.agent_location).map_err(EnvError::from)? as u8,
            visited,
            n_asks: b.n_asks.min(255) as u8,
            memory_queried: b.memory_queried,
            steps: b.steps_elapsed.min(255) as u8,
        })
    }

    fn delta(ep: &Episode) -> f64 {
        let c = &ep.config().cost;
        c.r_success - c.r_fail
    }

    /// Optimal node value of a live episode state.
    pub fn value(&mut self, ep: &Episode) -> Result<NodeValue, PlanError> {
        if ep.is_done() {
            return Ok(match ep.outcome() {
                Some(Outcome::Timeout) | Some(Outcome::Failure) => NodeValue::timeout(Self::delta(ep)),
                _ => NodeValue {
                    value: 0.0,
                    p_success: 1.0,
                    expected_asks: 0.0,
                },
            });
        }
        let key = self.key(ep)?;
        if let Some(v) = self.memo.get(&key) {
            return Ok(*v);
        }
        let (best, _) = self.evaluate(ep)?;
        self.memo.insert(key, best);
        Ok(best)
    }

    /// Value every valid template at `ep`; returns the best node value and
    /// all `(template, action, q, node)` entries in index order.
    fn evaluate(&mut self, ep: &Episode) -> Result<(NodeValue, Vec<(usize, Action, NodeValue)>), PlanError> {
        let obs = ep.observation();
        let delta = Self::delta(ep);
        let lambda = ep.config().cost.lambda;
        let n = ep.belief().remaining.len();
        let mut entries = Vec::new();
        let mut best: Option<(f64, f64)> = None;
        let mut best_node = None;
        for (t, action) in resolve_all(&obs, self.filter).into_iter().enumerate() {
            let Some(action) = action else { continue };
            if !admissible(ep, &action) {
                continue;
            }
            let cost = immediate_cost(ep, &action)?;
            // Several templates can resolve to the same concrete action.
            if let Some((_, _, node)) = entries.iter().find(|(_, a, _)| *a == action) {
                let node = *node;
                entries.push((t, action, node));
                continue;
            }
            let node = match successors(ep, &action)? {
                Successors::Terminal => NodeValue {
                    value: found_value(n, delta),
                    p_success: 1.0 / n as f64,
                    expected_asks: 0.0,
                },
                Successors::Deterministic(child) => {
                    let v = self.value(&child)?;
                    NodeValue {
                        value: lambda * cost + v.value,
                        p_success: v.p_success,
                        expected_asks: v.expected_asks,
                    }
                }
                Successors::Ask { p, useful, useless } => {
                    let w = 1.0 / useful.len() as f64;
                    let mut sum = 0.0;
                    let mut ps = 0.0;
                    let mut asks = 0.0;
                    for child in &useful {
                        let v = self.value(child)?;
                        sum += w * v.value;
                        ps += w * v.p_success;
                        asks += w * v.expected_asks;
                    }
                    let u = match &useless {
                        Some(child) => Some(self.value(child)?),
                        None => None,
                    };
                    NodeValue {
                        value: ask_value(lambda * cost, p, sum, u.map(|v| v.value)),
                        p_success: p * ps + u.map_or(0.0, |v| (1.0 - p) * v.p_success),
                        expected_asks: 1.0 + p * asks + u.map_or(0.0, |v| (1.0 - p) * v.expected_asks),
                    }
                }
            };
            if better(node.value, cost, best) {
                best = Some((node.value, cost));
                best_node = Some(node);
            }
            entries.push((t, action, node));
        }
        // A live state with nothing admissible is a dead end.
        let best_node = best_node.unwrap_or(NodeValue::timeout(delta));
        Ok((best_node, entries))
    }

    /// Best template at `ep` with its valuation.
    pub fn decide(&mut self, ep: &Episode) -> Result<(usize, Action, NodeValue, Vec<Alternative>), PlanError> {
        let (best, entries) = self.evaluate(ep)?;
        let key = self.key(ep)?;
        self.memo.insert(key, best);
        let mut chosen = None;
        let mut inc: Option<(f64, f64)> = None;
        for (t, a, node) in &entries {
            let cost = immediate_cost(ep, a)?;
            if better(node.value, cost, inc) {
                inc = Some((node.value, cost));
                chosen = Some((*t, a.clone()));
            }
        }
        let (t, a) = chosen.ok_or_else(|| PlanError::Unsolvable {
            task_id: ep.task().task_id.clone(),
        })?;
        let alternatives = entries
            .iter()
            .map(|(t, _, node)| Alternative {
                template: *t,
                label: Template::from_index(*t).map(|x| x.label()).unwrap_or_default(),
                q_value: node.value,
            })
            .collect();
        Ok((t, a, best, alternatives))
    }
}

/// Plan and realize one episode. The episode's own oracle draws decide the
/// chance outcomes along the realized path.
pub fn plan(
    scene: &Arc<SceneGraph>,
    task: &Arc<Task>,
    config: &EnvConfig,
    seed: u64,
    planner: &mut Planner,
) -> Result<ExpertTrace, PlanError> {
    let (mut ep, _) = Episode::reset(scene.clone(), task.clone(), *config, seed)?;
    let root = planner.value(&ep)?;
    if root.p_success <= 0.0 {
        return Err(PlanError::Unsolvable {
            task_id: task.task_id.clone(),
        });
    }
    let mut steps = Vec::new();
    let mut records = Vec::new();
    while !ep.is_done() {
        let obs = ep.observation();
        let f = features(&obs);
        let mask: Vec<bool> = resolve_all(&obs, planner.filter).iter().map(Option::is_some).collect();
        let (t, action, node, alternatives) = planner.decide(&ep)?;
        let res = ep.step(&action)?;
        steps.push(ExpertStep {
            belief: obs.summary(),
            action: action.clone(),
            template: t,
            expected_remaining: node.value,
            alternatives,
        });
        records.push(StepRecord {
            action: Some(action),
            malformed: None,
            cost: res.cost,
            observation: res.observation.summary(),
            log_prob: 0.0,
            decision: Some(DecisionTrace {
                features: f,
                mask,
                template: t,
            }),
        });
    }
    debug_assert_eq!(steps.len(), records.len());
    debug_assert!(steps.iter().all(|s| s.template < N_TEMPLATES));
    let trajectory = finish_trajectory(&ep, seed, records)?;
    Ok(ExpertTrace {
        task_id: task.task_id.clone(),
        root_value: root.value,
        steps,
        trajectory,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub n_tasks: usize,
    pub n_traces: usize,
    pub n_dropped: usize,
    pub dropped: Vec<String>,
    pub n_rerolled: usize,
}

/// Re-rolls allowed after an unlucky realization before a task is dropped.
pub const MAX_REROLLS: u64 = 3;

/// One realized expert trace per task. A realization that does not end in
/// success is re-rolled with a fresh seed up to [`MAX_REROLLS`] times, then
/// the task is dropped with a warning.
pub fn generate_sft_corpus(
    work: &[(Arc<SceneGraph>, Arc<Task>)],
    config: &EnvConfig,
    master_seed: u64,
) -> Result<(Vec<ExpertTrace>, CorpusReport), PlanError> {
    let results: Vec<Result<(Option<ExpertTrace>, usize), PlanError>> = work
        .par_iter()
        .enumerate()
        .map(|(i, (scene, task))| {
            let mut planner = Planner::new(task, TemplateFilter::FULL)?;
            let mut rerolls = 0;
            for attempt in 0..=MAX_REROLLS {
                let seed = derive_seed(derive_seed(master_seed, i as u64), attempt);
                let trace = plan(scene, task, config, seed, &mut planner)?;
                if trace.trajectory.is_success() {
                    return Ok((Some(trace), rerolls));
                }
                rerolls += 1;
            }
            warn!(task = %task.task_id, "expert realization failed {} times; dropped", MAX_REROLLS + 1);
            Ok((None, rerolls))
        })
        .collect();
    let mut traces = Vec::new();
    let mut report = CorpusReport {
        n_tasks: work.len(),
        ..Default::default()
    };
    for (r, (_, task)) in results.into_iter().zip(work) {
        let (trace, rerolls) = r?;
        report.n_rerolled += rerolls.min(MAX_REROLLS as usize);
        match trace {
            Some(t) => traces.push(t),
            None => {
                report.n_dropped += 1;
                report.dropped.push(task.task_id.clone());
            }
        }
    }
    report.n_traces = traces.len();
    Ok((traces, report))
}

/// Log line for a corpus trace: the usual episode record plus the expert's
/// per-step valuations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusLine {
    #[serde(flatten)]
    pub episode: EpisodeLog,
    pub root_value: f64,
    pub expert_steps: Vec<ExpertStep>,
}

/// Seeded rng used by callers that need one per planned task.
pub fn task_rng(master: u64, i: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, i as u64))
}
