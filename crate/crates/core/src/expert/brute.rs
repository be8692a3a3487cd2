//! Exhaustive, unmemoized evaluation of every policy tree on tiny instances.
//! Used to check the memoized planner.

use std::sync::Arc;

use crate::cost::Outcome;
use crate::env::{EnvConfig, Episode};
use crate::expert::{admissible, ask_value, found_value, immediate_cost, successors, PlanError, Successors};
use crate::policy::templates::{resolve_all, TemplateFilter};
use crate::scene::{SceneGraph, Task};

pub const MAX_BRUTE_CANDIDATES: usize = 3;
pub const MAX_BRUTE_HORIZON: u32 = 6;

/// Minimal expected objective (weighted cost plus failure penalty) from the
/// start of `task`.
pub fn brute_force_value(
    scene: &Arc<SceneGraph>,
    task: &Arc<Task>,
    config: &EnvConfig,
    filter: TemplateFilter,
) -> Result<f64, PlanError> {
    if task.candidate_ids.len() > MAX_BRUTE_CANDIDATES || config.horizon > MAX_BRUTE_HORIZON {
        return Err(PlanError::Argument(format!(
            "brute force limited to {MAX_BRUTE_CANDIDATES} candidates and horizon {MAX_BRUTE_HORIZON}; got {} and {}",
            task.candidate_ids.len(),
            config.horizon
        )));
    }
    let (ep, _) = Episode::reset(scene.clone(), task.clone(), *config, 0)?;
    value(&ep, filter)
}

fn value(ep: &Episode, filter: TemplateFilter) -> Result<f64, PlanError> {
    let c = &ep.config().cost;
    let delta = c.r_success - c.r_fail;
    if ep.is_done() {
        return Ok(match ep.outcome() {
            Some(Outcome::Success) => 0.0,
            _ => delta,
        });
    }
    let lambda = c.lambda;
    let n = ep.belief().remaining.len();
    let mut best = f64::INFINITY;
    for action in resolve_all(&ep.observation(), filter).into_iter().flatten() {
        if !admissible(ep, &action) {
            continue;
        }
        let cost = immediate_cost(ep, &action)?;
        let q = match successors(ep, &action)? {
            Successors::Terminal => found_value(n, delta),
            Successors::Deterministic(child) => lambda * cost + value(&child, filter)?,
            Successors::Ask { p, useful, useless } => {
                let w = 1.0 / useful.len() as f64;
                let mut sum = 0.0;
                for child in &useful {
                    sum += w * value(child, filter)?;
                }
                let u = match &useless {
                    Some(child) => Some(value(child, filter)?),
                    None => None,
                };
                ask_value(lambda * cost, p, sum, u)
            }
        };
        if q < best {
            best = q;
        }
    }
    Ok(if best.is_finite() { best } else { delta })
}
