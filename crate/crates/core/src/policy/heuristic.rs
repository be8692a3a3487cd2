//! Hand-written baselines.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{Action, Observation, Query};
use crate::policy::templates::{resolve_all, TemplateFilter};
use crate::policy::{Decision, Policy, PolicyError};

/// Asks one open question first, then walks to the nearest consistent
/// candidate it knows about (or explores), and declares on arrival.
#[derive(Debug, Clone, Default)]
pub struct AskThenExplore;

pub fn ask_then_explore(obs: &Observation) -> Action {
    if obs.steps_elapsed == 0 && obs.n_asks == 0 {
        return Action::Ask { query: Query::Open };
    }
    if let Some(c) = obs.colocated().next() {
        return Action::Found { object: c.id };
    }
    let nearest_known = obs
        .candidates
        .iter()
        .filter_map(|c| c.location.location().filter(|l| *l != obs.agent_location))
        .next();
    if let Some(location) = nearest_known {
        return Action::Navigate { location };
    }
    if let Some(p) = obs.unvisited.first() {
        return Action::Navigate { location: p.id };
    }
    // Every location has been seen, so every candidate is verified somewhere
    // and one of the branches above fired. Kept total for safety.
    Action::Found {
        object: obs.candidates[0].id,
    }
}

impl Policy for AskThenExplore {
    fn name(&self) -> String {
        "ask_then_explore".into()
    }

    fn decide(&mut self, obs: &Observation, _rng: &mut ChaCha8Rng) -> Result<Decision, PolicyError> {
        Ok(Decision::deterministic(ask_then_explore(obs)))
    }
}

/// Uniform over the valid templates.
#[derive(Debug, Clone, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn name(&self) -> String {
        "random".into()
    }

    fn decide(&mut self, obs: &Observation, rng: &mut ChaCha8Rng) -> Result<Decision, PolicyError> {
        let valid: Vec<Action> = resolve_all(obs, TemplateFilter::FULL).into_iter().flatten().collect();
        if valid.is_empty() {
            return Err(PolicyError::Argument("no valid template".into()));
        }
        let i = rng.gen_range(0..valid.len());
        Ok(Decision {
            action: Ok(valid[i].clone()),
            log_prob: -(valid.len() as f64).ln(),
            trace: None,
        })
    }
}
