//! Decision makers: the learned linear policy, baselines, and an adapter
//! for policies living in another process.

pub mod external;
pub mod features;
pub mod heuristic;
pub mod linear;
pub mod templates;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cost::DecisionTrace;
use crate::env::{Action, Observation};

pub use external::{ExternalConfig, ExternalPolicy};
pub use heuristic::{ask_then_explore, AskThenExplore, RandomPolicy};
pub use linear::{LinearPolicy, PolicyParams};
pub use templates::{Template, TemplateFilter};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("policy argument error: {0}")]
    Argument(String),
    #[error("policy channel error: {0}")]
    Channel(String),
}

/// One decision. An `Err` action is something the policy produced that is
/// not a valid action; the engine charges it as malformed.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: Result<Action, String>,
    pub log_prob: f64,
    pub trace: Option<DecisionTrace>,
}

impl Decision {
    pub fn deterministic(action: Action) -> Self {
        Self {
            action: Ok(action),
            log_prob: 0.0,
            trace: None,
        }
    }

    pub fn malformed(reason: impl Into<String>) -> Self {
        Self {
            action: Err(reason.into()),
            log_prob: 0.0,
            trace: None,
        }
    }
}

pub trait Policy {
    fn name(&self) -> String;
    fn decide(&mut self, obs: &Observation, rng: &mut ChaCha8Rng) -> Result<Decision, PolicyError>;
}

/// Replays a fixed list of actions; anything past the end is malformed.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    script: Vec<Action>,
    next: usize,
}

impl ScriptedPolicy {
    pub fn new(script: Vec<Action>) -> Self {
        Self { script, next: 0 }
    }
}

impl Policy for ScriptedPolicy {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn decide(&mut self, _obs: &Observation, _rng: &mut ChaCha8Rng) -> Result<Decision, PolicyError> {
        let d = match self.script.get(self.next) {
            Some(a) => Decision::deterministic(a.clone()),
            None => Decision::malformed("script exhausted"),
        };
        self.next += 1;
        Ok(d)
    }
}
