//! The fixed set of action templates a learned policy chooses among, and
//! how each one resolves to a concrete action in a given observation.

use serde::{Deserialize, Serialize};

use crate::env::{Action, LocationBelief, Observation, Query};
use crate::memory::MemoryKey;
use crate::scene::AttributeKind;

pub const N_SLOTS: usize = 5;
pub const N_TEMPLATES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Template {
    Ask(AttributeKind),
    AskOpen,
    GetMemory,
    /// Go to the believed location of candidate slot `i` (0-based).
    NavigateSlot(usize),
    NavigateUnvisited,
    /// Declare candidate slot `i` (0-based) found.
    FoundSlot(usize),
}

impl Template {
    pub fn all() -> [Template; N_TEMPLATES] {
        let mut out = [Template::AskOpen; N_TEMPLATES];
        for i in 0..N_TEMPLATES {
            out[i] = Template::from_index(i).unwrap();
        }
        out
    }

    pub fn index(self) -> usize {
        match self {
            Template::Ask(AttributeKind::Color) => 0,
            Template::Ask(AttributeKind::Size) => 1,
            Template::Ask(AttributeKind::Landmark) => 2,
            Template::AskOpen => 3,
            Template::GetMemory => 4,
            Template::NavigateSlot(i) => 5 + i,
            Template::NavigateUnvisited => 10,
            Template::FoundSlot(i) => 11 + i,
        }
    }

    pub fn from_index(i: usize) -> Option<Template> {
        Some(match i {
            0 => Template::Ask(AttributeKind::Color),
            1 => Template::Ask(AttributeKind::Size),
            2 => Template::Ask(AttributeKind::Landmark),
            3 => Template::AskOpen,
            4 => Template::GetMemory,
            5..=9 => Template::NavigateSlot(i - 5),
            10 => Template::NavigateUnvisited,
            11..=15 => Template::FoundSlot(i - 11),
            _ => return None,
        })
    }

    pub fn is_ask(self) -> bool {
        matches!(self, Template::Ask(_) | Template::AskOpen)
    }

    pub fn label(self) -> String {
        match self {
            Template::Ask(k) => format!("ask_{k}"),
            Template::AskOpen => "ask_open".into(),
            Template::GetMemory => "get_memory".into(),
            Template::NavigateSlot(i) => format!("nav_slot{}", i + 1),
            Template::NavigateUnvisited => "nav_unvisited".into(),
            Template::FoundSlot(i) => format!("found_slot{}", i + 1),
        }
    }
}

/// Which families of templates are available at all; ablations switch
/// families off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemplateFilter {
    pub allow_ask: bool,
    pub allow_memory: bool,
}

impl Default for TemplateFilter {
    fn default() -> Self {
        Self {
            allow_ask: true,
            allow_memory: true,
        }
    }
}

impl TemplateFilter {
    pub const FULL: TemplateFilter = TemplateFilter {
        allow_ask: true,
        allow_memory: true,
    };
}

/// The concrete action a template stands for here, if it is valid.
///
/// Questions are offered only while more than one candidate remains, and a
/// given attribute is not asked about once its value is known. Memory is
/// offered once per episode. Navigation to a slot needs a believed location
/// other than the current one. Declaring a slot found needs the candidate to
/// be verified at the agent's location.
pub fn resolve(template: Template, obs: &Observation, filter: TemplateFilter) -> Option<Action> {
    let ambiguous = obs.candidates.len() > 1;
    match template {
        Template::Ask(kind) => (filter.allow_ask && ambiguous && !obs.known_attributes.contains_key(&kind)).then(|| {
            Action::Ask {
                query: Query::Attribute(kind),
            }
        }),
        Template::AskOpen => (filter.allow_ask && ambiguous).then_some(Action::Ask { query: Query::Open }),
        Template::GetMemory => (filter.allow_memory && !obs.memory_queried).then(|| Action::GetMemory {
            key: MemoryKey::Category(obs.category.clone()),
        }),
        Template::NavigateSlot(i) => {
            let loc = obs.candidates.get(i)?.location.location()?;
            (loc != obs.agent_location).then_some(Action::Navigate { location: loc })
        }
        Template::NavigateUnvisited => obs.unvisited.first().map(|p| Action::Navigate { location: p.id }),
        Template::FoundSlot(i) => {
            let c = obs.candidates.get(i)?;
            (c.location == LocationBelief::Verified(obs.agent_location)).then_some(Action::Found { object: c.id })
        }
    }
}

/// Validity of every template, in index order.
pub fn valid_mask(obs: &Observation, filter: TemplateFilter) -> Vec<bool> {
    Template::all().iter().map(|t| resolve(*t, obs, filter).is_some()).collect()
}

/// Resolve every template at once; `None` where invalid.
pub fn resolve_all(obs: &Observation, filter: TemplateFilter) -> Vec<Option<Action>> {
    Template::all().iter().map(|t| resolve(*t, obs, filter)).collect()
}
