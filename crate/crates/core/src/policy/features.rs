//! Fixed-order belief features consumed by the linear policy.

use crate::env::{LocationBelief, Observation};
use crate::policy::templates::N_SLOTS;
use crate::scene::AttributeKind;

pub const FEATURE_NAMES: [&str; 24] = [
    "bias",
    "n_remaining/5",
    "1/n_remaining",
    "single_candidate",
    "n_asks/4",
    "memory_queried",
    "slot1_dist",
    "slot2_dist",
    "slot3_dist",
    "slot4_dist",
    "slot5_dist",
    "slot1_known",
    "slot2_known",
    "slot3_known",
    "slot4_known",
    "slot5_known",
    "colocated_candidate",
    "kinds_constrained",
    "steps/horizon",
    "last_ask_useful",
    "single_and_colocated",
    "guess_risk_here",
    "nearest_unvisited_dist",
    "frac_located",
];

pub const N_FEATURES: usize = FEATURE_NAMES.len();

/// Build the feature vector. Distances are divided by the scene diameter and
/// clipped to `[0, 1]`; a missing or unlocated slot reads as distance 1.
pub fn features(obs: &Observation) -> Vec<f64> {
    let n = obs.candidates.len().max(1) as f64;
    let diam = if obs.scene_diameter > 0.0 { obs.scene_diameter } else { 1.0 };
    let norm = |d: f64| (d / diam).clamp(0.0, 1.0);
    let colocated = obs.colocated().next().is_some() as u8 as f64;
    let single = (obs.candidates.len() == 1) as u8 as f64;

    let mut f = Vec::with_capacity(N_FEATURES);
    f.push(1.0);
    f.push(n / 5.0);
    f.push(1.0 / n);
    f.push(single);
    f.push(obs.n_asks.min(4) as f64 / 4.0);
    f.push(obs.memory_queried as u8 as f64);
    for i in 0..N_SLOTS {
        f.push(obs.candidates.get(i).and_then(|c| c.distance).map_or(1.0, norm));
    }
    for i in 0..N_SLOTS {
        let known = obs
            .candidates
            .get(i)
            .is_some_and(|c| c.location != LocationBelief::Unknown);
        f.push(known as u8 as f64);
    }
    f.push(colocated);
    f.push(obs.known_attributes.len() as f64 / AttributeKind::ALL.len() as f64);
    f.push(obs.steps_elapsed as f64 / obs.horizon.max(1) as f64);
    f.push((obs.last_ask_useful == Some(true)) as u8 as f64);
    f.push(single * colocated);
    f.push((1.0 - 1.0 / n) * colocated);
    f.push(obs.unvisited.first().map_or(1.0, |p| norm(p.distance)));
    let located = obs.candidates.iter().filter(|c| c.location != LocationBelief::Unknown).count();
    f.push(located as f64 / n);
    debug_assert_eq!(f.len(), N_FEATURES);
    f
}
