//! Heterogeneous action pricing, trajectory return, and the SR / TTC / SwC
//! evaluation metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Action;

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("trajectory {0} has no terminal outcome")]
    Incomplete(String),
}

/// Pricing and reward constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostParams {
    /// Cost per meter travelled.
    pub c_nav: f64,
    /// Cost of the first question; later questions grow with `alpha`.
    pub c_ask_base: f64,
    pub c_mem: f64,
    /// Fatigue growth of the question cost.
    pub alpha: f64,
    /// Weight of the summed cost against the task reward.
    pub lambda: f64,
    pub r_success: f64,
    pub r_fail: f64,
    /// Penalty charged for a malformed action.
    pub c_format: f64,
    /// SwC normalization constant.
    pub c_ref: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            c_nav: 1.0,
            c_ask_base: 0.5,
            c_mem: 0.01,
            alpha: 0.2,
            lambda: 1.0,
            r_success: 1.0,
            r_fail: -0.1,
            c_format: 0.1,
            c_ref: 2.0,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<(), CostError> {
        let all = [
            self.c_nav,
            self.c_ask_base,
            self.c_mem,
            self.alpha,
            self.lambda,
            self.c_format,
            self.c_ref,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CostError::Argument("cost constants must be finite and nonnegative".into()));
        }
        if !(self.c_nav > self.c_ask_base && self.c_ask_base > self.c_mem && self.c_mem > 0.0) {
            return Err(CostError::Argument(
                "expected c_nav > c_ask_base > c_mem > 0".into(),
            ));
        }
        if self.c_ref <= 0.0 {
            return Err(CostError::Argument("c_ref must be positive".into()));
        }
        if !self.r_success.is_finite() || !self.r_fail.is_finite() {
            return Err(CostError::Argument("rewards must be finite".into()));
        }
        Ok(())
    }

    /// Price of the question asked after `n_prior_asks` earlier ones.
    pub fn ask_cost(&self, n_prior_asks: u32) -> f64 {
        self.c_ask_base * (1.0 + self.alpha * n_prior_asks as f64)
    }
}

/// Cost of one action. `nav_distance` must be given exactly for `Navigate`.
pub fn action_cost(
    action: &Action,
    n_prior_asks: u32,
    nav_distance: Option<f64>,
    params: &CostParams,
) -> Result<f64, CostError> {
    match (action, nav_distance) {
        (Action::Navigate { .. }, Some(d)) => {
            if !(d >= 0.0) || !d.is_finite() {
                return Err(CostError::Argument(format!("navigation distance {d} must be finite and nonnegative")));
            }
            Ok(params.c_nav * d)
        }
        (Action::Navigate { .. }, None) => Err(CostError::Argument("navigate requires a distance".into())),
        (_, Some(_)) => Err(CostError::Argument("distance supplied for a non-navigation action".into())),
        (Action::Ask { .. }, None) => Ok(params.ask_cost(n_prior_asks)),
        (Action::GetMemory { .. }, None) => Ok(params.c_mem),
        (Action::Found { .. }, None) => Ok(0.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Navigate,
    Ask,
    GetMemory,
    Found,
    Malformed,
}

impl ActionKind {
    pub const ALL: [ActionKind; 5] = [
        ActionKind::Navigate,
        ActionKind::Ask,
        ActionKind::GetMemory,
        ActionKind::Found,
        ActionKind::Malformed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Navigate => "navigate",
            ActionKind::Ask => "ask",
            ActionKind::GetMemory => "get_memory",
            ActionKind::Found => "found",
            ActionKind::Malformed => "malformed",
        }
    }
}

/// What the learned policy saw when it chose a template; kept so that the
/// trainer can re-score the decision under new parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTrace {
    pub features: Vec<f64>,
    pub mask: Vec<bool>,
    pub template: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// `None` when the policy produced something the engine rejected.
    pub action: Option<Action>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub malformed: Option<String>,
    pub cost: f64,
    /// Short human-readable summary of the resulting observation.
    pub observation: String,
    /// Log-probability of the action under the acting policy.
    pub log_prob: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<DecisionTrace>,
}

impl StepRecord {
    pub fn kind(&self) -> ActionKind {
        match &self.action {
            Some(a) => a.kind(),
            None => ActionKind::Malformed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task_id: String,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub outcome: Option<Outcome>,
    pub total_cost: f64,
    pub return_value: f64,
}

impl Trajectory {
    pub fn summed_cost(&self) -> f64 {
        self.steps.iter().map(|s| s.cost).sum()
    }

    pub fn is_success(&self) -> bool {
        self.outcome == Some(Outcome::Success)
    }
}

/// Sparse task reward minus the weighted cost sum (format penalties included).
pub fn trajectory_return(traj: &Trajectory, params: &CostParams) -> Result<f64, CostError> {
    let r_task = match traj.outcome {
        None => return Err(CostError::Incomplete(traj.task_id.clone())),
        Some(Outcome::Success) => params.r_success,
        Some(Outcome::Failure) | Some(Outcome::Timeout) => params.r_fail,
    };
    Ok(r_task - params.lambda * traj.summed_cost())
}

/// Success weighted by cost.
pub fn swc(sr: f64, ttc: Option<f64>, c_ref: f64) -> f64 {
    match ttc {
        None => 0.0,
        Some(t) if t <= c_ref => sr,
        Some(t) => sr * c_ref / t,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation (zero for a single value).
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Self { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub sr: f64,
    pub ttc: Option<f64>,
    pub swc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub sr: MeanStd,
    pub ttc: Option<MeanStd>,
    pub swc: MeanStd,
    pub traj_len: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_episodes: usize,
    pub n_success: usize,
    pub sr: f64,
    /// Mean total cost over successful episodes; absent without successes.
    pub ttc: Option<f64>,
    pub swc: f64,
    pub traj_len_mean: f64,
    pub action_histogram: BTreeMap<ActionKind, usize>,
    #[serde(default)]
    pub per_seed: Vec<SeedMetrics>,
    #[serde(default)]
    pub mean_std: Option<MetricsSummary>,
}

impl MetricsReport {
    /// Fraction of all recorded actions that were of the given kind.
    pub fn action_share(&self, kind: ActionKind) -> f64 {
        let total: usize = self.action_histogram.values().sum();
        if total == 0 {
            return 0.0;
        }
        *self.action_histogram.get(&kind).unwrap_or(&0) as f64 / total as f64
    }
}

pub fn compute_metrics(episodes: &[Trajectory], params: &CostParams) -> Result<MetricsReport, CostError> {
    if episodes.is_empty() {
        return Err(CostError::Argument("no episodes to score".into()));
    }
    let n = episodes.len();
    let mut histogram: BTreeMap<ActionKind, usize> = ActionKind::ALL.iter().map(|k| (*k, 0)).collect();
    let mut success_cost = 0.0;
    let mut n_success = 0usize;
    let mut steps = 0usize;
    for ep in episodes {
        if ep.outcome.is_none() {
            return Err(CostError::Incomplete(ep.task_id.clone()));
        }
        steps += ep.steps.len();
        for s in &ep.steps {
            *histogram.entry(s.kind()).or_default() += 1;
        }
        if ep.is_success() {
            n_success += 1;
            success_cost += ep.summed_cost();
        }
    }
    let sr = n_success as f64 / n as f64;
    let ttc = (n_success > 0).then(|| success_cost / n_success as f64);
    Ok(MetricsReport {
        n_episodes: n,
        n_success,
        sr,
        ttc,
        swc: swc(sr, ttc, params.c_ref),
        traj_len_mean: steps as f64 / n as f64,
        action_histogram: histogram,
        per_seed: Vec::new(),
        mean_std: None,
    })
}

/// Combine per-seed reports: metric means with sample standard deviations.
/// SwC is the mean of per-seed SwC values.
pub fn aggregate_seeds(reports: &[(u64, MetricsReport)]) -> Result<MetricsReport, CostError> {
    if reports.is_empty() {
        return Err(CostError::Argument("no reports to aggregate".into()));
    }
    let srs: Vec<f64> = reports.iter().map(|(_, r)| r.sr).collect();
    let ttcs: Vec<f64> = reports.iter().filter_map(|(_, r)| r.ttc).collect();
    let swcs: Vec<f64> = reports.iter().map(|(_, r)| r.swc).collect();
    let lens: Vec<f64> = reports.iter().map(|(_, r)| r.traj_len_mean).collect();
    let summary = MetricsSummary {
        sr: MeanStd::of(&srs).expect("nonempty"),
        ttc: MeanStd::of(&ttcs),
        swc: MeanStd::of(&swcs).expect("nonempty"),
        traj_len: MeanStd::of(&lens).expect("nonempty"),
    };
    let mut histogram: BTreeMap<ActionKind, usize> = BTreeMap::new();
    for (_, r) in reports {
        for (k, c) in &r.action_histogram {
            *histogram.entry(*k).or_default() += c;
        }
    }
    Ok(MetricsReport {
        n_episodes: reports.iter().map(|(_, r)| r.n_episodes).sum(),
        n_success: reports.iter().map(|(_, r)| r.n_success).sum(),
        sr: summary.sr.mean,
        ttc: summary.ttc.map(|m| m.mean),
        swc: summary.swc.mean,
        traj_len_mean: summary.traj_len.mean,
        action_histogram: histogram,
        per_seed: reports
            .iter()
            .map(|(seed, r)| SeedMetrics {
                seed: *seed,
                sr: r.sr,
                ttc: r.ttc,
                swc: r.swc,
            })
            .collect(),
        mean_std: Some(summary),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Query;
    use crate::memory::MemoryKey;
    use crate::scene::{LocationId, ObjectId};
    use proptest::prelude::*;

    fn nav() -> Action {
        Action::Navigate { location: LocationId(1) }
    }
    fn ask() -> Action {
        Action::Ask { query: Query::Open }
    }
    fn mem() -> Action {
        Action::GetMemory {
            key: MemoryKey::Category("mug".into()),
        }
    }
    fn found() -> Action {
        Action::Found { object: ObjectId(0) }
    }

    pub(crate) fn traj(costs: &[f64], outcome: Option<Outcome>) -> Trajectory {
        Trajectory {
            task_id: "t".into(),
            seed: 0,
            steps: costs
                .iter()
                .map(|c| StepRecord {
                    action: Some(nav()),
                    malformed: None,
                    cost: *c,
                    observation: String::new(),
                    log_prob: 0.0,
                    decision: None,
                })
                .collect(),
            outcome,
            total_cost: costs.iter().sum(),
            return_value: 0.0,
        }
    }

    #[test]
    fn per_action_costs() {
        let p = CostParams::default();
        assert_eq!(action_cost(&nav(), 0, Some(2.0), &p).unwrap(), 2.0);
        assert_eq!(action_cost(&ask(), 0, None, &p).unwrap(), 0.5);
        assert!((action_cost(&ask(), 2, None, &p).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(action_cost(&mem(), 5, None, &p).unwrap(), 0.01);
        assert_eq!(action_cost(&found(), 3, None, &p).unwrap(), 0.0);
    }

    #[test]
    fn cost_argument_errors() {
        let p = CostParams::default();
        assert!(matches!(action_cost(&nav(), 0, Some(-1.0), &p), Err(CostError::Argument(_))));
        assert!(matches!(action_cost(&nav(), 0, None, &p), Err(CostError::Argument(_))));
        assert!(matches!(action_cost(&ask(), 0, Some(1.0), &p), Err(CostError::Argument(_))));
    }

    #[test]
    fn defaults_validate() {
        CostParams::default().validate().unwrap();
        let bad = CostParams {
            c_ask_base: 2.0,
            ..CostParams::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn returns_follow_sparse_reward_minus_cost() {
        let p = CostParams::default();
        let r = trajectory_return(&traj(&[0.5, 0.01, 1.0], Some(Outcome::Success)), &p).unwrap();
        assert!((r - (-0.51)).abs() < 1e-12);
        assert_eq!(trajectory_return(&traj(&[], Some(Outcome::Failure)), &p).unwrap(), -0.1);
        assert_eq!(trajectory_return(&traj(&[], Some(Outcome::Success)), &p).unwrap(), 1.0);
        assert_eq!(trajectory_return(&traj(&[], Some(Outcome::Timeout)), &p).unwrap(), -0.1);
        assert!(matches!(trajectory_return(&traj(&[1.0], None), &p), Err(CostError::Incomplete(_))));
    }

    #[test]
    fn metrics_basic_cases() {
        let p = CostParams::default();
        let eps = vec![
            traj(&[1.0, 2.0], Some(Outcome::Success)),
            traj(&[4.0], Some(Outcome::Failure)),
            traj(&[0.5], Some(Outcome::Success)),
        ];
        let m = compute_metrics(&eps, &p).unwrap();
        assert_eq!(m.n_success, 2);
        assert!((m.sr - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.ttc.unwrap() - 1.75).abs() < 1e-12);
        assert!((m.swc - m.sr).abs() < 1e-12);
        assert!((m.traj_len_mean - 4.0 / 3.0).abs() < 1e-12);

        let fails = vec![traj(&[1.0], Some(Outcome::Failure)), traj(&[], Some(Outcome::Timeout))];
        let m = compute_metrics(&fails, &p).unwrap();
        assert_eq!(m.sr, 0.0);
        assert_eq!(m.swc, 0.0);
        assert!(m.ttc.is_none());
        assert!(compute_metrics(&[], &p).is_err());
    }

    #[test]
    fn swc_matches_reported_rows() {
        assert!((swc(0.600, Some(3.3), 2.0) - 0.36).abs() < 0.005);
        assert!((swc(0.565, Some(2.5), 2.0) - 0.45).abs() < 0.005);
    }

    #[test]
    fn seed_aggregation() {
        let p = CostParams::default();
        let base = compute_metrics(&[traj(&[1.0], Some(Outcome::Success))], &p).unwrap();
        let agg = aggregate_seeds(&[(1, base.clone()), (2, base.clone())]).unwrap();
        let s = agg.mean_std.as_ref().unwrap();
        assert_eq!(s.sr.std, 0.0);
        assert_eq!(s.swc.std, 0.0);
        assert_eq!(s.ttc.unwrap().std, 0.0);

        let mut a = base.clone();
        a.sr = 0.6;
        let mut b = base.clone();
        b.sr = 0.62;
        let agg = aggregate_seeds(&[(1, a), (2, b)]).unwrap();
        let s = agg.mean_std.unwrap();
        assert!((s.sr.mean - 0.61).abs() < 1e-12);
        assert!((s.sr.std - 0.014142135623730963).abs() < 1e-9);

        let single = aggregate_seeds(&[(9, base.clone())]).unwrap();
        assert_eq!(single.sr, base.sr);
        assert_eq!(single.mean_std.unwrap().sr.std, 0.0);
        assert_eq!(single.per_seed.len(), 1);
    }

    fn outcome_strategy() -> impl Strategy<Value = Outcome> {
        prop_oneof![Just(Outcome::Success), Just(Outcome::Failure), Just(Outcome::Timeout)]
    }

    proptest! {
        #[test]
        fn adding_a_step_never_raises_return(costs in proptest::collection::vec(0.0f64..5.0, 0..8), extra in 0.0f64..5.0, outcome in outcome_strategy()) {
            let p = CostParams::default();
            let before = trajectory_return(&traj(&costs, Some(outcome)), &p).unwrap();
            let mut longer = costs.clone();
            longer.push(extra);
            let after = trajectory_return(&traj(&longer, Some(outcome)), &p).unwrap();
            prop_assert!(after <= before);
        }

        #[test]
        fn ask_cost_strictly_increasing(n in 0u32..50, alpha in 0.01f64..2.0) {
            let p = CostParams { alpha, ..CostParams::default() };
            let a = action_cost(&ask(), n, None, &p).unwrap();
            let b = action_cost(&ask(), n + 1, None, &p).unwrap();
            prop_assert!(b > a);
        }

        #[test]
        fn swc_bounded_by_sr(sr in 0.0f64..=1.0, ttc in 0.01f64..10.0, c_ref in 0.1f64..5.0) {
            let v = swc(sr, Some(ttc), c_ref);
            prop_assert!(v <= sr + 1e-15);
            if ttc <= c_ref {
                prop_assert_eq!(v, sr);
            }
        }

        #[test]
        fn concatenation_is_episode_weighted(
            a in proptest::collection::vec((0.0f64..4.0, any::<bool>()), 1..6),
            b in proptest::collection::vec((0.0f64..4.0, any::<bool>()), 1..6),
        ) {
            let p = CostParams::default();
            let mk = |v: &[(f64, bool)]| v.iter().map(|(c, ok)| traj(&[*c], Some(if *ok { Outcome::Success } else { Outcome::Failure }))).collect::<Vec<_>>();
            let ea = mk(&a);
            let eb = mk(&b);
            let mut all = ea.clone();
            all.extend(eb.clone());
            let ma = compute_metrics(&ea, &p).unwrap();
            let mb = compute_metrics(&eb, &p).unwrap();
            let m = compute_metrics(&all, &p).unwrap();
            let (na, nb) = (ea.len() as f64, eb.len() as f64);
            prop_assert!((m.sr - (ma.sr * na + mb.sr * nb) / (na + nb)).abs() < 1e-12);
            let sa = ma.n_success as f64;
            let sb = mb.n_success as f64;
            if sa + sb > 0.0 {
                let weighted = (ma.ttc.unwrap_or(0.0) * sa + mb.ttc.unwrap_or(0.0) * sb) / (sa + sb);
                prop_assert!((m.ttc.unwrap() - weighted).abs() < 1e-9);
            } else {
                prop_assert!(m.ttc.is_none());
            }
        }
    }
}
