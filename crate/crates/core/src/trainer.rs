//! Supervised warm start on expert traces, then group-relative policy
//! optimization with heterogeneous action costs.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, info};

use crate::cost::{MeanStd, Trajectory};
use crate::derive_seed;
use crate::env::{run_episode, EnvConfig, EnvError};
use crate::expert::ExpertTrace;
use crate::policy::linear::{accumulate_grad_log_prob, log_distribution};
use crate::policy::{LinearPolicy, PolicyError, PolicyParams, TemplateFilter};
use crate::scene::{SceneGraph, Task};

pub const CHECKPOINT_VERSION: u32 = 1;
/// Log-ratios are clamped to this magnitude before exponentiation.
pub const LOG_RATIO_CLAMP: f64 = 20.0;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training configuration error: {0}")]
    Config(String),
    #[error("empty training corpus: no expert decisions to fit")]
    EmptyCorpus,
    #[error("training diverged at step {step}: {detail}")]
    Diverged { step: usize, detail: String },
    #[error("rollout of task {task_id} with seed {seed} failed: {source}")]
    Rollout {
        task_id: String,
        seed: u64,
        #[source]
        source: EnvError,
    },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Adam with optional decoupled weight decay. `step` descends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn with_weight_decay(mut self, wd: f64) -> Self {
        self.weight_decay = wd;
        self
    }

    pub fn step(&mut self, weights: &mut [f64], grad: &[f64], lr: f64) {
        assert_eq!(weights.len(), grad.len());
        assert_eq!(weights.len(), self.m.len());
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..weights.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / b1t;
            let vhat = self.v[i] / b2t;
            weights[i] -= lr * (mhat / (vhat.sqrt() + self.eps) + self.weight_decay * weights[i]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Constant,
    /// Linear warmup over the first `warmup_ratio` of steps, then cosine
    /// decay to zero.
    WarmupCosine,
}

/// Step size at `step` (0-based) of `total`.
pub fn scheduled_lr(base: f64, schedule: Schedule, warmup_ratio: f64, step: usize, total: usize) -> f64 {
    match schedule {
        Schedule::Constant => base,
        Schedule::WarmupCosine => {
            let total = total.max(1) as f64;
            let warm = (warmup_ratio * total).ceil();
            let s = step as f64;
            if s < warm {
                base * (s + 1.0) / warm
            } else {
                let span = (total - warm).max(1.0);
                let progress = ((s - warm) / span).clamp(0.0, 1.0);
                base * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SftConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: Schedule,
    pub warmup_ratio: f64,
    /// Decoupled (AdamW-style) weight decay.
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for SftConfig {
    fn default() -> Self {
        Self {
            lr: 0.05,
            epochs: 1,
            batch_size: 16,
            schedule: Schedule::WarmupCosine,
            warmup_ratio: 0.1,
            weight_decay: 0.0,
            seed: 0,
        }
    }
}

impl SftConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(TrainError::Config(format!("sft lr {} must be finite and nonnegative", self.lr)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(TrainError::Config("sft epochs and batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return Err(TrainError::Config(format!("warmup_ratio {} outside [0, 1)", self.warmup_ratio)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(TrainError::Config("weight_decay must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One supervised example: the policy's view at a decision and the expert's
/// choice.
#[derive(Debug, Clone, PartialEq)]
pub struct SftSample {
    pub features: Vec<f64>,
    pub mask: Vec<bool>,
    pub template: usize,
}

pub fn sft_samples(corpus: &[ExpertTrace]) -> Vec<SftSample> {
    corpus
        .iter()
        .flat_map(|t| t.trajectory.steps.iter())
        .filter_map(|s| s.decision.as_ref())
        .map(|d| SftSample {
            features: d.features.clone(),
            mask: d.mask.clone(),
            template: d.template,
        })
        .collect()
}

/// Mean negative log-likelihood of the expert choices.
pub fn sft_loss(params: &PolicyParams, samples: &[SftSample]) -> Result<f64, TrainError> {
    let mut total = 0.0;
    for s in samples {
        total -= log_distribution(params, &s.features, &s.mask)?[s.template];
    }
    Ok(total / samples.len().max(1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftResult {
    pub params: PolicyParams,
    pub final_loss: f64,
    pub initial_loss: f64,
    /// Mean batch loss before each optimizer step.
    pub batch_losses: Vec<f64>,
    pub n_samples: usize,
    pub n_steps: usize,
}

pub fn sft_fit(corpus: &[ExpertTrace], init: &PolicyParams, config: &SftConfig) -> Result<SftResult, TrainError> {
    sft_fit_samples(&sft_samples(corpus), init, config)
}

pub fn sft_fit_samples(samples: &[SftSample], init: &PolicyParams, config: &SftConfig) -> Result<SftResult, TrainError> {
    config.validate()?;
    init.validate()?;
    if samples.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let mut params = init.clone();
    let mut opt = Adam::new(params.weights.len()).with_weight_decay(config.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let per_epoch = samples.len().div_ceil(config.batch_size);
    let total = per_epoch * config.epochs;
    let initial_loss = sft_loss(&params, samples)?;
    let mut batch_losses = Vec::with_capacity(total);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut step = 0;
    let mut grad = vec![0.0; params.weights.len()];
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut loss = 0.0;
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let s = &samples[i];
                let lp = log_distribution(&params, &s.features, &s.mask)?;
                loss -= lp[s.template] * scale;
                let p: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
                // Descend the negative log-likelihood.
                accumulate_grad_log_prob(&params, &s.features, &s.mask, &p, s.template, -scale, &mut grad);
            }
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(TrainError::Diverged {
                    step,
                    detail: format!("batch loss {loss}, initial loss {initial_loss}"),
                });
            }
            batch_losses.push(loss);
            let lr = scheduled_lr(config.lr, config.schedule, config.warmup_ratio, step, total);
            opt.step(&mut params.weights, &grad, lr);
            step += 1;
        }
    }
    let final_loss = sft_loss(&params, samples)?;
    if !final_loss.is_finite() {
        return Err(TrainError::Diverged {
            step,
            detail: format!("final loss {final_loss}"),
        });
    }
    debug!(initial_loss, final_loss, steps = step, "sft finished");
    Ok(SftResult {
        params,
        final_loss,
        initial_loss,
        batch_losses,
        n_samples: samples.len(),
        n_steps: step,
    })
}

/// Standardize rewards within a group: `(r - mean) / (std + eps)` with the
/// population standard deviation. A group of tied rewards carries no signal
/// and gets exactly zero advantages, not rounding residue over `eps`.
pub fn group_advantages(rewards: &[f64], eps: f64) -> Vec<f64> {
    let n = rewards.len() as f64;
    if rewards.is_empty() {
        return Vec::new();
    }
    if rewards.iter().all(|r| *r == rewards[0]) {
        return vec![0.0; rewards.len()];
    }
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    rewards.iter().map(|r| (r - mean) / (std + eps)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrpoConfig {
    pub group_size: usize,
    /// Adam step size. Scaled up from what a multi-billion-parameter model
    /// would use, since the policy here is a small linear model.
    pub lr: f64,
    pub clip_eps: f64,
    pub kl_beta: f64,
    pub entropy_coef: f64,
    pub tasks_per_batch: usize,
    pub epochs: usize,
    /// Optimizer steps taken on each freshly sampled batch.
    pub updates_per_batch: usize,
    /// Average the surrogate over each trajectory's decisions instead of
    /// summing it, so long and short rollouts carry equal weight.
    pub length_normalize: bool,
    pub advantage_epsilon: f64,
    /// Reported bound on the mean divergence from the reference policy.
    pub kl_bound: f64,
    /// Accepted for completeness; returns are undiscounted.
    pub gamma: f64,
    /// Accepted for completeness; there is no critic, so no value loss.
    pub value_loss_weight: f64,
    pub seed: u64,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self {
            group_size: 8,
            lr: 5e-3,
            clip_eps: 0.2,
            kl_beta: 0.1,
            entropy_coef: 0.01,
            tasks_per_batch: 8,
            epochs: 3,
            updates_per_batch: 8,
            length_normalize: true,
            advantage_epsilon: 1e-8,
            kl_bound: 2.0,
            gamma: 0.99,
            value_loss_weight: 1.0,
            seed: 0,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.group_size < 2 {
            return bad(format!("group_size {} must be at least 2", self.group_size));
        }
        if self.tasks_per_batch == 0 || self.epochs == 0 || self.updates_per_batch == 0 {
            return bad("tasks_per_batch, epochs and updates_per_batch must be positive".into());
        }
        for (name, v) in [
            ("lr", self.lr),
            ("clip_eps", self.clip_eps),
            ("kl_beta", self.kl_beta),
            ("entropy_coef", self.entropy_coef),
            ("advantage_epsilon", self.advantage_epsilon),
            ("kl_bound", self.kl_bound),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} = {v} must be finite and nonnegative"));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma {} outside [0, 1]", self.gamma));
        }
        Ok(())
    }
}

/// The G rollouts of one task with their rewards and advantages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSample {
    pub task_id: String,
    pub trajectories: Vec<Trajectory>,
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
}

impl GroupSample {
    pub fn new(task_id: &str, trajectories: Vec<Trajectory>, advantage_epsilon: f64) -> Self {
        let rewards: Vec<f64> = trajectories.iter().map(|t| t.return_value).collect();
        let advantages = group_advantages(&rewards, advantage_epsilon);
        Self {
            task_id: task_id.to_string(),
            trajectories,
            rewards,
            advantages,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub mean_return: f64,
    /// Mean exact KL to the reference policy over visited states, after the
    /// update.
    pub mean_kl: f64,
    pub mean_entropy: f64,
    /// Share of decision steps whose ratio was clipped at the first inner
    /// step.
    pub clip_fraction: f64,
    pub mean_traj_len: f64,
    /// Decision steps whose log-ratio hit the overflow clamp.
    pub n_clamped: usize,
    pub kl_within_bound: bool,
    pub objective: f64,
}

/// Value and gradient (ascent direction) of the regularized clipped
/// surrogate at `params`, with the behaviour log-probabilities stored in the
/// trajectories.
#[derive(Debug, Clone)]
pub struct Surrogate {
    pub value: f64,
    pub grad: Vec<f64>,
    pub mean_kl: f64,
    pub mean_entropy: f64,
    pub clip_fraction: f64,
    pub n_clamped: usize,
}

pub fn grpo_surrogate(
    params: &PolicyParams,
    ref_params: &PolicyParams,
    groups: &[GroupSample],
    config: &GrpoConfig,
) -> Result<Surrogate, TrainError> {
    let nw = params.weights.len();
    let mut grad = vec![0.0; nw];
    let mut kl_grad = vec![0.0; nw];
    let mut surrogate = 0.0;
    let mut kl_sum = 0.0;
    let mut ent_sum = 0.0;
    let mut n_states = 0usize;
    let mut n_clipped = 0usize;
    let mut n_clamped = 0usize;
    let n_traj: usize = groups.iter().map(|g| g.trajectories.len()).sum();
    if n_traj == 0 {
        return Err(TrainError::Config("no trajectories in the batch".into()));
    }
    let traj_w = 1.0 / n_traj as f64;
    let eps = config.clip_eps;
    let tau = params.temperature;
    let nf = params.n_features;
    for g in groups {
        for (traj, &adv) in g.trajectories.iter().zip(&g.advantages) {
            let n_dec = traj.steps.iter().filter(|s| s.decision.is_some()).count().max(1);
            let w = if config.length_normalize { traj_w / n_dec as f64 } else { traj_w };
            for step in &traj.steps {
                let Some(d) = &step.decision else { continue };
                let lp = log_distribution(params, &d.features, &d.mask)?;
                let lref = log_distribution(ref_params, &d.features, &d.mask)?;
                let p: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
                n_states += 1;

                let raw = lp[d.template] - step.log_prob;
                let clamped = raw.clamp(-LOG_RATIO_CLAMP, LOG_RATIO_CLAMP);
                if clamped != raw {
                    n_clamped += 1;
                }
                let rho = clamped.exp();
                let unclipped = rho * adv;
                let clipped = rho.clamp(1.0 - eps, 1.0 + eps) * adv;
                let is_clipped = clipped < unclipped;
                if is_clipped {
                    n_clipped += 1;
                }
                surrogate += w * unclipped.min(clipped);
                if !is_clipped && clamped == raw && adv != 0.0 {
                    accumulate_grad_log_prob(params, &d.features, &d.mask, &p, d.template, w * rho * adv, &mut grad);
                }

                // Exact KL(pi || pi_ref) and entropy over the valid templates.
                let mut kl = 0.0;
                let mut ent = 0.0;
                for t in 0..params.n_templates {
                    if d.mask[t] && p[t] > 0.0 {
                        kl += p[t] * (lp[t] - lref[t]);
                        ent -= p[t] * lp[t];
                    }
                }
                kl_sum += kl;
                ent_sum += ent;
                for t in 0..params.n_templates {
                    if !d.mask[t] || p[t] == 0.0 {
                        continue;
                    }
                    let dkl = p[t] * (lp[t] - lref[t] - kl);
                    let dent = -p[t] * (lp[t] + ent);
                    let coef = (-config.kl_beta * dkl + config.entropy_coef * dent) / tau;
                    if coef == 0.0 {
                        continue;
                    }
                    let row = &mut kl_grad[t * nf..(t + 1) * nf];
                    for (r, x) in row.iter_mut().zip(&d.features) {
                        *r += coef * x;
                    }
                }
            }
        }
    }
    let states = n_states.max(1) as f64;
    let mean_kl = kl_sum / states;
    let mean_entropy = ent_sum / states;
    for (g, k) in grad.iter_mut().zip(&kl_grad) {
        *g += k / states;
    }
    Ok(Surrogate {
        value: surrogate - config.kl_beta * mean_kl + config.entropy_coef * mean_entropy,
        grad,
        mean_kl,
        mean_entropy,
        clip_fraction: n_clipped as f64 / states,
        n_clamped,
    })
}

/// `updates_per_batch` Adam ascent steps on the surrogate for one batch of
/// groups sampled under the current parameters.
pub fn grpo_update(
    params: &PolicyParams,
    ref_params: &PolicyParams,
    groups: &[GroupSample],
    config: &GrpoConfig,
    opt: &mut Adam,
) -> Result<(PolicyParams, UpdateStats), TrainError> {
    config.validate()?;
    let mut next = params.clone();
    let mut first: Option<Surrogate> = None;
    for k in 0..config.updates_per_batch {
        let s = grpo_surrogate(&next, ref_params, groups, config)?;
        if s.grad.iter().any(|g| !g.is_finite()) || !s.value.is_finite() {
            return Err(TrainError::Diverged {
                step: k,
                detail: "non-finite surrogate gradient".into(),
            });
        }
        let descent: Vec<f64> = s.grad.iter().map(|g| -g).collect();
        opt.step(&mut next.weights, &descent, config.lr);
        if first.is_none() {
            first = Some(s);
        }
    }
    let after = grpo_surrogate(&next, ref_params, groups, config)?;
    let first = first.expect("at least one update");
    let rewards: Vec<f64> = groups.iter().flat_map(|g| g.rewards.iter().copied()).collect();
    let lens: Vec<f64> = groups
        .iter()
        .flat_map(|g| g.trajectories.iter().map(|t| t.steps.len() as f64))
        .collect();
    let stats = UpdateStats {
        mean_return: MeanStd::of(&rewards).map_or(0.0, |m| m.mean),
        mean_kl: after.mean_kl,
        mean_entropy: after.mean_entropy,
        clip_fraction: first.clip_fraction,
        mean_traj_len: MeanStd::of(&lens).map_or(0.0, |m| m.mean),
        n_clamped: first.n_clamped,
        kl_within_bound: after.mean_kl <= config.kl_bound,
        objective: after.value,
    };
    Ok((next, stats))
}

/// One row of the training curve. Trajectory length (decisions per episode)
/// stands in for response length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub epoch: usize,
    pub mean_return: f64,
    pub mean_traj_len: f64,
    pub mean_kl: f64,
    pub clip_fraction: f64,
    pub n_clamped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub params: PolicyParams,
    #[serde(default)]
    pub sft: Option<SftConfig>,
    #[serde(default)]
    pub grpo: Option<GrpoConfig>,
    #[serde(default)]
    pub curve: Vec<CurvePoint>,
    #[serde(default)]
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrpoResult {
    pub params: PolicyParams,
    pub curve: Vec<CurvePoint>,
    pub final_kl: f64,
    pub kl_within_bound: bool,
}

/// Roll out `group_size` episodes per task under `params`.
pub fn sample_groups(
    params: &PolicyParams,
    batch: &[(Arc<SceneGraph>, Arc<Task>)],
    env: &EnvConfig,
    config: &GrpoConfig,
    filter: TemplateFilter,
    batch_seed: u64,
) -> Result<Vec<GroupSample>, TrainError> {
    let g = config.group_size;
    let jobs: Vec<(usize, usize)> = (0..batch.len()).flat_map(|i| (0..g).map(move |j| (i, j))).collect();
    let trajectories: Vec<Trajectory> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let (scene, task) = &batch[i];
            let seed = derive_seed(batch_seed, (i * g + j) as u64);
            let mut policy = LinearPolicy::new(params.clone()).with_filter(filter);
            run_episode(&mut policy, scene, task, env, seed).map_err(|source| TrainError::Rollout {
                task_id: task.task_id.clone(),
                seed,
                source,
            })
        })
        .collect::<Result<_, _>>()?;
    let mut it = trajectories.into_iter();
    Ok(batch
        .iter()
        .map(|(_, task)| GroupSample::new(&task.task_id, it.by_ref().take(g).collect(), config.advantage_epsilon))
        .collect())
}

/// Online optimization from the warm-start parameters, which also serve as
/// the frozen reference. `on_iteration` sees every curve point with the
/// current parameters, e.g. to write checkpoints.
pub fn train_hc_grpo<F>(
    pool: &[(Arc<SceneGraph>, Arc<Task>)],
    sft_params: &PolicyParams,
    env: &EnvConfig,
    config: &GrpoConfig,
    mut on_iteration: F,
) -> Result<GrpoResult, TrainError>
where
    F: FnMut(&CurvePoint, &PolicyParams),
{
    config.validate()?;
    sft_params.validate()?;
    if pool.is_empty() {
        return Err(TrainError::Config("empty task pool".into()));
    }
    let reference = sft_params.clone();
    let mut params = sft_params.clone();
    let mut opt = Adam::new(params.weights.len());
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0));
    let mut curve = Vec::new();
    let mut iteration = 0;
    let mut last_kl = 0.0;
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.tasks_per_batch) {
            let batch: Vec<_> = chunk.iter().map(|&i| pool[i].clone()).collect();
            let batch_seed = derive_seed(config.seed, 1 + iteration as u64);
            let groups = sample_groups(&params, &batch, env, config, TemplateFilter::FULL, batch_seed)?;
            let (next, stats) = grpo_update(&params, &reference, &groups, config, &mut opt)?;
            params = next;
            last_kl = stats.mean_kl;
            let point = CurvePoint {
                iteration,
                epoch,
                mean_return: stats.mean_return,
                mean_traj_len: stats.mean_traj_len,
                mean_kl: stats.mean_kl,
                clip_fraction: stats.clip_fraction,
                n_clamped: stats.n_clamped,
            };
            debug!(iteration, mean_return = point.mean_return, kl = point.mean_kl, "grpo iteration");
            on_iteration(&point, &params);
            curve.push(point);
            iteration += 1;
        }
    }
    info!(iterations = iteration, final_kl = last_kl, "hc-grpo finished");
    Ok(GrpoResult {
        params,
        curve,
        final_kl: last_kl,
        kl_within_bound: last_kl <= config.kl_bound,
    })
}

/// Mean of `values` over the first and last `frac` of the sequence (at least
/// one element each).
pub fn head_tail_means(values: &[f64], frac: f64) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let k = ((values.len() as f64 * frac).round() as usize).clamp(1, values.len());
    let head = values[..k].iter().sum::<f64>() / k as f64;
    let tail = values[values.len() - k..].iter().sum::<f64>() / k as f64;
    Some((head, tail))
}
