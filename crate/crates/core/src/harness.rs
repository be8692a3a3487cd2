//! Experiment pipeline behind the `costsearch` command.
//!
//! Every stage reads its inputs from and writes its outputs to one output
//! directory:
//!
//! ```text
//! <out>/benchmark/           manifest.json, scenes/, tasks/      (gen)
//! <out>/expert/corpus.jsonl  one expert trace per training task  (expert)
//! <out>/sft/seed-<s>.json    supervised checkpoint per seed      (sft)
//! <out>/rl/seed-<s>.json     RL checkpoint per seed, with curve  (rl)
//! <out>/eval/<policy>/       episode logs per seed and reports   (eval)
//! <out>/ablate/<variant>/    the same for each ablation row      (ablate)
//! <out>/<command>.config.toml  resolved configuration of the last run
//! ```
//!
//! Reports are recomputed from the episode logs, so `report` can rebuild any
//! table without re-running a policy.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{info, warn};

use crate::benchgen::{build_benchmark, load_benchmark, save_benchmark, BenchConfig, BenchError, Benchmark};
use crate::cost::{aggregate_seeds, compute_metrics, ActionKind, CostError, CostParams, MeanStd, MetricsReport, StepRecord};
use crate::derive_seed;
use crate::env::{finish_trajectory, read_logs, run_episode, write_logs, Action, EnvConfig, EnvError, Episode, EpisodeLog};
use crate::expert::{generate_sft_corpus, CorpusLine, CorpusReport, ExpertTrace, PlanError};
use crate::oracle::interactive_answer;
use crate::policy::{
    AskThenExplore, ExternalConfig, ExternalPolicy, LinearPolicy, Policy, PolicyError, PolicyParams, RandomPolicy,
    TemplateFilter,
};
use crate::scene::{Difficulty, ObjectInstance, SceneGraph, Task};
use crate::trainer::{
    sft_fit, train_hc_grpo, Checkpoint, CurvePoint, GrpoConfig, SftConfig, TrainError, CHECKPOINT_VERSION,
};

/// Process exit status for a completed command.
pub const EXIT_OK: i32 = 0;
/// Exit status for failures while running (i/o, training, episodes).
pub const EXIT_RUNTIME: i32 = 1;
/// Exit status for an invalid configuration or command line.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status when an upstream artifact has not been produced yet.
pub const EXIT_MISSING: i32 = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing {artifact} at {}; run `costsearch {command}` first", path.display())]
    Missing {
        artifact: &'static str,
        path: PathBuf,
        command: &'static str,
    },
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_)
            | HarnessError::Bench(BenchError::Config(_))
            | HarnessError::Train(TrainError::Config(_))
            | HarnessError::Env(EnvError::Config(_))
            | HarnessError::Env(EnvError::Cost(CostError::Argument(_))) => EXIT_CONFIG,
            HarnessError::Missing { .. } => EXIT_MISSING,
            _ => EXIT_RUNTIME,
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Which policy `eval` and `play` run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyChoice {
    /// The RL checkpoint of each seed.
    Learned,
    /// The supervised checkpoint of each seed.
    Sft,
    Heuristic,
    Random,
    External,
}

impl PolicyChoice {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "learned" | "rl" => Some(Self::Learned),
            "sft" => Some(Self::Sft),
            "heuristic" => Some(Self::Heuristic),
            "random" => Some(Self::Random),
            "external" => Some(Self::External),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Learned => "learned",
            Self::Sft => "sft",
            Self::Heuristic => "heuristic",
            Self::Random => "random",
            Self::External => "external",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Passes over the test set per seed, each with fresh episode seeds.
    pub repeats: usize,
    /// Sampling temperature of learned policies.
    pub temperature: f64,
    /// Base of the per-seed evaluation streams.
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            repeats: 6,
            temperature: 1.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    /// Existing benchmark directory; defaults to `<out_dir>/benchmark`.
    pub benchmark: Option<PathBuf>,
    pub seeds: Vec<u64>,
    /// Worker threads for episode rollouts; 0 uses every core.
    pub workers: usize,
    pub policy: PolicyChoice,
    /// Generation settings, including the memory prior.
    pub bench: BenchConfig,
    /// Cost, oracle and horizon settings.
    pub env: EnvConfig,
    /// Seed of the expert's oracle realizations.
    pub expert_seed: u64,
    pub sft: SftConfig,
    pub grpo: GrpoConfig,
    pub eval: EvalConfig,
    pub external: Option<ExternalConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("runs/desk"),
            benchmark: None,
            seeds: (0..5).collect(),
            workers: 0,
            policy: PolicyChoice::Learned,
            bench: BenchConfig::desk(),
            env: EnvConfig::default(),
            expert_seed: 1,
            sft: SftConfig::default(),
            grpo: GrpoConfig::default(),
            eval: EvalConfig::default(),
            external: None,
        }
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl RunConfig {
    /// Defaults, then the benchmark preset, then the file's values.
    pub fn load(path: Option<&Path>, preset: Option<&str>) -> Result<Self> {
        let mut base = Self::default();
        if let Some(name) = preset {
            base.bench = BenchConfig::preset(name)
                .ok_or_else(|| HarnessError::Config(format!("unknown preset {name:?}; expected desk or paper")))?;
        }
        let Some(path) = path else {
            return Ok(base);
        };
        let text = fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let over: toml::Table =
            toml::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut table = toml::Table::try_from(&base).map_err(|e| HarnessError::Config(e.to_string()))?;
        merge(&mut table, over);
        table
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("seeds must not be empty".into()));
        }
        if self.eval.repeats == 0 {
            return Err(HarnessError::Config("eval.repeats must be at least 1".into()));
        }
        if !(self.eval.temperature > 0.0) || !self.eval.temperature.is_finite() {
            return Err(HarnessError::Config(format!("eval.temperature {} must be positive", self.eval.temperature)));
        }
        if self.policy == PolicyChoice::External && self.external.is_none() {
            return Err(HarnessError::Config("policy = \"external\" needs an [external] section".into()));
        }
        self.bench.validate()?;
        self.env.validate()?;
        self.sft.validate()?;
        self.grpo.validate()?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn layout(&self) -> Layout {
        Layout {
            root: self.out_dir.clone(),
            benchmark: self.benchmark.clone().unwrap_or_else(|| self.out_dir.join("benchmark")),
        }
    }
}

/// Artifact paths under one output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
    pub benchmark: PathBuf,
}

impl Layout {
    pub fn corpus(&self) -> PathBuf {
        self.root.join("expert").join("corpus.jsonl")
    }
    pub fn corpus_report(&self) -> PathBuf {
        self.root.join("expert").join("report.json")
    }
    pub fn sft_checkpoint(&self, seed: u64) -> PathBuf {
        self.root.join("sft").join(format!("seed-{seed}.json"))
    }
    pub fn rl_checkpoint(&self, seed: u64) -> PathBuf {
        self.root.join("rl").join(format!("seed-{seed}.json"))
    }
    pub fn rl_curve(&self, seed: u64) -> PathBuf {
        self.root.join("rl").join(format!("seed-{seed}.curve.jsonl"))
    }
    pub fn eval_dir(&self, label: &str) -> PathBuf {
        self.root.join("eval").join(label)
    }
    pub fn ablate_dir(&self) -> PathBuf {
        self.root.join("ablate")
    }
    pub fn episodes(dir: &Path, seed: u64) -> PathBuf {
        dir.join(format!("seed-{seed}.jsonl"))
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::io(path, e))?;
    write_text(path, &(text + "\n"))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, artifact: &'static str, command: &'static str) -> Result<T> {
    if !path.exists() {
        return Err(HarnessError::Missing {
            artifact,
            path: path.to_path_buf(),
            command,
        });
    }
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::io(path, e))
}

fn stamp(config: &RunConfig, command: &str) -> Result<()> {
    write_text(&config.out_dir.join(format!("{command}.config.toml")), &config.to_toml())
}

/// Run `f` on a pool of `workers` threads (0: the global pool).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

pub fn load_bench(config: &RunConfig) -> Result<Benchmark> {
    let dir = config.layout().benchmark;
    if !dir.join("manifest.json").exists() {
        return Err(HarnessError::Missing {
            artifact: "benchmark",
            path: dir,
            command: "gen",
        });
    }
    Ok(load_benchmark(&dir)?)
}

// ---------------------------------------------------------------- stages

pub fn cmd_gen(config: &RunConfig) -> Result<Benchmark> {
    config.validate()?;
    let bench = build_benchmark(&config.bench)?;
    let dir = config.layout().benchmark;
    save_benchmark(&bench, &dir)?;
    stamp(config, "gen")?;
    info!(
        train = bench.train.len(),
        test = bench.test.len(),
        dir = %dir.display(),
        "benchmark written"
    );
    Ok(bench)
}

pub fn cmd_expert(config: &RunConfig) -> Result<CorpusReport> {
    config.validate()?;
    let bench = load_bench(config)?;
    let pairs = bench.train_pairs();
    let (traces, report) = with_workers(config.workers, || generate_sft_corpus(&pairs, &config.env, config.expert_seed))??;
    let layout = config.layout();
    let lines: Vec<String> = traces
        .iter()
        .zip(traces.iter().map(|t| difficulty_of(&bench, &t.task_id)))
        .map(|(t, d)| {
            let line = CorpusLine {
                episode: EpisodeLog::new("expert", d, t.trajectory.clone(), Vec::new()),
                root_value: t.root_value,
                expert_steps: t.steps.clone(),
            };
            serde_json::to_string(&line).expect("corpus line serializes")
        })
        .collect();
    let mut text = lines.join("\n");
    text.push('\n');
    write_text(&layout.corpus(), &text)?;
    write_json(&layout.corpus_report(), &report)?;
    stamp(config, "expert")?;
    if report.n_dropped > 0 {
        warn!(dropped = report.n_dropped, "expert could not solve every task");
    }
    info!(traces = report.n_traces, "expert corpus written");
    Ok(report)
}

fn difficulty_of(bench: &Benchmark, task_id: &str) -> Difficulty {
    bench
        .train
        .iter()
        .chain(&bench.test)
        .find(|t| t.task_id == task_id)
        .map_or(Difficulty::Easy, |t| t.difficulty)
}

pub fn load_corpus(config: &RunConfig) -> Result<Vec<ExpertTrace>> {
    let path = config.layout().corpus();
    if !path.exists() {
        return Err(HarnessError::Missing {
            artifact: "expert corpus",
            path,
            command: "expert",
        });
    }
    let file = fs::File::open(&path).map_err(|e| HarnessError::io(&path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| HarnessError::io(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let c: CorpusLine =
            serde_json::from_str(&line).map_err(|e| HarnessError::io(&path, format!("line {}: {e}", i + 1)))?;
        out.push(ExpertTrace {
            task_id: c.episode.trajectory.task_id.clone(),
            root_value: c.root_value,
            steps: c.expert_steps,
            trajectory: c.episode.trajectory,
        });
    }
    Ok(out)
}

pub fn cmd_sft(config: &RunConfig) -> Result<Vec<(u64, Checkpoint)>> {
    config.validate()?;
    let corpus = load_corpus(config)?;
    let layout = config.layout();
    let mut out = Vec::new();
    for &seed in &config.seeds {
        let cfg = SftConfig { seed, ..config.sft.clone() };
        let fit = sft_fit(&corpus, &PolicyParams::zeros(&format!("sft-{seed}")), &cfg)?;
        info!(seed, initial = fit.initial_loss, last = fit.final_loss, steps = fit.n_steps, "sft done");
        let ckpt = Checkpoint {
            format_version: CHECKPOINT_VERSION,
            params: fit.params,
            sft: Some(cfg),
            grpo: None,
            curve: Vec::new(),
            final_loss: Some(fit.final_loss),
        };
        write_json(&layout.sft_checkpoint(seed), &ckpt)?;
        out.push((seed, ckpt));
    }
    stamp(config, "sft")?;
    Ok(out)
}

pub fn load_checkpoint(path: &Path, stage: &'static str) -> Result<Checkpoint> {
    let (artifact, command) = match stage {
        "sft" => ("SFT checkpoint", "sft"),
        _ => ("RL checkpoint", "rl"),
    };
    let ckpt: Checkpoint = read_json(path, artifact, command)?;
    if ckpt.format_version != CHECKPOINT_VERSION {
        return Err(HarnessError::io(path, format!("unsupported checkpoint version {}", ckpt.format_version)));
    }
    ckpt.params.validate()?;
    Ok(ckpt)
}

pub fn cmd_rl(config: &RunConfig) -> Result<Vec<(u64, Checkpoint)>> {
    config.validate()?;
    let layout = config.layout();
    let starts: Vec<(u64, Checkpoint)> = config
        .seeds
        .iter()
        .map(|&s| load_checkpoint(&layout.sft_checkpoint(s), "sft").map(|c| (s, c)))
        .collect::<Result<_>>()?;
    let bench = load_bench(config)?;
    let pool = bench.train_pairs();
    let mut out = Vec::new();
    for (seed, start) in starts {
        let cfg = GrpoConfig { seed, ..config.grpo.clone() };
        let result = with_workers(config.workers, || train_hc_grpo(&pool, &start.params, &config.env, &cfg, |_, _| {}))??;
        let mut params = result.params;
        params.version = format!("rl-{seed}");
        if !result.kl_within_bound {
            warn!(seed, kl = result.final_kl, bound = cfg.kl_bound, "divergence from the reference exceeds its bound");
        }
        let ckpt = Checkpoint {
            format_version: CHECKPOINT_VERSION,
            params,
            sft: start.sft.clone(),
            grpo: Some(cfg),
            curve: result.curve,
            final_loss: start.final_loss,
        };
        write_curve(&layout.rl_curve(seed), &ckpt.curve)?;
        write_json(&layout.rl_checkpoint(seed), &ckpt)?;
        info!(seed, kl = result.final_kl, "rl done");
        out.push((seed, ckpt));
    }
    stamp(config, "rl")?;
    Ok(out)
}

fn write_curve(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let mut text = String::new();
    for p in curve {
        text.push_str(&serde_json::to_string(p).expect("curve point serializes"));
        text.push('\n');
    }
    write_text(path, &text)
}

// ---------------------------------------------------------------- evaluation

/// How to obtain a fresh policy instance for one episode.
#[derive(Debug, Clone)]
pub enum PolicySpec {
    Linear { params: PolicyParams, filter: TemplateFilter },
    Heuristic,
    Random,
    External(ExternalConfig),
}

impl PolicySpec {
    pub fn instantiate(&self) -> Result<Box<dyn Policy>> {
        Ok(match self {
            PolicySpec::Linear { params, filter } => Box::new(LinearPolicy::new(params.clone()).with_filter(*filter)),
            PolicySpec::Heuristic => Box::new(AskThenExplore),
            PolicySpec::Random => Box::new(RandomPolicy),
            PolicySpec::External(cfg) => Box::new(ExternalPolicy::spawn(cfg.clone())?),
        })
    }
}

/// Run every task `repeats` times under `spec`, in parallel. Episode seeds
/// depend only on `seed_base`, the repeat and the task's position.
pub fn evaluate(
    pairs: &[(Arc<SceneGraph>, Arc<Task>)],
    spec: &PolicySpec,
    env: &EnvConfig,
    repeats: usize,
    seed_base: u64,
) -> Result<Vec<EpisodeLog>> {
    let jobs: Vec<(usize, usize)> = (0..repeats).flat_map(|r| (0..pairs.len()).map(move |i| (r, i))).collect();
    let label = policy_label(spec);
    jobs.par_iter()
        .map(|&(r, i)| {
            let (scene, task) = &pairs[i];
            let seed = derive_seed(seed_base, (r * pairs.len() + i) as u64);
            let mut policy = spec.instantiate()?;
            let traj = run_episode(policy.as_mut(), scene, task, env, seed)?;
            Ok(EpisodeLog::new(&label, task.difficulty, traj, Vec::new()))
        })
        .collect()
}

fn policy_label(spec: &PolicySpec) -> String {
    match spec {
        PolicySpec::Linear { params, .. } => format!("linear:{}", params.version),
        PolicySpec::Heuristic => "heuristic".into(),
        PolicySpec::Random => "random".into(),
        PolicySpec::External(c) => format!("external:{}", c.command),
    }
}

/// Policy of `choice` for one seed.
pub fn policy_for(config: &RunConfig, choice: PolicyChoice, seed: u64) -> Result<PolicySpec> {
    let layout = config.layout();
    let linear = |path: PathBuf, stage| -> Result<PolicySpec> {
        let ckpt = load_checkpoint(&path, stage)?;
        Ok(PolicySpec::Linear {
            params: ckpt.params.with_temperature(config.eval.temperature),
            filter: TemplateFilter::FULL,
        })
    };
    match choice {
        PolicyChoice::Learned => linear(layout.rl_checkpoint(seed), "rl"),
        PolicyChoice::Sft => linear(layout.sft_checkpoint(seed), "sft"),
        PolicyChoice::Heuristic => Ok(PolicySpec::Heuristic),
        PolicyChoice::Random => Ok(PolicySpec::Random),
        PolicyChoice::External => config
            .external
            .clone()
            .map(PolicySpec::External)
            .ok_or_else(|| HarnessError::Config("policy = \"external\" needs an [external] section".into())),
    }
}

/// Aggregate, per-difficulty and per-seed view of a set of episode logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub policy: String,
    pub overall: MetricsReport,
    pub per_difficulty: BTreeMap<Difficulty, MetricsReport>,
    /// Mean return per seed.
    pub mean_return: BTreeMap<u64, f64>,
}

pub fn report_from_logs(policy: &str, runs: &[(u64, Vec<EpisodeLog>)], cost: &CostParams) -> Result<EvalReport> {
    let score = |filter: &dyn Fn(&EpisodeLog) -> bool| -> Result<Option<MetricsReport>> {
        let mut per_seed = Vec::new();
        for (seed, logs) in runs {
            let trajs: Vec<_> = logs.iter().filter(|l| filter(l)).map(|l| l.trajectory.clone()).collect();
            if !trajs.is_empty() {
                per_seed.push((*seed, compute_metrics(&trajs, cost)?));
            }
        }
        if per_seed.is_empty() {
            return Ok(None);
        }
        Ok(Some(aggregate_seeds(&per_seed)?))
    };
    let overall = score(&|_| true)?.ok_or_else(|| HarnessError::Config(format!("no episodes logged for {policy}")))?;
    let mut per_difficulty = BTreeMap::new();
    for d in Difficulty::ALL {
        if let Some(r) = score(&|l: &EpisodeLog| l.difficulty == d)? {
            per_difficulty.insert(d, r);
        }
    }
    let mean_return = runs
        .iter()
        .map(|(s, logs)| {
            let total: f64 = logs.iter().map(|l| l.trajectory.return_value).sum();
            (*s, total / logs.len().max(1) as f64)
        })
        .collect();
    Ok(EvalReport {
        policy: policy.to_string(),
        overall,
        per_difficulty,
        mean_return,
    })
}

fn save_logs(path: &Path, logs: &[EpisodeLog]) -> Result<()> {
    ensure_parent(path)?;
    let file = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_logs(&mut w, logs)?;
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn load_logs(path: &Path) -> Result<Vec<EpisodeLog>> {
    let file = fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(read_logs(BufReader::new(file))?)
}

/// Seed-tagged episode logs found in `dir`.
pub fn logs_in(dir: &Path) -> Result<Vec<(u64, Vec<EpisodeLog>)>> {
    let mut out = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| HarnessError::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let Some(seed) = name.strip_prefix("seed-").and_then(|s| s.strip_suffix(".jsonl")) else {
            continue;
        };
        let Ok(seed) = seed.parse::<u64>() else {
            continue;
        };
        out.push((seed, load_logs(&path)?));
    }
    out.sort_by_key(|(s, _)| *s);
    Ok(out)
}

fn run_and_save(config: &RunConfig, dir: &Path, bench: &Benchmark, spec_of: impl Fn(u64) -> Result<PolicySpec>) -> Result<Vec<(u64, Vec<EpisodeLog>)>> {
    let pairs = bench.test_pairs();
    let mut runs = Vec::new();
    for &seed in &config.seeds {
        let spec = spec_of(seed)?;
        let base = derive_seed(config.eval.seed, seed);
        let logs = with_workers(config.workers, || evaluate(&pairs, &spec, &config.env, config.eval.repeats, base))??;
        save_logs(&Layout::episodes(dir, seed), &logs)?;
        runs.push((seed, logs));
    }
    Ok(runs)
}

fn save_report(dir: &Path, report: &EvalReport) -> Result<String> {
    let text = render_eval(report);
    write_json(&dir.join("report.json"), report)?;
    write_text(&dir.join("report.txt"), &text)?;
    Ok(text)
}

pub fn cmd_eval(config: &RunConfig) -> Result<EvalReport> {
    config.validate()?;
    let bench = load_bench(config)?;
    let choice = config.policy;
    let dir = config.layout().eval_dir(choice.label());
    let runs = run_and_save(config, &dir, &bench, |s| policy_for(config, choice, s))?;
    let report = report_from_logs(choice.label(), &runs, &config.env.cost)?;
    save_report(&dir, &report)?;
    stamp(config, "eval")?;
    Ok(report)
}

/// Ablation variants, in table order.
pub const ABLATIONS: [(&str, &str); 4] = [
    ("full", "Full"),
    ("no-dialogue", "w/o Dialogue"),
    ("no-memory", "w/o Memory"),
    ("no-hc-grpo", "w/o HC-GRPO"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub label: String,
    pub sr: MeanStd,
    pub ttc: Option<MeanStd>,
    pub swc: MeanStd,
    pub report: EvalReport,
}

fn ablation_spec(config: &RunConfig, variant: &str, seed: u64) -> Result<PolicySpec> {
    let layout = config.layout();
    let (path, stage, filter) = match variant {
        "full" => (layout.rl_checkpoint(seed), "rl", TemplateFilter::FULL),
        "no-dialogue" => (layout.rl_checkpoint(seed), "rl", TemplateFilter { allow_ask: false, allow_memory: true }),
        "no-memory" => (layout.rl_checkpoint(seed), "rl", TemplateFilter { allow_ask: true, allow_memory: false }),
        "no-hc-grpo" => (layout.sft_checkpoint(seed), "sft", TemplateFilter::FULL),
        other => return Err(HarnessError::Config(format!("unknown ablation {other:?}"))),
    };
    let ckpt = load_checkpoint(&path, stage)?;
    Ok(PolicySpec::Linear {
        params: ckpt.params.with_temperature(config.eval.temperature),
        filter,
    })
}

fn ablation_row(variant: &str, label: &str, report: EvalReport) -> AblationRow {
    let summary = report.overall.mean_std.clone().expect("aggregated report");
    AblationRow {
        variant: variant.into(),
        label: label.into(),
        sr: summary.sr,
        ttc: summary.ttc,
        swc: summary.swc,
        report,
    }
}

pub fn cmd_ablate(config: &RunConfig) -> Result<Vec<AblationRow>> {
    config.validate()?;
    for &s in &config.seeds {
        load_checkpoint(&config.layout().rl_checkpoint(s), "rl")?;
    }
    let bench = load_bench(config)?;
    let root = config.layout().ablate_dir();
    let mut rows = Vec::new();
    for (variant, label) in ABLATIONS {
        let dir = root.join(variant);
        let runs = run_and_save(config, &dir, &bench, |s| ablation_spec(config, variant, s))?;
        let report = report_from_logs(variant, &runs, &config.env.cost)?;
        save_report(&dir, &report)?;
        rows.push(ablation_row(variant, label, report));
    }
    write_json(&root.join("table.json"), &rows)?;
    write_text(&root.join("table.txt"), &render_ablation(&rows))?;
    stamp(config, "ablate")?;
    Ok(rows)
}

/// Rebuild every report under the output directory from its episode logs.
pub fn cmd_report(config: &RunConfig) -> Result<String> {
    let layout = config.layout();
    let mut text = String::new();
    let eval_root = layout.root.join("eval");
    if eval_root.is_dir() {
        let mut dirs: Vec<PathBuf> = fs::read_dir(&eval_root)
            .map_err(|e| HarnessError::io(&eval_root, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        dirs.sort();
        for dir in dirs {
            let runs = logs_in(&dir)?;
            if runs.is_empty() {
                continue;
            }
            let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or("policy").to_string();
            let report = report_from_logs(&name, &runs, &config.env.cost)?;
            text.push_str(&save_report(&dir, &report)?);
            text.push('\n');
        }
    }
    let root = layout.ablate_dir();
    let mut rows = Vec::new();
    for (variant, label) in ABLATIONS {
        let dir = root.join(variant);
        if !dir.is_dir() {
            continue;
        }
        let runs = logs_in(&dir)?;
        if runs.is_empty() {
            continue;
        }
        let report = report_from_logs(variant, &runs, &config.env.cost)?;
        save_report(&dir, &report)?;
        rows.push(ablation_row(variant, label, report));
    }
    if !rows.is_empty() {
        let table = render_ablation(&rows);
        write_json(&root.join("table.json"), &rows)?;
        write_text(&root.join("table.txt"), &table)?;
        text.push_str(&table);
    }
    if text.is_empty() {
        return Err(HarnessError::Missing {
            artifact: "episode logs",
            path: layout.root.join("eval"),
            command: "eval",
        });
    }
    Ok(text)
}

// ---------------------------------------------------------------- play

/// Transcript of an interactive episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayTranscript {
    pub task_id: String,
    pub steps: Vec<(String, f64)>,
    pub total_cost: f64,
    pub return_value: f64,
    pub outcome: Option<crate::cost::Outcome>,
}

/// One episode where every question goes to the person at `input`.
pub fn cmd_play<R: BufRead, W: Write>(
    config: &RunConfig,
    task_id: Option<&str>,
    seed: u64,
    input: &mut R,
    output: &mut W,
) -> Result<PlayTranscript> {
    config.validate()?;
    let bench = load_bench(config)?;
    let task = match task_id {
        Some(id) => bench
            .test
            .iter()
            .chain(&bench.train)
            .find(|t| t.task_id == id)
            .cloned()
            .ok_or_else(|| HarnessError::Config(format!("no task {id:?} in the benchmark")))?,
        None => bench.test.first().cloned().ok_or_else(|| HarnessError::Config("empty test split".into()))?,
    };
    let scene = bench.scene_of(&task);
    let spec = policy_for(config, config.policy, config.seeds[0])?;
    let mut policy = spec.instantiate()?;
    let term = |e: std::io::Error| HarnessError::Io {
        path: PathBuf::from("<terminal>"),
        message: e.to_string(),
    };
    let (mut ep, mut obs) = Episode::reset(scene.clone(), task.clone(), config.env, seed)?;
    writeln!(output, "Task {}: {}", task.task_id, task.instruction).map_err(term)?;
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(derive_seed(seed, 2));
    let mut records = Vec::new();
    let mut steps = Vec::new();
    while !ep.is_done() {
        let decision = policy.decide(&obs, &mut rng)?;
        let (res, action) = match decision.action {
            Ok(action) => {
                let reply = match &action {
                    Action::Ask { query } => {
                        let remaining: Vec<&ObjectInstance> = ep
                            .belief()
                            .remaining
                            .iter()
                            .map(|id| scene.object(*id))
                            .collect::<std::result::Result<_, _>>()
                            .map_err(EnvError::from)?;
                        Some(interactive_answer(*query, &remaining, input, output).map_err(term)?)
                    }
                    _ => None,
                };
                let res = ep.step_with_reply(&action, reply)?;
                let action = res.malformed.is_none().then_some(action);
                (res, action)
            }
            Err(reason) => (ep.reject(&reason)?, None),
        };
        let label = action.as_ref().map_or_else(|| "malformed".to_string(), |a| a.to_string());
        writeln!(output, "step {:>2}  {:<40} cost {:.3}  total {:.3}", records.len() + 1, label, res.cost, ep.total_cost())
            .map_err(term)?;
        steps.push((label, res.cost));
        records.push(StepRecord {
            action,
            malformed: res.malformed.clone(),
            cost: res.cost,
            observation: res.observation.summary(),
            log_prob: decision.log_prob,
            decision: decision.trace,
        });
        obs = res.observation;
    }
    let traj = finish_trajectory(&ep, seed, records)?;
    writeln!(
        output,
        "outcome {:?}  total cost {:.3}  return {:.3}",
        traj.outcome.expect("finished episode"),
        traj.total_cost,
        traj.return_value
    )
    .map_err(term)?;
    Ok(PlayTranscript {
        task_id: task.task_id.clone(),
        steps,
        total_cost: traj.total_cost,
        return_value: traj.return_value,
        outcome: traj.outcome,
    })
}

// ---------------------------------------------------------------- tables

fn fmt_ms(m: &MeanStd, digits: usize) -> String {
    format!("{:.*} ± {:.*}", digits, m.mean, digits, m.std)
}

fn fmt_opt(m: &Option<MeanStd>, digits: usize) -> String {
    m.as_ref().map_or_else(|| "-".to_string(), |m| fmt_ms(m, digits))
}

/// Left-aligned first column, right-aligned rest.
pub fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let n = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate().take(n) {
            widths[i] = widths[i].max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if i == 0 {
                    format!("{:<w$}", c, w = widths[i])
                } else {
                    format!("{:>w$}", c, w = widths[i])
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

fn metrics_row(name: &str, r: &MetricsReport) -> Vec<String> {
    let s = r.mean_std.as_ref().expect("aggregated report");
    vec![
        name.to_string(),
        r.n_episodes.to_string(),
        fmt_ms(&s.sr, 3),
        fmt_opt(&s.ttc, 3),
        fmt_ms(&s.swc, 3),
        fmt_ms(&s.traj_len, 2),
    ]
}

pub fn render_eval(report: &EvalReport) -> String {
    let header = ["split", "episodes", "SR", "TTC", "SwC", "length"];
    let mut rows = vec![metrics_row("all", &report.overall)];
    for (d, r) in &report.per_difficulty {
        rows.push(metrics_row(d.as_str(), r));
    }
    let mut out = format!("policy {}\n", report.policy);
    out.push_str(&render_table(&header, &rows));
    out.push('\n');
    let share: Vec<Vec<String>> = ActionKind::ALL
        .iter()
        .map(|k| {
            vec![
                k.as_str().to_string(),
                report.overall.action_histogram.get(k).copied().unwrap_or(0).to_string(),
                format!("{:.3}", report.overall.action_share(*k)),
            ]
        })
        .collect();
    out.push_str(&render_table(&["action", "count", "share"], &share));
    out.push('\n');
    let seeds: Vec<Vec<String>> = report
        .overall
        .per_seed
        .iter()
        .map(|s| {
            vec![
                s.seed.to_string(),
                format!("{:.3}", s.sr),
                s.ttc.map_or_else(|| "-".into(), |t| format!("{t:.3}")),
                format!("{:.3}", s.swc),
                report.mean_return.get(&s.seed).map_or_else(|| "-".into(), |r| format!("{r:.3}")),
            ]
        })
        .collect();
    out.push_str(&render_table(&["seed", "SR", "TTC", "SwC", "return"], &seeds));
    out
}

pub fn render_ablation(rows: &[AblationRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.label.clone(), fmt_ms(&r.sr, 3), fmt_opt(&r.ttc, 3), fmt_ms(&r.swc, 3)])
        .collect();
    render_table(&["variant", "SR", "TTC", "SwC"], &body)
}
