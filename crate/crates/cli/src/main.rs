//! `costsearch`: benchmark generation, expert demonstrations, training,
//! evaluation and ablations for cost-aware interactive object search.
//!
//! Exit status: 0 on success, 1 on a runtime failure, 2 on an invalid
//! configuration or command line, 3 when an upstream artifact is missing.

use std::io::{BufReader, IsTerminal};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use costsearch::harness::{self, HarnessError, PolicyChoice, RunConfig, EXIT_RUNTIME};
use tracing_subscriber::EnvFilter;

#[derive(Debug, Parser)]
#[command(name = "costsearch", version, about = "Cost-aware interactive object search experiments")]
struct Cli {
    /// TOML run configuration; values override the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Benchmark scale.
    #[arg(long, global = true, value_parser = ["desk", "paper"])]
    preset: Option<String>,
    /// Training and evaluation seed; repeat for several.
    #[arg(long = "seed", global = true)]
    seed: Vec<u64>,
    /// Comma-separated seeds, e.g. `0,1,2,3,4`.
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Worker threads for rollouts (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output root.
    #[arg(long, global = true, env = "COSTSEARCH_OUT")]
    out: Option<PathBuf>,
    /// learned, sft, heuristic, random or external.
    #[arg(long, global = true)]
    policy: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the benchmark.
    Gen,
    /// Plan expert demonstrations on the training tasks.
    Expert,
    /// Fit the supervised warm start.
    Sft,
    /// Run group-relative RL from the supervised checkpoints.
    Rl,
    /// Evaluate a policy on the test tasks.
    Eval,
    /// Evaluate the four ablation variants.
    Ablate,
    /// Rebuild all tables from the episode logs.
    Report,
    /// Print the resolved configuration.
    Config,
    /// Play one episode, answering the agent's questions yourself.
    Play {
        /// Task id; defaults to the first test task.
        #[arg(long)]
        task: Option<String>,
        /// Episode seed.
        #[arg(long, default_value_t = 0)]
        episode_seed: u64,
        /// Read answers from this file instead of the terminal.
        #[arg(long)]
        answers: Option<PathBuf>,
    },
}

fn resolve(cli: &Cli) -> Result<RunConfig, HarnessError> {
    let mut config = RunConfig::load(cli.config.as_deref(), cli.preset.as_deref())?;
    let seeds: Vec<u64> = cli.seed.iter().chain(&cli.seeds).copied().collect();
    if !seeds.is_empty() {
        config.seeds = seeds;
    }
    if let Some(w) = cli.workers {
        config.workers = w;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    if let Some(p) = &cli.policy {
        config.policy = PolicyChoice::parse(p)
            .ok_or_else(|| HarnessError::Config(format!("unknown policy {p:?}; expected learned, sft, heuristic, random or external")))?;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let config = resolve(cli)?;
    match &cli.command {
        Command::Gen => {
            let b = harness::cmd_gen(&config)?;
            println!(
                "benchmark: {} train tasks, {} test tasks ({} unseen) in {}",
                b.train.len(),
                b.test.len(),
                b.manifest.unseen_test_task_ids.len(),
                config.layout().benchmark.display()
            );
        }
        Command::Expert => {
            let r = harness::cmd_expert(&config)?;
            println!("expert corpus: {} traces, {} tasks dropped", r.n_traces, r.n_dropped);
        }
        Command::Sft => {
            for (seed, c) in harness::cmd_sft(&config)? {
                println!("sft seed {seed}: final loss {:.4}", c.final_loss.unwrap_or(f64::NAN));
            }
        }
        Command::Rl => {
            for (seed, c) in harness::cmd_rl(&config)? {
                let last = c.curve.last().map_or(f64::NAN, |p| p.mean_return);
                println!("rl seed {seed}: {} iterations, last batch return {last:.4}", c.curve.len());
            }
        }
        Command::Eval => {
            let r = harness::cmd_eval(&config)?;
            print!("{}", harness::render_eval(&r));
        }
        Command::Ablate => {
            let rows = harness::cmd_ablate(&config)?;
            print!("{}", harness::render_ablation(&rows));
        }
        Command::Report => print!("{}", harness::cmd_report(&config)?),
        Command::Config => print!("{}", config.to_toml()),
        Command::Play { task, episode_seed, answers } => {
            let mut stdout = std::io::stdout();
            match answers {
                Some(path) => {
                    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
                    harness::cmd_play(&config, task.as_deref(), *episode_seed, &mut BufReader::new(file), &mut stdout)?;
                }
                None => {
                    let stdin = std::io::stdin();
                    if !stdin.is_terminal() {
                        anyhow::bail!("play needs a terminal on stdin; pass --answers FILE to script the answers");
                    }
                    harness::cmd_play(&config, task.as_deref(), *episode_seed, &mut stdin.lock(), &mut stdout)?;
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<HarnessError>().map_or(EXIT_RUNTIME, HarnessError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
