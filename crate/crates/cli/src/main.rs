use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use seqbed::agents::EvalMethod;
use seqbed::envs::{ProblemConfig, ProblemKind};
use seqbed_cli::commands::{cmd_baseline, cmd_eval, cmd_sweep, cmd_train, EvalOptions};
use seqbed_cli::config::{RunConfig, DEFAULT_CHUNK};
use seqbed_cli::output::ResultRow;

#[derive(Parser)]
#[command(name = "seqbed", version, about = "Train and evaluate sequential experimental design policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent per configured seed.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's `out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate checkpoints, pooling rollouts across seeds.
    Eval {
        /// Checkpoint files or directories; glob patterns allowed.
        #[arg(long = "ckpt", required = true, num_args = 1..)]
        ckpt: Vec<String>,
        /// `k=1,2,3` or `nu=0.005,0.01`.
        #[arg(long = "override")]
        overrides: Option<String>,
        #[arg(long, default_value_t = 2000)]
        rollouts: usize,
        #[arg(long = "L", default_value_t = 1_000_000)]
        l: usize,
        #[arg(long, default_value_t = DEFAULT_CHUNK)]
        chunk: usize,
        #[arg(long = "sunrise-method", default_value_t = EvalMethod::B)]
        sunrise_method: EvalMethod,
        #[arg(long, default_value = "eval")]
        out: PathBuf,
    },
    /// Random designs drawn uniformly over the design box.
    Baseline {
        /// Problem taken from a run config; otherwise `--problem` defaults.
        #[arg(long, conflicts_with = "problem")]
        config: Option<PathBuf>,
        #[arg(long, value_parser = ["location_finding", "ces"])]
        problem: Option<String>,
        #[arg(long = "override")]
        overrides: Option<String>,
        #[arg(long)]
        rollouts: Option<usize>,
        #[arg(long = "L")]
        l: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        chunk: Option<usize>,
        #[arg(long, default_value = "baseline")]
        out: PathBuf,
    },
    /// Train and evaluate every variant of a matrix over its seeds.
    Sweep {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print_rows(rows: &[ResultRow]) {
    println!("{:<16} {:<10} {:<5} {:>10} {:>9} {:>7} {:>9}", "algorithm", "override", "bound", "mean", "stderr", "n", "seconds");
    for r in rows {
        println!(
            "{:<16} {:<10} {:<5} {:>10.4} {:>9.4} {:>7} {:>9.1}",
            r.algorithm,
            r.override_label,
            r.bound.to_string(),
            r.mean,
            r.stderr,
            r.n,
            r.seconds
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let out = out.unwrap_or_else(|| cfg.out.clone());
            for t in cmd_train(&cfg, &out)? {
                println!("seed {} -> {} (sha256 {}, {:.1}s)", t.manifest.seed, t.dir.display(), t.manifest.checkpoint_sha256, t.manifest.train_seconds);
            }
        }
        Command::Eval { ckpt, overrides, rollouts, l, chunk, sunrise_method, out } => {
            let opts = EvalOptions { overrides, rollouts, l, chunk, method: sunrise_method };
            print_rows(&cmd_eval(&ckpt, &opts, &out)?);
        }
        Command::Baseline { config, problem, overrides, rollouts, l, seeds, chunk, out } => {
            let (problem, defaults) = match config {
                Some(path) => {
                    let cfg = RunConfig::load(&path)?;
                    (cfg.problem.clone(), Some(cfg))
                }
                None => {
                    let kind = match problem.as_deref() {
                        Some("ces") => ProblemKind::Ces,
                        _ => ProblemKind::LocationFinding,
                    };
                    (ProblemConfig::defaults(kind), None)
                }
            };
            let base = defaults.as_ref().map(EvalOptions::from_config);
            let opts = EvalOptions {
                overrides: overrides.or_else(|| base.as_ref().and_then(|b| b.overrides.clone())),
                rollouts: rollouts.or(base.as_ref().map(|b| b.rollouts)).unwrap_or(2000),
                l: l.or(base.as_ref().map(|b| b.l)).unwrap_or(1_000_000),
                chunk: chunk.or(base.as_ref().map(|b| b.chunk)).unwrap_or(DEFAULT_CHUNK),
                method: EvalMethod::default(),
            };
            let seeds = seeds.or_else(|| defaults.map(|d| d.seeds)).unwrap_or_else(|| vec![0]);
            print_rows(&cmd_baseline(&problem, &seeds, &opts, &out)?);
        }
        Command::Sweep { matrix, out } => {
            print_rows(&cmd_sweep(&matrix, out.as_deref()).with_context(|| format!("sweep {}", matrix.display()))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
