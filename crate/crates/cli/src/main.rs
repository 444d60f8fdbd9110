//! `cuboidtrack`: simulate synthetic sequences, track them, score the
//! predictions and run the ablation table.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cuboidtrack::tracker::InitMode;

use crate::failure::Failure;

#[derive(Debug, Parser)]
#[command(name = "cuboidtrack", version, about = "Uncertainty-aware cuboid tracking on synthetic sequences")]
pub struct Cli {
    /// Experiment config (JSON); missing fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub no_filtering: bool,
    /// Track without conditioning heatmaps.
    #[arg(long, global = true)]
    pub no_heatmap: bool,
    /// gt, noisy_gt, detector or none.
    #[arg(long, global = true)]
    pub init: Option<InitMode>,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// With `eval`, also write per-frame errors to series.csv.
    #[arg(long, global = true)]
    pub emit_series: bool,
    /// Print the default config and exit.
    #[arg(long)]
    pub dump_defaults: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write `seq_NNNN.jsonl` sequence files.
    Simulate,
    /// Track sequence files and write `pred_NNNN.jsonl` next to them in the output directory.
    Track {
        #[arg(required = true)]
        sequences: Vec<PathBuf>,
    },
    /// Score prediction files against their sequences (paired in order).
    Eval {
        #[arg(required = true)]
        sequences: Vec<PathBuf>,
        #[arg(long = "pred", required = true, num_args = 1..)]
        predictions: Vec<PathBuf>,
    },
    /// Simulate a suite and score every ablation setting on it.
    Ablate,
}

fn run(cli: Cli) -> Result<(), Failure> {
    if cli.dump_defaults {
        commands::emit(&format!("{}\n", config::dump_defaults()));
        return Ok(());
    }
    let Some(command) = &cli.command else {
        return Err(Failure::config("no subcommand given (simulate, track, eval or ablate)"));
    };
    let cfg = config::resolve(&cli, !matches!(command, Command::Eval { .. }))?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Failure::config("--jobs: must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Failure::internal(e.to_string()))?;
    pool.install(|| match command {
        Command::Simulate => commands::simulate(&cfg),
        Command::Track { sequences } => commands::track(&cfg, sequences),
        Command::Eval { sequences, predictions } => commands::eval(&cfg, sequences, predictions, cli.emit_series),
        Command::Ablate => commands::ablate(&cfg),
    })
}

fn main() -> ExitCode {
    let env = env_logger::Env::new().filter_or("CUBOIDTRACK_LOG", "warn");
    env_logger::Builder::from_env(env).format_timestamp(None).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ERROR {}: {}", f.code, f.message.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}
