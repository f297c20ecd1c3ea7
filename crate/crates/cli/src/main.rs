//! `speechjudge`: corpus analysis, data synthesis, training and evaluation.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use speechjudge::eval::Task;
use speechjudge::synth::forbid_network;

use commands::generate::{GenTask, GenerateArgs};
use config::{Overrides, RunConfig};
use error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "speechjudge", version, about = "Natural-language speech-quality evaluation toolkit")]
struct Cli {
    /// TOML run configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed, fanned out per subsystem.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Refuse all network I/O and use the offline fallback adapter.
    #[arg(long, global = true)]
    offline: bool,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Correlation of each sub-dimension with MOS.
    Analyze {
        #[arg(long)]
        ratings: Option<PathBuf>,
        /// Also write `scatter_<dim>.csv` for every sub-dimension.
        #[arg(long)]
        dump_scatter: bool,
    },
    /// Synthesize a training corpus.
    Generate {
        #[arg(long, value_enum)]
        task: GenTask,
        #[arg(short)]
        n: Option<usize>,
        #[arg(long)]
        ratings: Option<PathBuf>,
        #[arg(long)]
        transcripts: Option<PathBuf>,
    },
    /// Reference pretraining and warm-up finetuning on the toy task.
    Warmup {
        /// MOS corpus whose score tuples define the toy items.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Preference sampling and distillation from the warm-up checkpoint.
    TrainAlld {
        /// Use an existing preference dataset instead of sampling one.
        #[arg(long)]
        preferences: Option<PathBuf>,
    },
    /// Score predictions against a gold corpus.
    Evaluate {
        #[arg(long, value_parser = parse_task)]
        task: Task,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Send ambiguous A/B verdicts to the judge prompt.
        #[arg(long)]
        judge: bool,
    },
    /// Synthetic-word-detection corpus and edit manifest.
    SwdGen {
        #[arg(long)]
        transcripts: Option<PathBuf>,
        #[arg(short)]
        n: Option<usize>,
    },
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse::<Task>().map_err(|e| e.to_string())
}

fn run(cli: Cli) -> CliResult<Vec<PathBuf>> {
    let overrides = Overrides {
        seed: cli.seed,
        offline: cli.offline,
        out_dir: cli.out_dir,
    };
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    if cfg.offline {
        forbid_network();
    }
    match cli.command {
        Command::Analyze { ratings, dump_scatter } => commands::analyze::run(&cfg, ratings.as_deref(), dump_scatter),
        Command::Generate {
            task,
            n,
            ratings,
            transcripts,
        } => commands::generate::run(
            &cfg,
            &GenerateArgs {
                task,
                n,
                ratings: ratings.as_deref(),
                transcripts: transcripts.as_deref(),
            },
        ),
        Command::SwdGen { transcripts, n } => commands::generate::run(
            &cfg,
            &GenerateArgs {
                task: GenTask::Swd,
                n,
                ratings: None,
                transcripts: transcripts.as_deref(),
            },
        ),
        Command::Warmup { corpus } => commands::train::warmup(&cfg, corpus.as_deref()),
        Command::TrainAlld { preferences } => commands::train::alld(&cfg, preferences.as_deref()),
        Command::Evaluate {
            task,
            predictions,
            gold,
            judge,
        } => commands::evaluate::run(&cfg, task, &predictions, &gold, judge),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
