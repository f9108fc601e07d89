use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use itst_cli::commands::{self, AblateArgs, EvalArgs, GenData, SearchArgs, TrainArgs};
use itst_cli::Result;

/// Triple-path transformer for amplifier fault diagnosis.
#[derive(Parser)]
#[command(name = "itst", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic train/test dataset.
    GenData {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fraction of the full dataset size, in (0, 1].
        #[arg(long, default_value_t = commands::DEFAULT_SCALE)]
        scale: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model; the last stdout line is `CC=<test cross-entropy>`.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// JSON file with optional `model` and `train` sections.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated subset of time,sensor,frequency.
        #[arg(long)]
        paths: Option<String>,
    },
    /// Evaluate a checkpoint on a dataset's test split.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train all seven encoder-path subsets.
    Ablate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seeds per subset: seed, seed + 1, ...
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seeded random hyperparameter search.
    Search {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// JSON search space; defaults to the built-in bounds.
        #[arg(long)]
        space: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(command: Command, stdout: &mut String) -> Result<()> {
    match command {
        Command::GenData { seed, scale, out } => {
            commands::gen_data(&GenData { seed, scale, out }, stdout)?;
        }
        Command::Train {
            data,
            config,
            seed,
            out,
            paths,
        } => {
            commands::train_cmd(
                &TrainArgs {
                    data,
                    config,
                    seed,
                    out,
                    paths,
                },
                stdout,
            )?;
        }
        Command::Eval {
            data,
            checkpoint,
            out,
        } => {
            commands::eval_cmd(
                &EvalArgs {
                    data,
                    checkpoint,
                    out,
                },
                stdout,
            )?;
        }
        Command::Ablate {
            data,
            config,
            seed,
            repeats,
            out,
        } => {
            commands::ablate_cmd(
                &AblateArgs {
                    data,
                    config,
                    seed,
                    repeats,
                    out,
                },
                stdout,
            )?;
        }
        Command::Search {
            data,
            config,
            space,
            budget,
            seed,
            out,
        } => {
            commands::search_cmd(
                &SearchArgs {
                    data,
                    config,
                    space,
                    budget,
                    seed,
                    out,
                },
                stdout,
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = String::new();
    let result = commands::threads_from_env()
        .and_then(|threads| {
            Ok(itst::train::install(threads, || {
                run(cli.command, &mut stdout)
            })?)
        })
        .and_then(|r| r);
    print!("{stdout}");
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
