//! `kdaug` experiment driver.

mod commands;
mod error;
mod manifest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;

#[derive(Parser)]
#[command(
    name = "kdaug",
    version,
    about = "Distillation and augmentation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Io {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic task with train/test files and embeddings.
    GenSynthetic(Io),
    /// Train a teacher with cross-entropy.
    TrainTeacher(Io),
    /// Fine-tune a student on labels, optionally with augmentation.
    Finetune(Io),
    /// Distil a student from a teacher checkpoint.
    Distill(Io),
    /// Grid of data fractions and augmentation degrees.
    SweepDegree(Io),
    /// Write augmented copies of a dataset.
    Augment(Io),
    /// Error-gap simulations and bound formulas.
    Theory {
        #[command(subcommand)]
        command: TheoryCommand,
    },
}

#[derive(Subcommand)]
enum TheoryCommand {
    /// Per-trial gap report.
    Verify(Io),
    /// Best bandwidth per training-set size.
    SweepTau(Io),
    /// Print the closed-form thresholds.
    Bounds(Io),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenSynthetic(io) => commands::gen_synthetic::run(&io),
        Command::TrainTeacher(io) => commands::train::run(&io, commands::train::Kind::Teacher),
        Command::Finetune(io) => commands::train::run(&io, commands::train::Kind::Finetune),
        Command::Distill(io) => commands::train::run(&io, commands::train::Kind::Distill),
        Command::SweepDegree(io) => commands::sweep::run(&io),
        Command::Augment(io) => commands::augment::run(&io),
        Command::Theory { command } => match command {
            TheoryCommand::Verify(io) => commands::theory::verify(&io),
            TheoryCommand::SweepTau(io) => commands::theory::sweep_tau(&io),
            TheoryCommand::Bounds(io) => commands::theory::bounds(&io),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code())
        }
    }
}
