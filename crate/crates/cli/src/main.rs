mod commands;
mod poses;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Marks errors caused by bad invocations (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Signals that a check ran to completion but failed (exit code 1).
#[derive(Debug)]
pub struct CheckFailed(pub String);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailed {}

#[derive(Parser)]
#[command(name = "posediff", version, about = "Score-based pose diffusion on Lie groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Clone)]
pub struct Common {
    /// Random seed (required; may also come from the config file).
    #[arg(long)]
    pub seed: Option<String>,
    /// Plain-text `key = value` config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory that receives the effective config (and run outputs).
    /// Relative paths resolve against $POSEDIFF_RUN_ROOT when set.
    #[arg(long)]
    pub run_dir: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the math self-check suite and print one line per property.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Inject a known defect to confirm the suite can fail.
        #[arg(long, value_parser = ["none", "right-for-left"])]
        fault: Option<String>,
        /// Print the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Generate a synthetic symmetric-solid pose dataset.
    GenData(commands::GenDataArgs),
    /// Train a score network on a dataset.
    Train(commands::TrainArgs),
    /// Draw poses for one condition from a checkpoint.
    Sample(commands::SampleArgs),
    /// Sample every condition of a dataset and report spread metrics.
    Eval(commands::EvalArgs),
    /// Re-sample a checkpoint with reduced step counts.
    AblateSteps(commands::AblateArgs),
    /// Convert sampled rotations to Mollweide-ready CSV rows.
    ExportViz(commands::ExportArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Verify { common, fault, json } => commands::verify(&common, fault, json),
        Command::GenData(a) => commands::gen_data(&a),
        Command::Train(a) => commands::train(&a),
        Command::Sample(a) => commands::sample(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::AblateSteps(a) => commands::ablate_steps(&a),
        Command::ExportViz(a) => commands::export_viz(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(u) = e.downcast_ref::<UsageError>() {
                eprintln!("error: {u}");
                eprintln!("run with --help for usage");
                ExitCode::from(2)
            } else if let Some(c) = e.downcast_ref::<CheckFailed>() {
                eprintln!("check failed: {c}");
                ExitCode::from(1)
            } else if let Some(posediff_core::Error::InvalidArgument(m)) = e.downcast_ref() {
                eprintln!("error: {m}");
                ExitCode::from(2)
            } else {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        }
    }
}
