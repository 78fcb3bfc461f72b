//! `paramstudy`: sensitivity analysis and auto-tuning studies over
//! synthetic image-analysis workflows.

mod commands;
mod config;
mod study;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use paramstudy_core::runtime::SchedulerKind;
use paramstudy_core::spatial::MetricKind;

use config::Overrides;

#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent input; exit code 2.
    Config(String),
    /// The study ran but failed; exit code 3.
    Execution(String),
    /// Writing results failed; exit code 1.
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Execution(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Execution(m) => write!(f, "execution failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "paramstudy",
    version,
    about = "Parameter sensitivity analysis and auto-tuning studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Morris one-at-a-time screening.
    Moat(StudyArgs),
    /// Simple and partial (rank) correlation coefficients.
    Correlate(StudyArgs),
    /// Variance-based decomposition (Sobol indices).
    Vbd(StudyArgs),
    /// Search for the parameters that optimize the metric.
    Tune(StudyArgs),
    /// Execute explicit parameter sets.
    Run(StudyArgs),
    /// Compare two PGM masks.
    Compare {
        mask_a: PathBuf,
        mask_b: PathBuf,
        /// dice, jaccard, overlap-ratio, pixel-diff or signed-area-diff.
        #[arg(long, default_value = "dice")]
        metric: MetricKind,
    },
}

#[derive(Args)]
struct StudyArgs {
    /// Study configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of runtime workers.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the scheduler (fcfs or dlas).
    #[arg(long)]
    scheduler: Option<SchedulerKind>,
    /// Parameter sets per compact graph.
    #[arg(long)]
    batch: Option<usize>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl StudyArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            workers: self.workers,
            scheduler: self.scheduler,
            batch: self.batch,
            out: self.out.clone(),
        }
    }
}

fn run_study(name: &str, args: &StudyArgs) -> Result<(), CliError> {
    let study = config::load(&args.config, &args.overrides())?;
    let method = study.config.method.name();
    if method != name {
        return Err(CliError::Config(format!(
            "{}: method is `{method}` but the subcommand is `{name}`",
            args.config.display()
        )));
    }
    match name {
        "moat" => commands::cmd_moat(&study),
        "correlate" => commands::cmd_correlate(&study),
        "vbd" => commands::cmd_vbd(&study),
        "tune" => commands::cmd_tune(&study),
        "run" => commands::cmd_run(&study),
        _ => unreachable!("subcommands are fixed"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Moat(a) => run_study("moat", a),
        Command::Correlate(a) => run_study("correlate", a),
        Command::Vbd(a) => run_study("vbd", a),
        Command::Tune(a) => run_study("tune", a),
        Command::Run(a) => run_study("run", a),
        Command::Compare {
            mask_a,
            mask_b,
            metric,
        } => commands::cmd_compare(mask_a, mask_b, *metric),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("paramstudy: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
