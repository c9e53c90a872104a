//! The `ci-robust` command line.
//!
//! Exit codes: 0 on success, 1 when the command line or configuration is
//! invalid, 2 when an accepted experiment fails at runtime.

use std::path::Path;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ci_robust_cli::config::{read_config, ExperimentConfig, TheoryConfig};
use ci_robust_cli::runner::{self, HarnessError};
use ci_robust_cli::selfcheck::run_selfcheck;
use ci_robust_cli::theory::run_theory;

#[derive(Parser)]
#[command(
    name = "ci-robust",
    version,
    about = "Regression-based conditional-independence testing experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a replicated experiment and tabulate rejection rates.
    Simulate(RunArgs),
    /// Run the configured test once and print its outcome.
    Test(RunArgs),
    /// Estimate population gaps on a built-in oracle fixture.
    Theory(RunArgs),
    /// Exercise fast internal invariants.
    Selfcheck,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's base_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving report.csv and summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Stdout format when --out is not given.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads; 0 means one per core.
    #[arg(long, env = "CI_ROBUST_JOBS", default_value_t = 0)]
    jobs: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code: u8 = if err.exit_code() == 0 { 0 } else { 1 };
            err.print().expect("clap can write its own message");
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut cause = std::error::Error::source(&err);
            while let Some(inner) = cause {
                eprintln!("  caused by: {inner}");
                cause = inner.source();
            }
            let code = match err {
                HarnessError::Config(_) | HarnessError::Ingest(_) => 1,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Simulate(args) => {
            let mut config = ExperimentConfig::from_raw(read_config(&args.config)?)?;
            if let Some(seed) = args.seed {
                config.base_seed = seed;
            }
            let report = runner::run_experiment(&config, args.jobs)?;
            emit(&args, report.to_csv()?, report.to_json()?)
        }
        Command::Test(args) => {
            let mut config = ExperimentConfig::from_raw(read_config(&args.config)?)?;
            if let Some(seed) = args.seed {
                config.base_seed = seed;
            }
            let outcome = runner::run_single_test(&config)?;
            emit(
                &args,
                runner::outcome_csv(&outcome)?,
                serde_json::to_string_pretty(&outcome)?,
            )
        }
        Command::Theory(args) => {
            let mut config = TheoryConfig::from_raw(read_config(&args.config)?)?;
            if let Some(seed) = args.seed {
                config.base_seed = seed;
            }
            let report = run_theory(&config)?;
            emit(&args, report.to_csv()?, report.to_json()?)
        }
        Command::Selfcheck => run_selfcheck(),
    }
}

fn emit(args: &RunArgs, csv: String, json: String) -> Result<(), HarnessError> {
    match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|source| HarnessError::Output {
                path: dir.display().to_string(),
                source,
            })?;
            let csv_path = dir.join("report.csv");
            let json_path = dir.join("summary.json");
            write_file(&csv_path, &csv)?;
            write_file(&json_path, &json)?;
            println!("wrote {} and {}", csv_path.display(), json_path.display());
            Ok(())
        }
        None => {
            match args.format {
                Format::Csv => print!("{csv}"),
                Format::Json => println!("{json}"),
            }
            Ok(())
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    std::fs::write(path, contents).map_err(|source| HarnessError::Output {
        path: path.display().to_string(),
        source,
    })
}
