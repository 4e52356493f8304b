mod run;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use crate::run::{execute, RunError};
use crate::scenario::Scenario;

/// Runs one scenario file and writes CSV, graymap and manifest outputs.
///
/// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
/// 4 failed oracle check.
#[derive(Parser, Debug)]
#[command(name = "nplasmon", version)]
struct Args {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Output directory; overrides the scenario's `output`.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Initial panel count; overrides `mesh.panels`.
    #[arg(long)]
    panels: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Errors only.
    #[arg(short, long, conflicts_with = "verbose")]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = match (args.quiet, args.verbose) {
        (true, _) => log::LevelFilter::Error,
        (_, 0) => log::LevelFilter::Warn,
        (_, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(args: &Args) -> Result<(), RunError> {
    let mut scenario = Scenario::load(&args.scenario)?;
    if let Some(p) = args.panels {
        if p == 0 {
            return Err(scenario::ScenarioError::Invalid("--panels must be positive".into()).into());
        }
        scenario.mesh.panels = Some(p);
    }
    let dir = args
        .output
        .clone()
        .or_else(|| scenario.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    execute(scenario, &dir)
}
