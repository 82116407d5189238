//! `subphi`: plan, simulate and verify certified approximations of sub-φ processes.
//!
//! Exit status: 0 success, 1 verification failed, 2 target unachievable,
//! 3 configuration, validation or staleness error.

mod commands;
mod config;
mod inputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Outcome, Run};
use subphi::plan::EvalMode;

#[derive(Parser)]
#[command(name = "subphi", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check φ, the source, the route and the kernel or series bundle.
    Validate(Common),
    /// Choose the truncation level and write plan.json and the eigendata.
    Plan(Common),
    /// Solve the eigenproblem and write the eigendata only.
    Eigen(Common),
    /// Draw model paths into paths.csv.
    Simulate(Common),
    /// Monte Carlo check of the planned guarantee; writes verify.json.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Test this threshold instead of the planned one.
        #[arg(long)]
        delta: Option<f64>,
        /// Also write the per-path norms to norms.csv.
        #[arg(long)]
        norms: bool,
    },
    /// Summarize plan.json and verify.json.
    Report(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides numerics.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Overrides numerics.mode.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<EvalMode>,
    /// Plan file to use instead of <out>/plan.json.
    #[arg(long)]
    plan: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<EvalMode, String> {
    match s {
        "consistent" => Ok(EvalMode::Consistent),
        "paper-literal" => Ok(EvalMode::PaperLiteral),
        other => Err(format!("unknown mode {other:?}; expected consistent or paper-literal")),
    }
}

fn prepare(c: Common) -> anyhow::Result<Run> {
    let mut loaded = config::load(&c.config)?;
    if let Some(m) = c.mode {
        loaded.config.numerics.mode = m;
    }
    let seed = c.seed.unwrap_or(loaded.config.numerics.seed);
    Ok(Run { loaded, out: c.out, seed, paths: c.paths, plan_path: c.plan })
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Validate(c) => commands::validate(&prepare(c)?),
        Command::Plan(c) => commands::plan(&prepare(c)?),
        Command::Eigen(c) => commands::eigen(&prepare(c)?),
        Command::Simulate(c) => commands::simulate(&prepare(c)?),
        Command::Verify { common, delta, norms } => commands::verify(&prepare(common)?, delta, norms),
        Command::Report(c) => commands::report(&prepare(c)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(1),
        Ok(Outcome::Infeasible) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
