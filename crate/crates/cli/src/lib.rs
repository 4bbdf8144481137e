//! Command-line front end for `siggame-core`.
//!
//! Every subcommand reads one TOML [`config::RunConfig`], prints a
//! `name = value` report and, when an output path is configured, writes a CSV.
//! Exit codes: 0 success, 2 usage or config error, 3 solver non-convergence,
//! 4 verification failure.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;

use clap::{Parser, Subcommand};

use commands::{CommandError, Outcome};
use config::RunConfig;
use output::OUT_DIR_VAR;

#[derive(Debug, Parser)]
#[command(name = "siggame", version, about = "Equilibria of quadratic cheap-talk and Gaussian signaling games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(short, long)]
    config: String,
    /// Override one config key, e.g. `--set game.lambda=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// CSV output path (overrides `output.csv`).
    #[arg(short, long)]
    out: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Quantized equilibrium of scalar cheap talk.
    CheaptalkSolve(RunArgs),
    /// Certify a given quantizer as an equilibrium.
    CheaptalkVerify(RunArgs),
    /// Fully revealing leader-follower cheap talk, checked by simulation.
    CheaptalkStackelberg(RunArgs),
    /// Informativeness regime of the scalar two-stage Nash game.
    NashClassify2(RunArgs),
    /// Affine best-response dynamics.
    NashIterate(RunArgs),
    /// Scalar Stackelberg power allocation.
    StackelbergPower(RunArgs),
    /// Informativeness thresholds of the scalar Stackelberg game.
    StackelbergThresholds(RunArgs),
    /// Matrix dynamic program for vector sources.
    StackelbergDp(RunArgs),
    /// Monte Carlo cost estimate of a configured policy.
    Simulate(RunArgs),
    /// Invariant checks across every solver.
    Selftest {
        /// CSV output path.
        #[arg(short, long)]
        out: Option<String>,
    },
}

fn execute(
    args: &RunArgs,
    f: fn(&RunConfig) -> Result<Outcome, CommandError>,
) -> Result<(Outcome, Option<String>), CommandError> {
    let cfg = RunConfig::load(&args.config, &args.overrides)?;
    let csv = args.out.clone().or_else(|| cfg.output.csv.clone());
    Ok((f(&cfg)?, csv))
}

/// Run the CLI on `argv` (program name first) and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::CheaptalkSolve(a) => execute(a, commands::cheaptalk_solve),
        Command::CheaptalkVerify(a) => execute(a, commands::cheaptalk_verify),
        Command::CheaptalkStackelberg(a) => execute(a, commands::cheaptalk_stackelberg),
        Command::NashClassify2(a) => execute(a, commands::nash_classify2),
        Command::NashIterate(a) => execute(a, commands::nash_iterate),
        Command::StackelbergPower(a) => execute(a, commands::stackelberg_power),
        Command::StackelbergThresholds(a) => execute(a, commands::stackelberg_thresholds),
        Command::StackelbergDp(a) => execute(a, commands::stackelberg_dp),
        Command::Simulate(a) => execute(a, commands::simulate),
        Command::Selftest { out } => Ok((commands::selftest(), out.clone())),
    };
    let (outcome, csv) = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let mut stdout = std::io::stdout().lock();
    for line in &outcome.report {
        let _ = writeln!(stdout, "{line}");
    }
    if let (Some(path), Some(table)) = (csv, &outcome.table) {
        let dir = std::env::var(OUT_DIR_VAR).ok();
        let path = output::resolve(&path, dir.as_deref());
        if let Err(e) = table.write(&path) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return 2;
        }
        let _ = writeln!(stdout, "csv = {}", path.display());
    }
    match outcome.failure {
        Some(reason) => {
            eprintln!("verification failed: {reason}");
            4
        }
        None => 0,
    }
}
