//! Command-line front end: parses arguments, hands the config text to the
//! runner, and maps failures to exit codes — 2 for configuration problems,
//! 3 for runtime failures.

use clap::{Parser, Subcommand};
use gibbs_core::runner::{execute, Command};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "gibbs-anneal",
    version,
    about = "Grand-canonical sampling, annealing, and ground-state checks \
             for hard-core particle systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample the conditional Gibbs distribution at fixed (beta, lambda)
    Sample(RunArgs),
    /// Cool replicas over a temperature ladder, probing local minimality
    Anneal(RunArgs),
    /// Certify a snapshot against bounded-budget excitations
    Check(RunArgs),
    /// Digest a snapshot directory into density, separation, and covering stats
    Observables(RunArgs),
    /// Boundary-pumping threshold search and the nested construction
    Counterexample(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON run configuration
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Override the config's seed
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory for artifacts (created if missing)
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match &cli.command {
        Cmd::Sample(a) => (Command::Sample, a),
        Cmd::Anneal(a) => (Command::Anneal, a),
        Cmd::Check(a) => (Command::Check, a),
        Cmd::Observables(a) => (Command::Observables, a),
        Cmd::Counterexample(a) => (Command::Counterexample, a),
    };
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("gibbs-anneal: cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    match execute(cmd, &text, args.seed, &args.out) {
        Ok(stdout) => {
            if let Some(text) = stdout {
                print!("{text}");
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("gibbs-anneal: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
