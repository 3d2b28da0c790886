//! `catbench`: figure data, virtual experiments and self-tests for conditionally prepared cat-like states.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "catbench", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct Common {
    /// JSON configuration merged over the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration value by dotted path, e.g. `detection.k=4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// RNG seed, replaces `experiment.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Conditional state: Fock amplitudes, quadrature densities, Wigner and Husimi grids.
    State(Common),
    /// Click priors, posteriors and entropies of both detection schemes.
    Detect(Common),
    /// Simulated homodyne histogram of the conditional mixture.
    Simulate(Common),
    /// Virtual experiment with reconstruction of the pure component.
    Reconstruct(Common),
    /// Oracle-equivalence and matrix-identity checks.
    Selftest,
}

type Build = fn(&RunConfig) -> Result<output::OutputSet, CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, build): (Common, Build) = match cli.command {
        Command::State(c) => (c, commands::state),
        Command::Detect(c) => (c, commands::detect),
        Command::Simulate(c) => (c, commands::simulate),
        Command::Reconstruct(c) => (c, commands::reconstruct),
        Command::Selftest => {
            let checks = commands::selftest()?;
            for c in &checks {
                println!(
                    "{} {}: {:.3e} (tolerance {:.0e})",
                    if c.passed() { "PASS" } else { "FAIL" },
                    c.name,
                    c.worst,
                    c.tol
                );
            }
            return match checks.iter().find(|c| !c.passed()) {
                Some(c) => Err(CliError::SelfTest(c.name.to_string())),
                None => Ok(()),
            };
        }
    };
    let cfg = RunConfig::load(common.config.as_deref(), &common.set, common.seed)?;
    let files = build(&cfg)?;
    files.write(&common.out)?;
    log::info!("wrote {} to {}", files.names().join(", "), common.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("catbench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
