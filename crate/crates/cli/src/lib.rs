//! `epifit`: fit, profile, simulate and compare endemic-epidemic models for
//! age- and region-stratified infectious disease counts, and prepare social
//! contact matrices from survey data.

pub mod commands;
pub mod config;
pub mod errors;
pub mod io;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use errors::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "epifit",
    about = "Endemic-epidemic models for stratified infectious disease counts",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the configured model and write the result JSON plus the fitted
    /// mean decomposition.
    Fit(RunArgs),
    /// Profile the contact-matrix power and write the profile JSON and trace.
    Profile(RunArgs),
    /// Simulate forward from a fit (or fit first), writing trajectory CSVs.
    Simulate(RunArgs),
    /// Fit several model variants and write the AIC comparison table.
    Compare(RunArgs),
    /// Estimate, aggregate, normalize or power-transform a contact matrix.
    Contacts(ContactsArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// RNG seed for simulation commands.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-group multipliers for reported counts, either positional in
    /// sorted group order ("1.5,2.5,2") or labelled ("00-04=1.5,65+=2").
    #[arg(long)]
    pub scale_factors: Option<String>,
    /// Search range for the contact power, "lo,hi".
    #[arg(long)]
    pub kappa_range: Option<String>,
}

#[derive(Debug, Args)]
pub struct ContactsArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Power-transform the matrix with this exponent.
    #[arg(long)]
    pub kappa: Option<f64>,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit(args) => commands::fit(&args),
        Command::Profile(args) => commands::profile(&args),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Compare(args) => commands::compare(&args),
        Command::Contacts(args) => commands::contacts(&args),
    }
}
