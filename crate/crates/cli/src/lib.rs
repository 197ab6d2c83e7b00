//! Command-line harness: synthetic scenarios, experiment orchestration and
//! CSV output for every module of `latentpriv`.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod table;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use commands::{
    attack::AttackArgs, budget_sweep::BudgetSweepArgs, divergence::DivergenceArgs,
    dp_calibrate::DpCalibrateArgs, dual_check::DualCheckArgs, mi_bounds::MiBoundsArgs,
    train::TrainArgs, CommandOutput, Context,
};
use config::{ConfigFile, DEFAULT_SEED};
use error::CliResult;

#[derive(Debug, Parser)]
#[command(
    name = "latentpriv",
    version,
    about = "Privacy filters for latent representations"
)]
pub struct Cli {
    /// Root seed for every random stream [default: 42].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// JSON config file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form divergences against Monte-Carlo estimates.
    Divergence(DivergenceArgs),
    /// Duality gap on random discrete loss problems.
    DualCheck(DualCheckArgs),
    /// Gaussian-mechanism noise calibration.
    DpCalibrate(DpCalibrateArgs),
    /// Mutual-information bounds on a scenario.
    MiBounds(MiBoundsArgs),
    /// Train one privatizer.
    Train(TrainArgs),
    /// Train across distortion budgets with a Gaussian-noise baseline.
    BudgetSweep(BudgetSweepArgs),
    /// FGSM and PGM against a classifier on raw latents.
    Attack(AttackArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Divergence(_) => commands::divergence::NAME,
            Command::DualCheck(_) => commands::dual_check::NAME,
            Command::DpCalibrate(_) => commands::dp_calibrate::NAME,
            Command::MiBounds(_) => commands::mi_bounds::NAME,
            Command::Train(_) => commands::train::NAME,
            Command::BudgetSweep(_) => commands::budget_sweep::NAME,
            Command::Attack(_) => commands::attack::NAME,
        }
    }
}

/// Builds the context from `--config` and `--seed`; the flag wins over the file.
pub fn context(cli: &Cli) -> CliResult<Context> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let seed = match cli.seed {
        Some(s) => s,
        None => file.seed()?.unwrap_or(DEFAULT_SEED),
    };
    Ok(Context { seed, file })
}

pub fn execute(command: &Command, ctx: &Context) -> CliResult<CommandOutput> {
    match command {
        Command::Divergence(a) => commands::divergence::run(a, ctx),
        Command::DualCheck(a) => commands::dual_check::run(a, ctx),
        Command::DpCalibrate(a) => commands::dp_calibrate::run(a, ctx),
        Command::MiBounds(a) => commands::mi_bounds::run(a, ctx),
        Command::Train(a) => commands::train::run(a, ctx),
        Command::BudgetSweep(a) => commands::budget_sweep::run(a, ctx),
        Command::Attack(a) => commands::attack::run(a, ctx),
    }
}

/// Runs a parsed command line and writes its files under `--out`.
pub fn run(cli: &Cli) -> CliResult<(Vec<PathBuf>, String)> {
    let ctx = context(cli)?;
    let out = execute(&cli.command, &ctx)?;
    let written = out.outputs.write_all(Path::new(&cli.out))?;
    Ok((written, out.summary))
}
