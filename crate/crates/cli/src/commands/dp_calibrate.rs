//! Gaussian-mechanism noise calibration.

use clap::Args;
use latentpriv::dp::{
    calibrate_approx_dp, calibrate_projection, calibrate_renyi_dp, privacy_loss_tail,
    MechanismCalibration, MechanismKind, PrivacyBudget, ProjectionMechanism,
};
use latentpriv::RngState;
use serde::{Deserialize, Serialize};

use super::{require, single_table, CommandOutput, Context};
use crate::config::resolve;
use crate::error::CliResult;
use crate::row;
use crate::table::Table;

pub const NAME: &str = "dp-calibrate";
pub const FILE: &str = "dp_calibrate.csv";
pub const COLUMNS: &[&str] = &[
    "mechanism",
    "sensitivity",
    "epsilon",
    "delta",
    "alpha",
    "delta_renyi",
    "sigma",
    "variance",
    "literal_variance",
    "tail_fraction",
    "tail_std_error",
];

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct DpCalibrateArgs {
    /// ℓ₂-sensitivity of the released query.
    #[arg(long = "L")]
    #[serde(rename = "sensitivity")]
    pub sensitivity: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Projection radius τ; with --n adds the projected-mean route.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Rényi order; with --tau and --n adds the Rényi-DP row.
    #[arg(long)]
    pub renyi_alpha: Option<f64>,
    #[arg(long)]
    pub delta_renyi: Option<f64>,
    /// Draws for the empirical privacy-loss tail at the worst-case shift.
    #[arg(long)]
    pub tail_samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpCalibrateConfig {
    pub sensitivity: f64,
    pub eps: f64,
    pub delta: f64,
    pub tau: Option<f64>,
    pub n: Option<usize>,
    pub renyi_alpha: Option<f64>,
    pub delta_renyi: f64,
    pub tail_samples: usize,
}

impl Default for DpCalibrateConfig {
    fn default() -> Self {
        Self {
            sensitivity: 1.0,
            eps: 0.5,
            delta: 0.05,
            tau: None,
            n: None,
            renyi_alpha: None,
            delta_renyi: 0.1,
            tail_samples: 200_000,
        }
    }
}

fn push(
    table: &mut Table,
    name: &str,
    cal: &MechanismCalibration,
    tail: Option<latentpriv::MeanEstimate>,
) {
    let (eps, delta, alpha, dr) = match cal.kind {
        MechanismKind::ApproxDp { epsilon, delta } => (Some(epsilon), Some(delta), None, None),
        MechanismKind::RenyiDp { alpha, delta_renyi } => {
            (None, None, Some(alpha), Some(delta_renyi))
        }
    };
    table.push(row![
        name,
        cal.sensitivity,
        eps,
        delta,
        alpha,
        dr,
        cal.sigma,
        cal.variance(),
        cal.literal_variance,
        tail.map(|t| t.mean),
        tail.map(|t| t.std_error)
    ]);
}

pub fn compute(cfg: &DpCalibrateConfig, seed: u64) -> CliResult<Table> {
    require(cfg.sensitivity > 0.0 && cfg.sensitivity.is_finite(), || {
        "sensitivity must be positive".into()
    })?;
    require(cfg.tail_samples >= 1, || {
        "tail_samples must be at least 1".into()
    })?;
    let budget = PrivacyBudget::new(cfg.eps, cfg.delta)?;
    let mut rng = RngState::new(seed);
    let mut table = Table::new(COLUMNS);

    let tail = |cal: &MechanismCalibration, rng: &mut RngState| {
        privacy_loss_tail(
            cal.sigma,
            &[0.0],
            &[cal.sensitivity],
            cfg.eps,
            rng,
            cfg.tail_samples,
        )
    };
    let direct = calibrate_approx_dp(cfg.sensitivity, budget)?;
    let t = tail(&direct, &mut rng)?;
    push(&mut table, "gaussian", &direct, Some(t));

    let mech = match (cfg.tau, cfg.n) {
        (Some(tau), Some(n)) => Some(ProjectionMechanism::new(tau, n, 1)?),
        (None, None) => None,
        _ => {
            return Err(crate::error::CliError::validation(
                "--tau and --n must be given together",
            ))
        }
    };
    if let Some(mech) = &mech {
        let proj = calibrate_projection(mech, budget)?;
        let t = tail(&proj, &mut rng)?;
        push(&mut table, "projection", &proj, Some(t));
    }
    if let Some(alpha) = cfg.renyi_alpha {
        let mech = mech.ok_or_else(|| {
            crate::error::CliError::validation("--renyi-alpha needs --tau and --n")
        })?;
        let renyi = calibrate_renyi_dp(&mech, alpha, cfg.delta_renyi)?;
        push(&mut table, "renyi", &renyi, None);
    }
    Ok(table)
}

pub fn run(args: &DpCalibrateArgs, ctx: &Context) -> CliResult<CommandOutput> {
    let cfg: DpCalibrateConfig = resolve(NAME, &ctx.file, args)?;
    let table = compute(&cfg, ctx.seed)?;
    let summary = format!("sigma={}", table.rows()[0][6]);
    single_table(NAME, FILE, ctx.seed, &cfg, &table, summary)
}
