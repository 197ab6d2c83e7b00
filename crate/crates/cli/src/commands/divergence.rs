//! Closed-form divergences against Monte-Carlo estimates on random pairs.

use clap::Args;
use latentpriv::divergences::{
    chi2_gaussian, f_divergence_mc, kl_gaussian, kl_same_covariance, renyi_gaussian_equal_cov,
    renyi_mc, DivergenceEstimate,
};
use latentpriv::{DiagonalGaussian, FGenerator, RngState};
use serde::{Deserialize, Serialize};

use super::{require, single_table, CommandOutput, Context};
use crate::config::resolve;
use crate::error::{CliError, CliResult};
use crate::row;
use crate::table::Table;

pub const NAME: &str = "divergence";
pub const FILE: &str = "divergence.csv";
pub const COLUMNS: &[&str] = &[
    "pair",
    "dim",
    "divergence",
    "closed_form",
    "mc_estimate",
    "mc_std_error",
    "z_score",
    "within_3se",
];

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct DivergenceArgs {
    /// Largest dimension; pair i has dimension 1 + i mod max_dim.
    #[arg(long)]
    pub max_dim: Option<usize>,
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Monte-Carlo draws per estimate.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub renyi_alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DivergenceConfig {
    pub max_dim: usize,
    pub pairs: usize,
    pub samples: usize,
    pub renyi_alpha: f64,
}

impl Default for DivergenceConfig {
    fn default() -> Self {
        Self {
            max_dim: 8,
            pairs: 20,
            samples: 200_000,
            renyi_alpha: 2.0,
        }
    }
}

/// Random pair with variance ratios in [0.8, 1.25] and mean offsets of at
/// most half a standard deviation, which keeps the χ² estimator's variance finite.
pub fn random_pair(
    dim: usize,
    rng: &mut RngState,
) -> latentpriv::Result<(DiagonalGaussian, DiagonalGaussian)> {
    let vq: Vec<f64> = (0..dim).map(|_| rng.uniform_range(0.5, 2.0)).collect();
    let vp: Vec<f64> = vq
        .iter()
        .map(|v| v * rng.uniform_range(0.8, 1.25))
        .collect();
    let mq: Vec<f64> = (0..dim).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let mp: Vec<f64> = mq
        .iter()
        .zip(&vq)
        .map(|(m, v)| m + v.sqrt() * rng.uniform_range(-0.5, 0.5))
        .collect();
    Ok((
        DiagonalGaussian::new(mp, vp)?,
        DiagonalGaussian::new(mq, vq)?,
    ))
}

fn push(
    table: &mut Table,
    pair: usize,
    dim: usize,
    name: &str,
    exact: f64,
    est: DivergenceEstimate,
) -> bool {
    let z = (est.value - exact) / est.std_error;
    let ok = est.within(exact, 3.0);
    table.push(row![
        pair,
        dim,
        name,
        exact,
        est.value,
        est.std_error,
        z,
        ok
    ]);
    ok
}

pub fn compute(cfg: &DivergenceConfig, seed: u64) -> CliResult<Table> {
    require(cfg.max_dim >= 1, || "max_dim must be at least 1".into())?;
    require(cfg.pairs >= 1, || "pairs must be at least 1".into())?;
    require(cfg.samples >= 100, || "samples must be at least 100".into())?;
    require(cfg.renyi_alpha > 0.0 && cfg.renyi_alpha != 1.0, || {
        "renyi_alpha must be positive and not 1".into()
    })?;
    let root = RngState::new(seed);
    let mut table = Table::new(COLUMNS);
    for pair in 0..cfg.pairs {
        let dim = 1 + pair % cfg.max_dim;
        let mut rng = root.derive(pair as u64);
        let (p, q) = random_pair(dim, &mut rng)?;
        let q_same = DiagonalGaussian::new(q.mean().to_vec(), p.variance().to_vec())?;
        let n = cfg.samples;

        push(
            &mut table,
            pair,
            dim,
            "kl",
            kl_gaussian(&p, &q)?,
            f_divergence_mc(FGenerator::Kl, &p, &q, &mut rng, n)?,
        );
        push(
            &mut table,
            pair,
            dim,
            "kl_same_cov",
            kl_same_covariance(&p, &q_same)?,
            f_divergence_mc(FGenerator::Kl, &p, &q_same, &mut rng, n)?,
        );
        let chi2 = chi2_gaussian(&p, &q)?
            .finite()
            .ok_or_else(|| CliError::Numerical(format!("pair {pair}: χ² is infinite")))?;
        push(
            &mut table,
            pair,
            dim,
            "chi2",
            chi2,
            f_divergence_mc(FGenerator::ChiSquare, &p, &q, &mut rng, n)?,
        );
        push(
            &mut table,
            pair,
            dim,
            "renyi",
            renyi_gaussian_equal_cov(&p, &q_same, cfg.renyi_alpha)?,
            renyi_mc(&p, &q_same, cfg.renyi_alpha, &mut rng, n)?,
        );
    }
    Ok(table)
}

pub fn run(args: &DivergenceArgs, ctx: &Context) -> CliResult<CommandOutput> {
    let cfg: DivergenceConfig = resolve(NAME, &ctx.file, args)?;
    let table = compute(&cfg, ctx.seed)?;
    let inside = table.rows().iter().filter(|r| r[7] == "true").count();
    let summary = format!(
        "{inside}/{} estimates within 3 SE of the closed form",
        table.rows().len()
    );
    single_table(NAME, FILE, ctx.seed, &cfg, &table, summary)
}
