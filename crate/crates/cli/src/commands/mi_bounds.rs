//! Lower bound on raw latents, upper bound after a privatizer, and the
//! cross-entropy plug-in of a classifier fitted on raw latents.

use clap::Args;
use latentpriv::mi::{mi_bound_report, mi_cross_entropy_plugin, MarginalKind};
use latentpriv::privatizer::{fit_classifier, Checkpoint, FitConfig};
use latentpriv::{FilterParameters, Matrix, RngState};
use serde::{Deserialize, Serialize};

use super::experiment::{load_scenario, ScenarioArgs, DEFAULT_SCENARIO, STREAM_EVAL, STREAM_MI};
use super::{require, single_table, CommandOutput, Context};
use crate::config::resolve;
use crate::error::{CliError, CliResult};
use crate::row;
use crate::table::Table;

pub const NAME: &str = "mi-bounds";
pub const FILE: &str = "mi_bounds.csv";
pub const COLUMNS: &[&str] = &[
    "scenario",
    "samples",
    "filter",
    "marginal",
    "lower_bound_raw",
    "lower_bound_std_error",
    "upper_bound_priv",
    "upper_bound_std_error",
    "entropy_z",
    "entropy_z_std_error",
    "entropy_y",
    "entropy_method",
    "plugin_raw",
    "upper_below_lower",
    "upper_bound_note",
];

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct MiBoundsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scenario: ScenarioArgs,
    /// Isotropic noise scale: A_ε = noise·I, no label shift.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Marginal of the privatized latents: fitted or prior.
    #[arg(long)]
    pub marginal: Option<String>,
    /// Take the filter from a training checkpoint instead of --noise.
    #[arg(long)]
    pub checkpoint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiBoundsConfig {
    pub scenario: String,
    pub samples: Option<usize>,
    pub noise: f64,
    pub marginal: String,
    pub checkpoint: Option<String>,
}

impl Default for MiBoundsConfig {
    fn default() -> Self {
        Self {
            scenario: DEFAULT_SCENARIO.into(),
            samples: None,
            noise: 5.0,
            marginal: "fitted".into(),
            checkpoint: None,
        }
    }
}

fn parse_marginal(name: &str) -> CliResult<MarginalKind> {
    match name.to_ascii_lowercase().as_str() {
        "fitted" => Ok(MarginalKind::Fitted),
        "prior" | "standard" => Ok(MarginalKind::StandardPrior),
        other => Err(CliError::validation(format!(
            "marginal must be fitted or prior, got {other:?}"
        ))),
    }
}

fn load_filter(
    cfg: &MiBoundsConfig,
    dim: usize,
    classes: usize,
) -> CliResult<(FilterParameters, String)> {
    match &cfg.checkpoint {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            let ck = Checkpoint::from_json(&text)?;
            Ok((ck.filter, "checkpoint".into()))
        }
        None => {
            require(cfg.noise > 0.0 && cfg.noise.is_finite(), || {
                format!("noise must be positive, got {}", cfg.noise)
            })?;
            let noise = Matrix::from_fn(dim, dim, |i, j| if i == j { cfg.noise } else { 0.0 });
            let filter = FilterParameters::from_blocks(&noise, &Matrix::zeros(dim, classes))?;
            Ok((filter, format!("noise={}", cfg.noise)))
        }
    }
}

pub fn compute(cfg: &MiBoundsConfig, seed: u64) -> CliResult<Table> {
    let marginal = parse_marginal(&cfg.marginal)?;
    let spec = load_scenario(&cfg.scenario, cfg.samples, seed)?;
    let data = spec.generate()?;
    let (filter, filter_label) = load_filter(cfg, data.dim(), data.private_classes())?;
    let root = RngState::new(seed);
    let report = mi_bound_report(&data, &filter, marginal, &mut root.derive(STREAM_MI))?;
    let classifier = fit_classifier(
        data.points(),
        data.private_labels(),
        data.private_classes(),
        &FitConfig::default(),
        &mut root.derive(STREAM_EVAL),
    )?;
    let plugin = mi_cross_entropy_plugin(&data, &classifier)?;
    let mut table = Table::new(COLUMNS);
    table.push(row![
        spec.name,
        report.n_samples,
        filter_label,
        report.marginal.tag(),
        report.lower_bound_raw,
        report.lower_bound_std_error,
        report.upper_bound_priv,
        report.upper_bound_std_error,
        report.entropy_z,
        report.entropy_z_std_error,
        report.entropy_y,
        report.entropy_method.tag(),
        plugin,
        report.upper_bound_priv < report.lower_bound_raw,
        report.upper_bound_note
    ]);
    Ok(table)
}

pub fn run(args: &MiBoundsArgs, ctx: &Context) -> CliResult<CommandOutput> {
    let cfg: MiBoundsConfig = resolve(NAME, &ctx.file, args)?;
    let table = compute(&cfg, ctx.seed)?;
    let r = &table.rows()[0];
    let summary = format!("lower={} upper={} upper<lower={}", r[4], r[6], r[13]);
    single_table(NAME, FILE, ctx.seed, &cfg, &table, summary)
}
