//! Trains one privatizer per distortion budget and compares each against
//! isotropic Gaussian noise of the same distortion.

use clap::Args;
use latentpriv::dp::noise_variance_for_kl;
use latentpriv::mi::{
    mi_lower_bound, mi_upper_bound_privatized, privatized_marginal, ClassConditionalModel,
    MarginalKind,
};
use latentpriv::privatizer::{evaluate_privatizer, train_privatizer, Evaluation, FitConfig};
use latentpriv::rng::derive_seed;
use latentpriv::{
    DiagonalGaussian, FilterParameters, LatentDataset, Matrix, RngState, TrainConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::experiment::{
    load_scenario, scenario_split, ScenarioArgs, TrainFlags, DEFAULT_SCENARIO,
    DEFAULT_TRAIN_FRACTION, STREAM_EVAL, STREAM_ROW,
};
use super::{require, single_table, CommandOutput, Context};
use crate::config::resolve;
use crate::error::{CliError, CliResult};
use crate::row;
use crate::table::Table;

pub const NAME: &str = "budget-sweep";
pub const FILE: &str = "budget_sweep.csv";
pub const COLUMNS: &[&str] = &[
    "budget",
    "status",
    "distortion",
    "adversary_accuracy",
    "utility_accuracy",
    "raw_adversary_accuracy",
    "raw_utility_accuracy",
    "mi_lower_raw",
    "mi_upper_priv",
    "mi_plugin",
    "baseline_noise_variance",
    "baseline_distortion",
    "baseline_adversary_accuracy",
    "baseline_utility_accuracy",
    "message",
];
pub const DEFAULT_BUDGETS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 4.0];

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct BudgetSweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scenario: ScenarioArgs,
    /// Comma-separated distortion budgets.
    #[arg(long, value_delimiter = ',')]
    pub budgets: Option<Vec<f64>>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[command(flatten)]
    pub train: TrainFlags,
}

/// Sweep settings. `train.budget_b` and `train.seed` are set per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub samples: Option<usize>,
    pub train_fraction: f64,
    pub budgets: Vec<f64>,
    pub train: TrainConfig,
    pub fit: FitConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: DEFAULT_SCENARIO.into(),
            samples: None,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            budgets: DEFAULT_BUDGETS.to_vec(),
            train: TrainConfig::default(),
            fit: FitConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> CliResult<()> {
        require(!self.budgets.is_empty(), || {
            "budgets must not be empty".into()
        })?;
        require(
            self.budgets.iter().all(|b| *b > 0.0 && b.is_finite()),
            || format!("budgets must be positive, got {:?}", self.budgets),
        )?;
        Ok(())
    }
}

/// Quantities that do not depend on the budget.
struct Shared {
    train: LatentDataset,
    test: LatentDataset,
    raw: Evaluation,
    mi_lower_raw: f64,
}

#[derive(Debug, Clone, Default)]
struct Row {
    distortion: Option<f64>,
    filter: Option<Evaluation>,
    mi_upper: Option<f64>,
    baseline_variance: Option<f64>,
    baseline_distortion: Option<f64>,
    baseline: Option<Evaluation>,
}

fn isotropic_noise_filter(
    dim: usize,
    classes: usize,
    variance: f64,
) -> latentpriv::Result<FilterParameters> {
    let s = variance.sqrt();
    let noise = Matrix::from_fn(dim, dim, |i, j| if i == j { s } else { 0.0 });
    FilterParameters::from_blocks(&noise, &Matrix::zeros(dim, classes))
}

fn run_row(
    cfg: &ExperimentConfig,
    shared: &Shared,
    budget: f64,
    seed: u64,
    index: usize,
) -> CliResult<Row> {
    let stream = STREAM_ROW + index as u64;
    let train_cfg = TrainConfig {
        budget_b: budget,
        seed: derive_seed(seed, stream),
        ..cfg.train.clone()
    };
    let trained = train_privatizer(&shared.train, &train_cfg)?;
    let distortion = trained.trace.last().expect("rounds >= 1").distortion;
    let mut rng = RngState::new(seed).derive(stream);
    let filter = evaluate_privatizer(
        &trained.filter,
        &shared.train,
        &shared.test,
        &cfg.fit,
        &mut rng,
    )?;

    // a filter without noise has no finite upper bound; leave the cell empty
    let mi_upper = privatized_marginal(
        &shared.test,
        &trained.filter,
        MarginalKind::Fitted,
        &mut rng,
    )
    .and_then(|m| mi_upper_bound_privatized(&shared.test, &trained.filter, &m))
    .ok()
    .map(|e| e.mean);

    let base = DiagonalGaussian::new(
        vec![0.0; trained.base_variance.len()],
        trained.base_variance.clone(),
    )?;
    let variance = noise_variance_for_kl(&base, distortion)?;
    let baseline_distortion = latentpriv::dp::kl_of_additive_gaussian(&base, variance)?.exact;
    let noise =
        isotropic_noise_filter(shared.train.dim(), shared.train.private_classes(), variance)?;
    let baseline = evaluate_privatizer(&noise, &shared.train, &shared.test, &cfg.fit, &mut rng)?;
    Ok(Row {
        distortion: Some(distortion),
        filter: Some(filter),
        mi_upper,
        baseline_variance: Some(variance),
        baseline_distortion: Some(baseline_distortion),
        baseline: Some(baseline),
    })
}

fn status(result: &CliResult<Row>) -> (&'static str, String) {
    match result {
        Ok(_) => ("ok", String::new()),
        Err(e @ CliError::Numerical(_)) => ("numerical_error", e.to_string()),
        Err(e) => ("error", e.to_string()),
    }
}

pub fn compute(cfg: &ExperimentConfig, seed: u64) -> CliResult<Table> {
    cfg.validate()?;
    cfg.train.validate()?;
    let spec = load_scenario(&cfg.scenario, cfg.samples, seed)?;
    let (train, test) = scenario_split(&spec, cfg.train_fraction, seed)?;
    let identity = FilterParameters::zeros(train.dim(), train.private_classes())?;
    let raw = evaluate_privatizer(
        &identity,
        &train,
        &test,
        &cfg.fit,
        &mut RngState::new(seed).derive(STREAM_EVAL),
    )?;
    let model = ClassConditionalModel::fit(&test)?;
    let mi_lower_raw = mi_lower_bound(&test, &model, None)?.value;
    let shared = Shared {
        train,
        test,
        raw,
        mi_lower_raw,
    };

    // rows are independent; collect keeps them in budget order
    let results: Vec<CliResult<Row>> = cfg
        .budgets
        .par_iter()
        .enumerate()
        .map(|(i, &b)| run_row(cfg, &shared, b, seed, i))
        .collect();

    let mut table = Table::new(COLUMNS);
    for (&budget, result) in cfg.budgets.iter().zip(&results) {
        let (status, message) = status(result);
        let row = result.as_ref().ok().cloned().unwrap_or_default();
        table.push(row![
            budget,
            status,
            row.distortion,
            row.filter.map(|e| e.adversary_accuracy),
            row.filter.map(|e| e.utility_accuracy),
            shared.raw.adversary_accuracy,
            shared.raw.utility_accuracy,
            shared.mi_lower_raw,
            row.mi_upper,
            row.filter.map(|e| e.adversary_plugin_mi),
            row.baseline_variance,
            row.baseline_distortion,
            row.baseline.map(|e| e.adversary_accuracy),
            row.baseline.map(|e| e.utility_accuracy),
            message
        ]);
    }
    Ok(table)
}

pub fn run(args: &BudgetSweepArgs, ctx: &Context) -> CliResult<CommandOutput> {
    let cfg: ExperimentConfig = resolve(NAME, &ctx.file, args)?;
    let table = compute(&cfg, ctx.seed)?;
    let ok = table.rows().iter().filter(|r| r[1] == "ok").count();
    let summary = format!("{ok}/{} budgets trained", table.rows().len());
    single_table(NAME, FILE, ctx.seed, &cfg, &table, summary)
}
