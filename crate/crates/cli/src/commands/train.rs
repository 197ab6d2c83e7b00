//! Trains one privatizer and writes its trace and checkpoint.

use clap::Args;
use latentpriv::privatizer::{
    evaluate_privatizer, train_privatizer, Checkpoint, FitConfig, TrainedPrivatizer,
};
use latentpriv::rng::derive_seed;
use latentpriv::{LatentDataset, RngState, TrainConfig};
use serde::{Deserialize, Serialize};

use super::experiment::{
    load_scenario, scenario_split, ScenarioArgs, TrainFlags, DEFAULT_SCENARIO,
    DEFAULT_TRAIN_FRACTION, STREAM_EVAL, STREAM_TRAIN,
};
use super::{provenance, CommandOutput, Context};
use crate::config::resolve;
use crate::error::CliResult;
use crate::output::Outputs;
use crate::row;
use crate::table::Table;

pub const NAME: &str = "train";
pub const TRACE_FILE: &str = "train_trace.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const COLUMNS: &[&str] = &[
    "round",
    "adversary_ce",
    "utility_ce",
    "distortion",
    "adversary_accuracy",
    "utility_accuracy",
    "violation",
];

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[command(flatten)]
    pub train: TrainFlags,
}

/// `train.seed` is always replaced by a stream of the global seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainCommandConfig {
    pub scenario: String,
    pub samples: Option<usize>,
    pub train_fraction: f64,
    pub train: TrainConfig,
    pub fit: FitConfig,
}

impl Default for TrainCommandConfig {
    fn default() -> Self {
        Self {
            scenario: DEFAULT_SCENARIO.into(),
            samples: None,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            train: TrainConfig::default(),
            fit: FitConfig::default(),
        }
    }
}

pub struct TrainRun {
    pub trained: TrainedPrivatizer,
    pub train: LatentDataset,
    pub test: LatentDataset,
    pub config: TrainCommandConfig,
}

pub fn compute(mut cfg: TrainCommandConfig, seed: u64) -> CliResult<TrainRun> {
    cfg.train.seed = derive_seed(seed, STREAM_TRAIN);
    let spec = load_scenario(&cfg.scenario, cfg.samples, seed)?;
    let (train, test) = scenario_split(&spec, cfg.train_fraction, seed)?;
    let trained = train_privatizer(&train, &cfg.train)?;
    Ok(TrainRun {
        trained,
        train,
        test,
        config: cfg,
    })
}

pub fn trace_table(trained: &TrainedPrivatizer) -> Table {
    let mut table = Table::new(COLUMNS);
    for r in &trained.trace.records {
        table.push(row![
            r.round,
            r.adversary_ce,
            r.utility_ce,
            r.distortion,
            r.adversary_accuracy,
            r.utility_accuracy,
            r.violation
        ]);
    }
    table
}

pub fn run(args: &TrainArgs, ctx: &Context) -> CliResult<CommandOutput> {
    let cfg: TrainCommandConfig = resolve(NAME, &ctx.file, args)?;
    let run = compute(cfg, ctx.seed)?;
    let prov = provenance(NAME, ctx.seed, &run.config);
    let t = &run.trained;
    let checkpoint = Checkpoint::new(
        run.config.train.clone(),
        t.filter.clone(),
        t.adversary.clone(),
        t.utility.clone(),
    );

    let mut outputs = Outputs::default();
    outputs.add(TRACE_FILE, trace_table(t).render(&prov)?);
    outputs.add(CHECKPOINT_FILE, checkpoint.to_json()?.into_bytes());

    let ev = evaluate_privatizer(
        &t.filter,
        &run.train,
        &run.test,
        &run.config.fit,
        &mut RngState::new(ctx.seed).derive(STREAM_EVAL),
    )?;
    let last = t.trace.last().expect("rounds >= 1");
    let summary = format!(
        "distortion={:.4} held-out adversary_accuracy={:.4} utility_accuracy={:.4}",
        last.distortion, ev.adversary_accuracy, ev.utility_accuracy
    );
    Ok(CommandOutput { outputs, summary })
}
