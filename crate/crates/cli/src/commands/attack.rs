//! FGSM and PGM against a classifier fitted on raw scenario latents.

use clap::Args;
use latentpriv::attacks::{fgsm, pgm_iterates, AttackConfig, Norm};
use latentpriv::privatizer::{fit_classifier, FitConfig};
use latentpriv::{MlpClassifier, RngState};
use serde::{Deserialize, Serialize};

use super::experiment::{
    load_scenario, scenario_split, ScenarioArgs, DEFAULT_SCENARIO, DEFAULT_TRAIN_FRACTION,
    STREAM_EVAL,
};
use super::{require, single_table, CommandOutput, Context};
use crate::config::resolve;
use crate::error::CliResult;
use crate::row;
use crate::table::Table;

pub const NAME: &str = "attack";
pub const FILE: &str = "attack.csv";
pub const COLUMNS: &[&str] = &[
    "method",
    "norm",
    "epsilon",
    "steps",
    "step_size",
    "clean_accuracy",
    "attacked_accuracy",
    "accuracy_drop",
    "max_ball_violation",
];

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct AttackArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scenario: ScenarioArgs,
    /// Comma-separated ball radii.
    #[arg(long = "eps", value_delimiter = ',')]
    #[serde(rename = "epsilons")]
    pub epsilons: Option<Vec<f64>>,
    /// Comma-separated PGM norms (l2, linf).
    #[arg(long, value_delimiter = ',')]
    pub norms: Option<Vec<String>>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub step_size: Option<f64>,
    /// Which label the attacked classifier predicts: private or utility.
    #[arg(long)]
    pub target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackCommandConfig {
    pub scenario: String,
    pub samples: Option<usize>,
    pub train_fraction: f64,
    pub epsilons: Vec<f64>,
    pub norms: Vec<String>,
    pub steps: usize,
    pub step_size: f64,
    pub target: String,
    pub fit: FitConfig,
}

impl Default for AttackCommandConfig {
    fn default() -> Self {
        Self {
            scenario: DEFAULT_SCENARIO.into(),
            samples: None,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            epsilons: vec![0.5, 1.0],
            norms: vec!["l2".into(), "linf".into()],
            steps: 10,
            step_size: 0.3,
            target: "private".into(),
            fit: FitConfig::default(),
        }
    }
}

struct Outcome {
    accuracy: f64,
    violation: f64,
}

fn score(
    c: &MlpClassifier,
    points: &[Vec<f64>],
    labels: &[usize],
    norm: Norm,
    epsilon: f64,
    attack: impl Fn(&[f64], usize) -> latentpriv::Result<Vec<Vec<f64>>>,
) -> CliResult<Outcome> {
    let mut finals = Vec::with_capacity(points.len());
    let mut violation: f64 = 0.0;
    for (z, &y) in points.iter().zip(labels) {
        let iterates = attack(z, y)?;
        for it in &iterates {
            let diff: Vec<f64> = it.iter().zip(z).map(|(a, b)| a - b).collect();
            violation = violation.max(norm.of(&diff) - epsilon);
        }
        finals.push(iterates.last().cloned().unwrap_or_else(|| z.clone()));
    }
    Ok(Outcome {
        accuracy: c.accuracy(&finals, labels)?,
        violation: violation.max(0.0),
    })
}

pub fn compute(cfg: &AttackCommandConfig, seed: u64) -> CliResult<Table> {
    require(!cfg.epsilons.is_empty(), || {
        "epsilons must not be empty".into()
    })?;
    let norms = cfg
        .norms
        .iter()
        .map(|n| n.parse::<Norm>())
        .collect::<latentpriv::Result<Vec<_>>>()?;
    let spec = load_scenario(&cfg.scenario, cfg.samples, seed)?;
    let (train, test) = scenario_split(&spec, cfg.train_fraction, seed)?;
    let (train_labels, test_labels, classes) = match cfg.target.as_str() {
        "private" => (
            train.private_labels(),
            test.private_labels(),
            train.private_classes(),
        ),
        "utility" => (
            train.utility_labels(),
            test.utility_labels(),
            train.utility_classes(),
        ),
        other => {
            return Err(crate::error::CliError::validation(format!(
                "target must be private or utility, got {other:?}"
            )))
        }
    };
    let c = fit_classifier(
        train.points(),
        train_labels,
        classes,
        &cfg.fit,
        &mut RngState::new(seed).derive(STREAM_EVAL),
    )?;
    let clean = c.accuracy(test.points(), test_labels)?;

    let mut table = Table::new(COLUMNS);
    for &epsilon in &cfg.epsilons {
        let out = score(
            &c,
            test.points(),
            test_labels,
            Norm::Linf,
            epsilon,
            |z, y| Ok(vec![fgsm(&c, z, y, epsilon)?]),
        )?;
        table.push(row![
            "fgsm",
            "linf",
            epsilon,
            1usize,
            None::<f64>,
            clean,
            out.accuracy,
            clean - out.accuracy,
            out.violation
        ]);

        for &norm in &norms {
            let ac = AttackConfig {
                epsilon,
                norm,
                steps: cfg.steps,
                step_size: cfg.step_size,
            };
            ac.validate()?;
            let out = score(&c, test.points(), test_labels, norm, epsilon, |z, y| {
                pgm_iterates(&c, z, y, &ac)
            })?;
            table.push(row![
                "pgm",
                norm.name(),
                epsilon,
                cfg.steps,
                cfg.step_size,
                clean,
                out.accuracy,
                clean - out.accuracy,
                out.violation
            ]);
        }
    }
    Ok(table)
}

pub fn run(args: &AttackArgs, ctx: &Context) -> CliResult<CommandOutput> {
    let cfg: AttackCommandConfig = resolve(NAME, &ctx.file, args)?;
    let table = compute(&cfg, ctx.seed)?;
    let worst = table
        .rows()
        .iter()
        .map(|r| r[7].parse::<f64>().unwrap_or(f64::NAN))
        .fold(f64::NEG_INFINITY, f64::max);
    single_table(
        NAME,
        FILE,
        ctx.seed,
        &cfg,
        &table,
        format!("largest accuracy drop {worst:.4}"),
    )
}
