//! Scenario loading, seed streams and training flags shared by the
//! subcommands that work on synthetic latents.

use std::path::Path;

use clap::Args;
use latentpriv::rng::derive_seed;
use latentpriv::{LatentDataset, RngState, ScenarioSpec};
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Sub-seed streams derived from the global seed.
pub const STREAM_SCENARIO: u64 = 0;
pub const STREAM_SPLIT: u64 = 1;
pub const STREAM_TRAIN: u64 = 2;
pub const STREAM_EVAL: u64 = 3;
pub const STREAM_MI: u64 = 4;
/// Budget-sweep row `i` uses streams `STREAM_ROW + i`.
pub const STREAM_ROW: u64 = 100;

pub const DEFAULT_SCENARIO: &str = "S1";
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.75;

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct ScenarioArgs {
    /// Built-in scenario name (S1) or path to a scenario JSON file.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Override the scenario's sample count.
    #[arg(long)]
    pub samples: Option<usize>,
}

/// Training flags, serialized under the `TrainConfig` field names.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct TrainFlags {
    #[arg(long)]
    pub beta: Option<f64>,
    /// Distortion budget b in nats.
    #[arg(long = "budget")]
    #[serde(rename = "budget_b")]
    pub budget: Option<f64>,
    /// Weight of the squared hinge penalty.
    #[arg(long = "kappa")]
    #[serde(rename = "penalty_kappa")]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub lr_filter: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
}

/// Resolves a built-in name first, then a JSON file path. The scenario's
/// own seed is replaced by one derived from the global seed.
pub fn load_scenario(name: &str, samples: Option<usize>, seed: u64) -> CliResult<ScenarioSpec> {
    let scenario_seed = derive_seed(seed, STREAM_SCENARIO);
    let mut spec = match ScenarioSpec::builtin(name, scenario_seed) {
        Ok(spec) => spec,
        Err(_) if Path::new(name).is_file() => {
            let text = std::fs::read_to_string(name).map_err(|source| CliError::Io {
                path: name.to_string(),
                source,
            })?;
            let mut spec: ScenarioSpec = serde_json::from_str(&text)
                .map_err(|e| CliError::validation(format!("scenario file {name}: {e}")))?;
            spec.seed = scenario_seed;
            spec
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(n) = samples {
        spec = spec.with_samples(n);
    }
    spec.validate()?;
    Ok(spec)
}

/// Generates the scenario and splits it into train and test parts.
pub fn scenario_split(
    spec: &ScenarioSpec,
    fraction: f64,
    seed: u64,
) -> CliResult<(LatentDataset, LatentDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CliError::validation(format!(
            "train_fraction must be in (0, 1), got {fraction}"
        )));
    }
    let data = spec.generate()?;
    Ok(data.split(fraction, &mut RngState::new(seed).derive(STREAM_SPLIT))?)
}
