//! Versioned JSON checkpoint of a trained privatizer.
//!
//! Layout (stable for `version = 1`):
//!
//! ```json
//! {
//!   "format": "latentpriv-checkpoint",
//!   "version": 1,
//!   "seed": 42,
//!   "config": { ...TrainConfig... },
//!   "filter":    { "a": { "rows": d, "cols": d+K, "data": [...] }, "latent_dim": d, "classes": K },
//!   "adversary": { "w1": {...}, "b1": [...], "w2": {...}, "b2": [...] },
//!   "utility":   { ... same as adversary ... }
//! }
//! ```
//!
//! Matrices are row-major. Floats are written with enough digits to round-trip.

use serde::{Deserialize, Serialize};

use super::filter::FilterParameters;
use super::mlp::MlpClassifier;
use super::train::TrainConfig;
use crate::error::{invalid, Error, Result};

pub const CHECKPOINT_FORMAT: &str = "latentpriv-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub config: TrainConfig,
    pub filter: FilterParameters,
    pub adversary: MlpClassifier,
    pub utility: MlpClassifier,
}

impl Checkpoint {
    pub fn new(
        config: TrainConfig,
        filter: FilterParameters,
        adversary: MlpClassifier,
        utility: MlpClassifier,
    ) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            seed: config.seed,
            config,
            filter,
            adversary,
            utility,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Domain(format!("checkpoint serialisation: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text)
            .map_err(|e| invalid("checkpoint", format!("unreadable checkpoint: {e}")))?;
        if c.format != CHECKPOINT_FORMAT {
            return Err(invalid(
                "checkpoint",
                format!("unknown format tag {:?}", c.format),
            ));
        }
        if c.version != CHECKPOINT_VERSION {
            return Err(invalid(
                "checkpoint",
                format!("unsupported version {}", c.version),
            ));
        }
        // re-run constructors so a hand-edited file cannot smuggle in bad shapes
        FilterParameters::new(
            c.filter.matrix().clone(),
            c.filter.latent_dim(),
            c.filter.classes(),
        )?;
        for clf in [&c.adversary, &c.utility] {
            MlpClassifier::from_parts(
                clf.w1().clone(),
                clf.b1().to_vec(),
                clf.w2().clone(),
                clf.b2().to_vec(),
            )?;
        }
        Ok(c)
    }
}
