//! One module per subcommand. Each resolves its config, computes a table
//! and returns the files to write; `main` does the writing.

pub mod attack;
pub mod budget_sweep;
pub mod divergence;
pub mod dp_calibrate;
pub mod dual_check;
pub mod experiment;
pub mod mi_bounds;
pub mod train;

use serde::Serialize;

use crate::config::{config_hash, ConfigFile};
use crate::error::{CliError, CliResult};
use crate::output::Outputs;
use crate::table::{Provenance, Table};

/// Global settings shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Context {
    pub seed: u64,
    pub file: ConfigFile,
}

#[derive(Debug, Default)]
pub struct CommandOutput {
    pub outputs: Outputs,
    /// Short human-readable result printed to stdout.
    pub summary: String,
}

pub(crate) fn provenance<T: Serialize>(command: &str, seed: u64, config: &T) -> Provenance {
    Provenance {
        command: command.to_string(),
        seed,
        config_hash: config_hash(command, seed, config),
    }
}

pub(crate) fn single_table<T: Serialize>(
    command: &str,
    file_name: &str,
    seed: u64,
    config: &T,
    table: &Table,
    summary: String,
) -> CliResult<CommandOutput> {
    let mut outputs = Outputs::default();
    outputs.add(file_name, table.render(&provenance(command, seed, config))?);
    Ok(CommandOutput { outputs, summary })
}

pub(crate) fn require(cond: bool, msg: impl FnOnce() -> String) -> CliResult<()> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Validation(msg()))
    }
}
