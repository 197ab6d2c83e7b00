//! Layered configuration: built-in defaults, then the `--config` file, then flags.
//!
//! The config file is a JSON object. Its optional top-level `seed` sets the
//! global seed, and a key named after a subcommand (`"dual-check"`,
//! `"budget-sweep"`, ...) holds that subcommand's settings using the same
//! field names as the resolved config. Sections for other subcommands are
//! ignored.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    root: Map<String, Value>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        match serde_json::from_str::<Value>(text) {
            Ok(Value::Object(root)) => Ok(Self { root }),
            Ok(_) => Err(CliError::validation("config file must hold a JSON object")),
            Err(e) => Err(CliError::validation(format!(
                "config file is not valid JSON: {e}"
            ))),
        }
    }

    pub fn seed(&self) -> CliResult<Option<u64>> {
        match self.root.get("seed") {
            None => Ok(None),
            Some(v) => v.as_u64().map(Some).ok_or_else(|| {
                CliError::validation("config `seed` must be a non-negative integer")
            }),
        }
    }

    fn section(&self, command: &str) -> CliResult<Option<&Map<String, Value>>> {
        match self.root.get(command) {
            None => Ok(None),
            Some(Value::Object(m)) => Ok(Some(m)),
            Some(_) => Err(CliError::validation(format!(
                "config section `{command}` must be an object"
            ))),
        }
    }
}

/// Overlays the file section and then the flags onto `T::default()`.
///
/// `flags` must serialize only the options the user actually passed
/// (`skip_serializing_if = "Option::is_none"`).
pub fn resolve<T, F>(command: &str, file: &ConfigFile, flags: &F) -> CliResult<T>
where
    T: Default + Serialize + DeserializeOwned,
    F: Serialize,
{
    let mut merged = match serde_json::to_value(T::default()) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("configs serialize to objects"),
    };
    if let Some(section) = file.section(command)? {
        overlay(&mut merged, section);
    }
    if let Ok(Value::Object(f)) = serde_json::to_value(flags) {
        overlay(&mut merged, &f);
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::validation(format!("{command} config: {e}")))
}

fn overlay(base: &mut Map<String, Value>, top: &Map<String, Value>) {
    for (k, v) in top {
        if v.is_null() {
            continue;
        }
        match (base.get_mut(k), v) {
            (Some(Value::Object(b)), Value::Object(t)) => overlay(b, t),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

/// SHA-256 of the canonical JSON of `(command, seed, config)`, hex encoded.
pub fn config_hash<T: Serialize>(command: &str, seed: u64, config: &T) -> String {
    let canonical = serde_json::json!({ "command": command, "seed": seed, "config": config });
    let digest = Sha256::digest(canonical.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct Demo {
        alpha: f64,
        trials: usize,
        name: String,
    }

    #[derive(Serialize)]
    struct DemoFlags {
        #[serde(skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let file = ConfigFile::parse(
            r#"{"seed": 7, "demo": {"alpha": 1.5, "trials": 3}, "other": {"x": 1}}"#,
        )
        .unwrap();
        assert_eq!(file.seed().unwrap(), Some(7));
        let d: Demo = resolve("demo", &file, &DemoFlags { alpha: None }).unwrap();
        assert_eq!((d.alpha, d.trials), (1.5, 3));
        let d: Demo = resolve("demo", &file, &DemoFlags { alpha: Some(9.0) }).unwrap();
        assert_eq!((d.alpha, d.trials), (9.0, 3));
        let d: Demo = resolve("demo", &ConfigFile::default(), &DemoFlags { alpha: None }).unwrap();
        assert_eq!(d, Demo::default());
    }

    #[test]
    fn unknown_keys_and_bad_files_are_validation_errors() {
        let file = ConfigFile::parse(r#"{"demo": {"alpah": 1.5}}"#).unwrap();
        assert!(matches!(
            resolve::<Demo, _>("demo", &file, &DemoFlags { alpha: None }),
            Err(CliError::Validation(_))
        ));
        assert!(ConfigFile::parse("[1, 2]").is_err());
        assert!(ConfigFile::parse("{").is_err());
        assert!(ConfigFile::parse(r#"{"seed": -1}"#)
            .unwrap()
            .seed()
            .is_err());
    }

    #[test]
    fn hash_depends_on_every_input() {
        let d = Demo::default();
        let h = config_hash("demo", 1, &d);
        assert_eq!(h.len(), 64);
        assert_eq!(h, config_hash("demo", 1, &d));
        assert_ne!(h, config_hash("demo", 2, &d));
        assert_ne!(h, config_hash("other", 1, &d));
    }
}
