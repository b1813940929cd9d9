//! Layered configuration: built-in defaults, then a JSON file, then flags.
//!
//! The default seed may also come from the `GESR_SEED` environment
//! variable; it applies only when neither the file nor `--seed` sets one.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const SEED_ENV: &str = "GESR_SEED";

/// Recursively overlay `patch` onto `base`; objects merge key by key,
/// everything else is replaced.
pub fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("{}: invalid JSON: {e}", path.display())))
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(s) => {
            s.trim().parse().map(Some).map_err(|_| {
                CliError::usage(format!("{SEED_ENV}=`{s}` is not an unsigned integer"))
            })
        }
        Err(_) => Ok(None),
    }
}

/// Build the effective configuration. `seed_path` is the JSON pointer of
/// the seed field inside `T`.
pub fn layered<T>(
    file: Option<&Path>,
    seed_path: &str,
    flag_seed: Option<u64>,
) -> Result<T, CliError>
where
    T: Serialize + DeserializeOwned + Default,
{
    let mut value = serde_json::to_value(T::default()).expect("defaults serialize");
    let mut file_has_seed = false;
    if let Some(path) = file {
        let patch = read_json(path)?;
        file_has_seed = patch.pointer(seed_path).is_some();
        merge(&mut value, patch);
    }
    let seed = match flag_seed {
        Some(s) => Some(s),
        None if !file_has_seed => env_seed()?,
        None => None,
    };
    if let Some(s) = seed {
        *value
            .pointer_mut(seed_path)
            .unwrap_or_else(|| panic!("seed path {seed_path} exists in defaults")) = Value::from(s);
    }
    serde_json::from_value(value)
        .map_err(|e| CliError::usage(format!("invalid configuration: {e}")))
}

/// Pretty JSON with a trailing newline.
pub fn to_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("configuration serializes");
    s.push('\n');
    s
}

/// Ablation modes: which operators receive guidance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Mode {
    /// Uniform mutation and crossover.
    NoGuide,
    /// Guided mutation, uniform crossover.
    MutationOnly,
    /// Guided mutation and crossover.
    MutationAndCrossover,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::NoGuide => "no_guide",
            Mode::MutationOnly => "mutation_only",
            Mode::MutationAndCrossover => "mutation_and_crossover",
        }
    }
}

/// Which implementation provides guidance in the guided modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum GuideSource {
    Oracle,
    Learned,
}

/// Guide wiring shared by `run` and `bench`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Guidance {
    pub guide: GuideSource,
    /// Trained editor snapshot, required by the learned guide.
    pub editor: Option<PathBuf>,
}

impl Default for Guidance {
    fn default() -> Self {
        Guidance {
            guide: GuideSource::Oracle,
            editor: None,
        }
    }
}
