//! Experiment configuration documents: strict-schema JSON naming a weight
//! model, a task, its parameters, and the mandatory master seed.

use crate::model::WeightModel;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Environment variable consulted when a config omits `output_dir`.
pub const OUT_DIR_ENV: &str = "SMOOTHFIX_OUT";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: WeightModel,
    pub task: String,
    /// Task-specific parameters; each task applies its own strict schema.
    #[serde(default)]
    pub params: serde_json::Value,
    pub master_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model
            .validate()
            .map_err(|e| Error::Config(format!("model: {e}")))?;
        if self.task.is_empty() {
            return Err(Error::Config("task must be named".into()));
        }
        Ok(())
    }

    /// The directory reports land in: the config's `output_dir`, else the
    /// `SMOOTHFIX_OUT` environment variable.
    pub fn resolve_output_dir(&self) -> Result<PathBuf> {
        if let Some(dir) = &self.output_dir {
            return Ok(dir.clone());
        }
        if let Some(dir) = std::env::var_os(OUT_DIR_ENV) {
            if !dir.is_empty() {
                return Ok(PathBuf::from(dir));
            }
        }
        Err(Error::Config(format!(
            "no output directory: set `output_dir` in the config or export {OUT_DIR_ENV}"
        )))
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let raw = std::fs::read(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let config: ExperimentConfig = serde_json::from_slice(&raw)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}
