//! The run configuration bundle and `section.key=value` overrides.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use slotnav_core::evalkit::EvalConfig;
use slotnav_core::model::ModelConfig;
use slotnav_core::trainer::TrainConfig;
use slotnav_core::worldsim::WorldConfig;

use crate::error::CliError;

/// Everything a run can be configured with, under one namespace per
/// component: `world.*`, `model.*`, `train.*`, `eval.*`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub world: WorldConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

/// Apply dotted-path overrides like `train.lr=5e-4` or
/// `model.history_limit=10`. Paths must name existing keys; values are
/// parsed as JSON scalars, falling back to strings.
pub fn apply_overrides(cfg: &mut RunConfig, sets: &[String]) -> Result<(), CliError> {
    if sets.is_empty() {
        return Ok(());
    }
    let mut root = serde_json::to_value(&*cfg)
        .map_err(|e| CliError::config(format!("serializing config: {e}")))?;
    for s in sets {
        let (path, raw) = s
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("override {s:?} is not key=value")))?;
        let value: Value =
            serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        if path.is_empty() || path.split('.').any(|p| p.is_empty()) {
            return Err(CliError::config(format!("override key {path:?} is malformed")));
        }
        let pointer = format!("/{}", path.replace('.', "/"));
        let slot = root
            .pointer_mut(&pointer)
            .ok_or_else(|| CliError::config(format!("unknown config key {path:?}")))?;
        *slot = value;
    }
    *cfg = serde_json::from_value(root)
        .map_err(|e| CliError::config(format!("invalid override value: {e}")))?;
    Ok(())
}
