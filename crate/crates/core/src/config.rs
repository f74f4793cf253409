//! Shared JSON configuration. Every section is optional and falls back to
//! its defaults; grid lengths are in mm.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curriculum::{RandomizationSpec, VelocityCurriculum, ZeroCommandSchedule};
use crate::error::ConfigError;
use crate::gait::{AlphaTaskParams, SymParams};
use crate::geometry::{ContactModel, TaxelGrid};
use crate::observation::{ActionSpec, ObsNoiseSpec};
use crate::reward::RewardConfig;
use crate::signal::PipelineConfig;

/// Object dimensions used when a trajectory does not carry its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReplayObject {
    pub radius: f64,
    pub length: f64,
    pub mass: f64,
}

impl Default for ReplayObject {
    fn default() -> Self {
        ReplayObject {
            radius: 0.05,
            length: 0.15,
            mass: 1.45,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub grid: TaxelGrid,
    pub contact_model: ContactModel,
    pub pipeline: PipelineConfig,
    pub sym: SymParams,
    pub alpha_task: AlphaTaskParams,
    pub reward: RewardConfig,
    pub obs_noise: ObsNoiseSpec,
    pub action: ActionSpec,
    pub curriculum: VelocityCurriculum,
    pub zero_command: ZeroCommandSchedule,
    pub randomization: RandomizationSpec,
    pub replay_object: ReplayObject,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.grid.validate()?;
        self.contact_model.validate()?;
        self.pipeline.validate()?;
        self.sym.validate()?;
        self.reward.validate()?;
        self.obs_noise.validate()?;
        self.action.validate()?;
        self.curriculum.validate()?;
        self.randomization.validate()?;
        let o = &self.replay_object;
        if !(o.radius > 0.0 && o.length > 0.0 && o.mass >= 0.0) {
            return Err(ConfigError::invalid("replay_object", "dimensions must be positive"));
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
