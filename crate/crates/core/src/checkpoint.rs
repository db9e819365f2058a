//! Training configuration and policy checkpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attention::AttentionParams;
use crate::env::{OversightEnv, RewardConfig, OBS_DIM};
use crate::error::{Error, Result};
use crate::files;
use crate::ppo::{Learner, PolicyHead, PpoConfig};
use crate::world::ScenarioScript;

pub const TRAIN_SCHEMA: &str = "train/1";
pub const CHECKPOINT_SCHEMA: &str = "checkpoint/1";

fn train_schema() -> String {
    TRAIN_SCHEMA.to_string()
}

fn default_scenario() -> String {
    "default".to_string()
}

/// Everything needed to reproduce a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "train_schema")]
    pub schema: String,
    #[serde(default)]
    pub ppo: PpoConfig,
    /// Built-in scenario name or path to a `scenario/1` file.
    #[serde(default = "default_scenario")]
    pub scenario: String,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default)]
    pub attention: AttentionParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            schema: train_schema(),
            ppo: PpoConfig::default(),
            scenario: default_scenario(),
            reward: RewardConfig::default(),
            attention: AttentionParams::default(),
        }
    }
}

impl TrainConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: TrainConfig = files::read_tagged(path, TRAIN_SCHEMA)?;
        cfg.ppo.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str, origin: &str) -> Result<Self> {
        let cfg: TrainConfig = files::from_tagged_str(text, TRAIN_SCHEMA, origin)?;
        cfg.ppo.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        files::write_json(path, self)
    }

    pub fn build_env(&self) -> Result<(ScenarioScript, OversightEnv)> {
        let script = ScenarioScript::resolve(&self.scenario)?;
        let env = OversightEnv::new(script.clone(), self.reward.clone(), self.attention.clone())?;
        Ok((script, env))
    }

    /// SHA-256 over this config and the resolved scenario contents.
    pub fn hash(&self, script: &ScenarioScript) -> String {
        let doc = serde_json::json!({ "config": self, "scenario": script });
        hex::encode(Sha256::digest(doc.to_string().as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyCheckpoint {
    pub schema: String,
    pub obs_dim: usize,
    pub updates_done: usize,
    pub samples_done: usize,
    pub config_hash: String,
    pub config: TrainConfig,
    pub learner: Learner,
}

impl PolicyCheckpoint {
    pub fn new(
        config: &TrainConfig,
        config_hash: String,
        learner: &Learner,
        updates_done: usize,
        samples_done: usize,
    ) -> Self {
        PolicyCheckpoint {
            schema: CHECKPOINT_SCHEMA.to_string(),
            obs_dim: OBS_DIM,
            updates_done,
            samples_done,
            config_hash,
            config: config.clone(),
            learner: learner.clone(),
        }
    }

    pub fn policy(&self) -> &PolicyHead {
        &self.learner.policy
    }

    /// Check that the stored networks accept `obs_dim`-wide observations.
    pub fn check_obs_dim(&self, obs_dim: usize) -> Result<()> {
        for (what, found) in [
            ("checkpoint obs_dim", self.obs_dim),
            ("policy input width", self.learner.policy.net.input_width()),
            ("value input width", self.learner.value.input_width()),
        ] {
            if found != obs_dim {
                return Err(Error::Dimension {
                    context: what.into(),
                    expected: obs_dim,
                    found,
                });
            }
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string(self).expect("serializable checkpoint");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str, origin: &str) -> Result<Self> {
        let ckpt: PolicyCheckpoint = files::from_tagged_str(text, CHECKPOINT_SCHEMA, origin)?;
        ckpt.check_obs_dim(ckpt.obs_dim)?;
        PolicyHead::new(ckpt.learner.policy.net.clone())?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, &path.display().to_string())
    }
}
