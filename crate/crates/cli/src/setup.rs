use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use oversight_core::{AttentionParams, OversightEnv, RewardConfig, ScenarioScript};

pub const DATA_DIR_VAR: &str = "OVERSIGHT_DATA_DIR";

/// Root for default outputs: `$OVERSIGHT_DATA_DIR`, else `./oversight-data`.
pub fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("oversight-data"))
}

/// Flags that pick the environment.
#[derive(Debug, Clone, Args)]
pub struct EnvArgs {
    /// Built-in scenario (`default`, `static`, `rotor_failure`) or a scenario/1 file.
    #[arg(long, default_value = "default")]
    pub scenario: String,
    /// reward/1 file; defaults to the built-in weights.
    #[arg(long)]
    pub reward: Option<PathBuf>,
    /// Attention parameter file; defaults to the built-in parameters.
    #[arg(long)]
    pub attention: Option<PathBuf>,
    /// Override the per-highlight penalty H.
    #[arg(long)]
    pub highlight_penalty: Option<f64>,
}

impl EnvArgs {
    pub fn reward_config(&self) -> anyhow::Result<RewardConfig> {
        let mut cfg = match &self.reward {
            Some(p) => RewardConfig::load(p)?,
            None => RewardConfig::default(),
        };
        if let Some(h) = self.highlight_penalty {
            cfg.highlight_penalty = h;
            cfg.validate()?;
        }
        Ok(cfg)
    }

    pub fn attention_params(&self) -> anyhow::Result<AttentionParams> {
        Ok(match &self.attention {
            Some(p) => AttentionParams::load(p)?,
            None => AttentionParams::default(),
        })
    }

    pub fn build(&self) -> anyhow::Result<OversightEnv> {
        let script =
            ScenarioScript::resolve(&self.scenario).with_context(|| format!("loading scenario `{}`", self.scenario))?;
        Ok(OversightEnv::new(
            script,
            self.reward_config()?,
            self.attention_params()?,
        )?)
    }
}
