use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use oversight_core::checkpoint::{PolicyCheckpoint, TrainConfig};
use oversight_core::eval::TraceWriter;
use oversight_core::ppo::train;

use crate::setup::data_dir;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// train/1 config file; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub total_samples: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Built-in scenario name or scenario/1 file.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub highlight_penalty: Option<f64>,
    /// Override any config field, e.g. `--set ppo.learning_rate=1e-4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Output directory [default: $OVERSIGHT_DATA_DIR/train/seed-<seed>].
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, short)]
    pub quiet: bool,
}

/// Apply `a.b.c=value` to a JSON document. The value is parsed as JSON when
/// possible and taken as a string otherwise.
pub fn apply_set(doc: &mut serde_json::Value, assignment: &str) -> anyhow::Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .with_context(|| format!("override `{assignment}` is not KEY=VALUE"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .with_context(|| format!("override `{key}`: `{}` is not an object", parts[..i].join(".")))?;
        if i + 1 == parts.len() {
            if !obj.contains_key(*part) {
                bail!("override `{key}`: unknown field `{part}`");
            }
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .get_mut(*part)
            .with_context(|| format!("override `{key}`: unknown field `{part}`"))?;
    }
    unreachable!("split always yields at least one part")
}

pub fn resolve_config(args: &TrainArgs) -> anyhow::Result<TrainConfig> {
    let base = match &args.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    let mut doc = serde_json::to_value(&base)?;
    for s in &args.sets {
        apply_set(&mut doc, s)?;
    }
    let mut cfg = TrainConfig::from_json_str(&doc.to_string(), "--set overrides")?;
    if let Some(seed) = args.seed {
        cfg.ppo.seed = seed;
    }
    if let Some(n) = args.total_samples {
        cfg.ppo.total_samples = n;
    }
    if let Some(w) = args.workers {
        cfg.ppo.num_workers = w;
    }
    if let Some(s) = &args.scenario {
        cfg.scenario = s.clone();
    }
    if let Some(h) = args.highlight_penalty {
        cfg.reward.highlight_penalty = h;
    }
    cfg.ppo.validate()?;
    cfg.reward.validate()?;
    cfg.attention.validate()?;
    if cfg.ppo.num_updates() == 0 {
        bail!(
            "total_samples {} is smaller than one batch ({})",
            cfg.ppo.total_samples,
            cfg.ppo.batch_size
        );
    }
    Ok(cfg)
}

pub fn run(args: TrainArgs) -> anyhow::Result<()> {
    let cfg = resolve_config(&args)?;
    let (script, env) = cfg.build_env()?;
    let hash = cfg.hash(&script);
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| data_dir().join("train").join(format!("seed-{}", cfg.ppo.seed)));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    cfg.save(&out.join("config.json"))?;
    let mut log = TraceWriter::create(&out.join("train_log.jsonl"))?;
    let total = cfg.ppo.num_updates();
    let every = cfg.ppo.checkpoint_every;
    let outcome = train(&env, &cfg.ppo, |p| {
        log.append(p.record).map_err(|e| oversight_core::Error::Io {
            path: out.join("train_log.jsonl"),
            source: e,
        })?;
        if !args.quiet {
            let mean = p
                .record
                .mean_episode_reward
                .map(|m| format!("{m:.1}"))
                .unwrap_or_else(|| "-".into());
            eprintln!(
                "update {}/{} samples {} mean_episode_reward {} entropy {:.3} approx_kl {:.4}",
                p.updates_done, total, p.samples_done, mean, p.record.entropy, p.record.approx_kl
            );
        }
        if every > 0 && p.updates_done % every == 0 && p.updates_done < total {
            PolicyCheckpoint::new(&cfg, hash.clone(), p.learner, p.updates_done, p.samples_done)
                .save(&out.join(format!("checkpoint-{:05}.json", p.updates_done)))?;
        }
        Ok(())
    })?;
    let ckpt = PolicyCheckpoint::new(&cfg, hash, &outcome.learner, outcome.log.len(), outcome.samples_done);
    let path = out.join("checkpoint.json");
    ckpt.save(&path)?;
    println!("{}", path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_override() {
        let mut doc = serde_json::to_value(TrainConfig::default()).unwrap();
        apply_set(&mut doc, "ppo.learning_rate=0.001").unwrap();
        apply_set(&mut doc, "scenario=static").unwrap();
        let cfg: TrainConfig = serde_json::from_value(doc.clone()).unwrap();
        assert_eq!(cfg.ppo.learning_rate, 0.001);
        assert_eq!(cfg.scenario, "static");
        assert!(apply_set(&mut doc, "ppo.nope=1").is_err());
        assert!(apply_set(&mut doc, "ppo").is_err());
    }
}
