use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use oversight_core::attention::ATTENTION_SCHEMA;
use oversight_core::checkpoint::{CHECKPOINT_SCHEMA, TRAIN_SCHEMA};
use oversight_core::env::REWARD_SCHEMA;
use oversight_core::eval::{EvalReport, TraceRecord, EVALREPORT_SCHEMA};
use oversight_core::ppo::TrainLogRecord;
use oversight_core::world::SCENARIO_SCHEMA;
use oversight_core::{AttentionParams, PolicyCheckpoint, RewardConfig, ScenarioScript, TrainConfig};

use crate::evaluate::{metrics_csv, write_file};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Current schema version, canonical formatting.
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// A schema-tagged JSON document, a training log or a trace file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

pub const TRAIN_LOG_HEADER: &str =
    "update,samples_so_far,episodes,mean_episode_reward,mean_episode_length,policy_loss,value_loss,entropy,approx_kl,clip_fraction,lr";

pub fn train_log_csv(records: &[TrainLogRecord]) -> String {
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    let mut s = format!("{TRAIN_LOG_HEADER}\n");
    for r in records {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.update,
            r.samples_so_far,
            r.episodes,
            opt(r.mean_episode_reward),
            opt(r.mean_episode_length),
            r.policy_loss,
            r.value_loss,
            r.entropy,
            r.approx_kl,
            r.clip_fraction,
            r.lr
        ));
    }
    s
}

pub fn trace_csv(records: &[TraceRecord]) -> String {
    let mut s = String::from("step,t,reward,highlights,fixation_drone,fixation_attr\n");
    for r in records {
        let (d, a) = r
            .fixation
            .map(|p| (p.drone.index().to_string(), p.attr.to_string()))
            .unwrap_or_default();
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.step,
            r.t,
            r.reward,
            r.s_hlt.count(),
            d,
            a
        ));
    }
    s
}

fn jsonl<T: serde::Serialize>(records: &[T]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("serializable record") + "\n")
        .collect()
}

fn parse_lines<T: serde::de::DeserializeOwned>(text: &str) -> Option<Vec<T>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).ok())
        .collect()
}

pub fn run(args: ExportArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let origin = args.input.display().to_string();
    let out = &args.output;
    let csv_unsupported = |what: &str| anyhow::anyhow!("{what} has no CSV form; use --format json");
    // A whole-file JSON document carries a schema tag.
    if let Ok(doc) = serde_json::from_str::<serde_json::Value>(&text) {
        let schema = doc
            .get("schema")
            .and_then(|s| s.as_str())
            .unwrap_or("<missing>")
            .to_string();
        match (schema.as_str(), args.format) {
            (CHECKPOINT_SCHEMA, Format::Json) => PolicyCheckpoint::from_json_str(&text, &origin)?.save(out)?,
            (EVALREPORT_SCHEMA, Format::Json) => EvalReport::load(&args.input)?.save(out)?,
            (EVALREPORT_SCHEMA, Format::Csv) => write_file(out, &metrics_csv(&EvalReport::load(&args.input)?))?,
            (SCENARIO_SCHEMA, Format::Json) => ScenarioScript::from_json_str(&text, &origin)?.save(out)?,
            (REWARD_SCHEMA, Format::Json) => RewardConfig::from_json_str(&text, &origin)?.save(out)?,
            (ATTENTION_SCHEMA, Format::Json) => AttentionParams::from_json_str(&text, &origin)?.save(out)?,
            (TRAIN_SCHEMA, Format::Json) => TrainConfig::from_json_str(&text, &origin)?.save(out)?,
            (CHECKPOINT_SCHEMA | SCENARIO_SCHEMA | REWARD_SCHEMA | ATTENTION_SCHEMA | TRAIN_SCHEMA, Format::Csv) => {
                return Err(csv_unsupported(&schema))
            }
            _ => {
                return Err(oversight_core::Error::Schema {
                    expected: "a known schema".into(),
                    found: schema,
                }
                .into())
            }
        }
        return Ok(());
    }
    if let Some(records) = parse_lines::<TrainLogRecord>(&text) {
        let body = match args.format {
            Format::Json => jsonl(&records),
            Format::Csv => train_log_csv(&records),
        };
        return write_file(out, &body);
    }
    if let Some(records) = parse_lines::<TraceRecord>(&text) {
        let body = match args.format {
            Format::Json => jsonl(&records),
            Format::Csv => trace_csv(&records),
        };
        return write_file(out, &body);
    }
    bail!("{origin}: not a schema-tagged document, training log or trace")
}
