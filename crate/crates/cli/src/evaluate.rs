use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use oversight_core::eval::{evaluate, write_jsonl, EvalReport, PolicyReport};

use crate::policy::{slug, PolicySpec};
use crate::setup::{data_dir, EnvArgs};

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// never, always, rule, rule:<seconds> or a checkpoint path. Repeatable.
    #[arg(long = "policy", required = true)]
    pub policies: Vec<String>,
    #[command(flatten)]
    pub env: EnvArgs,
    #[arg(long, default_value_t = 50)]
    pub episodes: usize,
    /// Base seed for the episode seeds.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sample learned policies instead of taking the argmax.
    #[arg(long)]
    pub stochastic: bool,
    /// Output directory [default: $OVERSIGHT_DATA_DIR/eval].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub const METRICS_HEADER: &str = "policy,episodes,mean_episode_reward,std_episode_reward,mean_belief_distance_per_step,mean_highlights_per_step,critical_events,mean_detection_latency_steps,detection_rate,highlight_clear_rate,episodes_with_highlighted_fixation";

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn metrics_row(p: &PolicyReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        p.policy,
        p.episodes,
        p.mean_episode_reward,
        p.std_episode_reward,
        p.mean_belief_distance_per_step,
        p.mean_highlights_per_step,
        p.critical_events,
        opt(p.mean_detection_latency_steps),
        opt(p.detection_rate),
        p.highlight_clear_rate,
        p.episodes_with_highlighted_fixation
    )
}

pub fn metrics_csv(report: &EvalReport) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for p in &report.policies {
        s.push_str(&metrics_row(p));
        s.push('\n');
    }
    s
}

pub fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn run(args: EvalArgs) -> anyhow::Result<()> {
    let env = args.env.build()?;
    let specs: Vec<PolicySpec> = args
        .policies
        .iter()
        .map(|p| PolicySpec::parse(p, args.stochastic))
        .collect::<anyhow::Result<_>>()?;
    let out = args.out.clone().unwrap_or_else(|| data_dir().join("eval"));
    let mut reports = Vec::new();
    for spec in &specs {
        let (report, traces) = evaluate(&env, || spec.build(), args.episodes, args.seed)?;
        let dir = out.join("traces").join(slug(&report.policy));
        for (i, tr) in traces.iter().enumerate() {
            write_jsonl(&dir.join(format!("episode-{i:03}.jsonl")), &tr.records)?;
        }
        println!(
            "{:<20} mean_reward {:>14.2} ± {:<12.2} highlights/step {:.3}",
            report.policy, report.mean_episode_reward, report.std_episode_reward, report.mean_highlights_per_step
        );
        reports.push(report);
    }
    let report = EvalReport::new(&args.env.scenario, env.reward_cfg.highlight_penalty, reports);
    report.save(&out.join("report.json"))?;
    write_file(&out.join("metrics.csv"), &metrics_csv(&report))?;
    println!("{}", out.join("report.json").display());
    Ok(())
}
