use std::path::Path;

use anyhow::{bail, Context};
use oversight_core::eval::{
    AlwaysPolicy, HighlightPolicy, LearnedPolicy, NeverPolicy, RuleBasedPolicy, RulePolicyConfig,
};
use oversight_core::PolicyCheckpoint;

/// A policy named on the command line: `never`, `always`, `rule`,
/// `rule:<seconds>`, or a path to a checkpoint file.
#[derive(Debug, Clone)]
pub enum PolicySpec {
    Never,
    Always,
    Rule(RulePolicyConfig),
    Learned {
        label: String,
        checkpoint: Box<PolicyCheckpoint>,
        stochastic: bool,
    },
}

impl PolicySpec {
    pub fn parse(text: &str, stochastic: bool) -> anyhow::Result<Self> {
        Ok(match text {
            "never" => PolicySpec::Never,
            "always" => PolicySpec::Always,
            "rule" | "rule_based" => PolicySpec::Rule(RulePolicyConfig::default()),
            _ => {
                if let Some(secs) = text.strip_prefix("rule:") {
                    let highlight_duration: f64 =
                        secs.parse().with_context(|| format!("bad rule duration `{secs}`"))?;
                    // Validate early.
                    let cfg = RulePolicyConfig { highlight_duration };
                    RuleBasedPolicy::new(cfg)?;
                    PolicySpec::Rule(cfg)
                } else {
                    let path = Path::new(text);
                    if !path.exists() {
                        bail!("unknown policy `{text}` (expected never, always, rule, rule:<seconds> or a checkpoint path)");
                    }
                    let checkpoint = PolicyCheckpoint::load(path)?;
                    LearnedPolicy::from_checkpoint(&checkpoint, stochastic)?;
                    PolicySpec::Learned {
                        label: if stochastic {
                            "learned_stochastic".into()
                        } else {
                            "learned".into()
                        },
                        checkpoint: Box::new(checkpoint),
                        stochastic,
                    }
                }
            }
        })
    }

    pub fn build(&self) -> Box<dyn HighlightPolicy> {
        match self {
            PolicySpec::Never => Box::new(NeverPolicy),
            PolicySpec::Always => Box::new(AlwaysPolicy),
            PolicySpec::Rule(cfg) => Box::new(RuleBasedPolicy::new(*cfg).expect("validated at parse time")),
            PolicySpec::Learned {
                label,
                checkpoint,
                stochastic,
            } => {
                let mut p = LearnedPolicy::from_checkpoint(checkpoint, *stochastic).expect("validated at parse time");
                p.label = label.clone();
                Box::new(p)
            }
        }
    }
}

/// File-name-safe version of a policy name.
pub fn slug(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect::<String>()
        .trim_matches('_')
        .to_string()
}
