use oversight_core::attention::{AttentionModel, InterfaceFrame};
use oversight_core::env::{belief_distance, EnvState, HighlightState};
use oversight_core::eval::{
    run_episode, AlwaysPolicy, HighlightPolicy, NeverPolicy, RuleBasedPolicy, RulePolicyConfig,
};
use oversight_core::layout::{Attr, Pair, N_PAIRS};
use oversight_core::rng::{self, SimRng};
use oversight_core::world::{critical_pairs, init_world};
use oversight_core::{AttentionParams, OversightEnv, RewardConfig, ScenarioScript};
use serde::Serialize;

pub fn attribute_names_json() -> String {
    let names: Vec<&str> = Attr::ALL.iter().map(|a| a.name()).collect();
    serde_json::to_string(&names).expect("serializable names")
}

fn params(highlight_boost: f64, temperature: f64) -> Result<AttentionParams, String> {
    let p = AttentionParams {
        highlight_boost,
        temperature,
        ..AttentionParams::default()
    };
    p.validate().map_err(|e| e.to_string())?;
    Ok(p)
}

pub fn gaze_heatmap(highlights: &[u8], highlight_boost: f64, temperature: f64) -> Result<Vec<f64>, String> {
    let hlt = HighlightState::from_ints(highlights).map_err(|e| e.to_string())?;
    let params = params(highlight_boost, temperature)?;
    let att = init_world(&ScenarioScript::default_scenario(), 0).map_err(|e| e.to_string())?;
    let dist = params.predict(&InterfaceFrame {
        att: &att,
        hlt: &hlt,
        prev_att: None,
    });
    Ok(dist.probabilities().to_vec())
}

fn env(highlight_penalty: f64, highlight_boost: f64) -> Result<OversightEnv, String> {
    OversightEnv::new(
        ScenarioScript::default_scenario(),
        RewardConfig::with_penalty(highlight_penalty),
        params(highlight_boost, 1.0)?,
    )
    .map_err(|e| e.to_string())
}

fn policy(name: &str) -> Result<Box<dyn HighlightPolicy>, String> {
    Ok(match name {
        "never" => Box::new(NeverPolicy),
        "always" => Box::new(AlwaysPolicy),
        "rule" => Box::new(RuleBasedPolicy::new(RulePolicyConfig::default()).map_err(|e| e.to_string())?),
        other => return Err(format!("unknown policy `{other}`")),
    })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Comparison {
    pub policy: String,
    pub mean_episode_reward: f64,
    pub mean_highlights_per_step: f64,
}

pub fn compare_policies(
    episodes: usize,
    seed: u64,
    highlight_penalty: f64,
    highlight_boost: f64,
) -> Result<String, String> {
    if episodes == 0 {
        return Err("episodes must be at least 1".into());
    }
    let env = env(highlight_penalty, highlight_boost)?;
    let mut rows = Vec::new();
    for name in ["never", "rule", "always"] {
        let mut total = 0.0;
        let mut highlights = 0usize;
        let mut steps = 0usize;
        for i in 0..episodes {
            let mut p = policy(name)?;
            let tr = run_episode(&env, p.as_mut(), rng::mix(seed, i as u64)).map_err(|e| e.to_string())?;
            total += tr.total_reward();
            highlights += tr.records.iter().map(|r| r.s_hlt.count()).sum::<usize>();
            steps += tr.records.len();
        }
        rows.push(Comparison {
            policy: policy(name)?.name(),
            mean_episode_reward: total / episodes as f64,
            mean_highlights_per_step: highlights as f64 / steps as f64,
        });
    }
    Ok(serde_json::to_string(&rows).expect("serializable rows"))
}

/// What the page draws after each step.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DemoFrame {
    pub step: usize,
    pub t: f64,
    pub att: Vec<f64>,
    pub usr: Vec<f64>,
    pub hlt: Vec<u8>,
    pub gaze: Vec<f64>,
    pub fixation: Option<usize>,
    pub critical: Vec<usize>,
    pub reward: f64,
    pub score: f64,
    pub belief_distance: f64,
}

pub struct DemoEpisode {
    env: OversightEnv,
    state: EnvState,
    policy: Box<dyn HighlightPolicy>,
    env_rng: SimRng,
    policy_rng: SimRng,
    gaze: Vec<f64>,
    fixation: Option<Pair>,
    reward: f64,
    score: f64,
}

impl DemoEpisode {
    pub fn new(policy_name: &str, seed: u64, highlight_boost: f64) -> Result<Self, String> {
        let env = env(RewardConfig::default().highlight_penalty, highlight_boost)?;
        let mut policy = policy(policy_name)?;
        policy.reset();
        let state = env.reset(seed).map_err(|e| e.to_string())?;
        Ok(DemoEpisode {
            env_rng: env.episode_rng(seed),
            policy_rng: rng::stream(seed, rng::streams::ROLLOUT_BASE - 1),
            env,
            state,
            policy,
            gaze: vec![1.0 / N_PAIRS as f64; N_PAIRS],
            fixation: None,
            reward: 0.0,
            score: 0.0,
        })
    }

    pub fn done(&self) -> bool {
        self.env.is_terminal(&self.state)
    }

    pub fn step(&mut self) -> Result<DemoFrame, String> {
        if self.done() {
            return Err("episode finished".into());
        }
        let action = self
            .policy
            .act(&self.state, &mut self.policy_rng)
            .map_err(|e| e.to_string())?;
        let t = self
            .env
            .step(&self.state, &action, &mut self.env_rng)
            .map_err(|e| e.to_string())?;
        self.gaze = self
            .env
            .attention
            .predict(&InterfaceFrame {
                att: &t.state.att,
                hlt: &t.state.hlt,
                prev_att: Some(&self.state.att),
            })
            .probabilities()
            .to_vec();
        self.state = t.state;
        self.fixation = Some(t.fixation);
        self.reward = t.reward;
        self.score += t.reward;
        Ok(self.frame())
    }

    pub fn frame(&self) -> DemoFrame {
        let s = &self.state;
        DemoFrame {
            step: s.step_index,
            t: s.att.time,
            att: s.att.values.to_vec(),
            usr: s.usr.values.to_vec(),
            hlt: s.hlt.as_ints(),
            gaze: self.gaze.clone(),
            fixation: self.fixation.map(Pair::index),
            critical: critical_pairs(&s.att).into_iter().map(Pair::index).collect(),
            reward: self.reward,
            score: self.score,
            belief_distance: belief_distance(&s.att, &s.usr, &self.env.reward_cfg.weights),
        }
    }
}
