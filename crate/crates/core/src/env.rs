//! The oversight MDP: ground truth, user belief, and highlights.
//!
//! One step advances the drones, shows the chosen highlights, samples one
//! fixation from the gaze model and copies the fixated ground-truth value into
//! the user's belief. Reward is computed on the resulting state.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::attention::{sample_fixation, AttentionModel, AttentionParams, InterfaceFrame};
use crate::error::{Error, Result};
use crate::files;
use crate::layout::{attr_of, Attr, Pair, N_ATTRS, N_PAIRS};
use crate::rng::{self, SimRng};
use crate::world::{advance, init_world, AttributeState, ScenarioScript, DEFAULT_DT};

pub const REWARD_SCHEMA: &str = "reward/1";
pub const OBS_DIM: usize = 3 * N_PAIRS;

/// One bit per icon. Serialized as an array of 32 integers (0 or 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct HighlightState {
    pub bits: [bool; N_PAIRS],
}

/// An action has the same shape as the highlight state it replaces.
pub type HighlightAction = HighlightState;

impl HighlightState {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn all() -> Self {
        HighlightState { bits: [true; N_PAIRS] }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_set(&self, pair: Pair) -> bool {
        self.bits[pair.index()]
    }

    pub fn set(&mut self, pair: Pair, on: bool) {
        self.bits[pair.index()] = on;
    }

    pub fn as_ints(&self) -> Vec<u8> {
        self.bits.iter().map(|b| *b as u8).collect()
    }

    pub fn from_ints(ints: &[u8]) -> Result<Self> {
        if ints.len() != N_PAIRS {
            return Err(Error::Dimension {
                context: "highlight bits".into(),
                expected: N_PAIRS,
                found: ints.len(),
            });
        }
        let mut bits = [false; N_PAIRS];
        for (b, &x) in bits.iter_mut().zip(ints) {
            *b = match x {
                0 => false,
                1 => true,
                other => return Err(Error::config("hlt", format!("bit value {other} is not 0 or 1"))),
            };
        }
        Ok(HighlightState { bits })
    }
}

impl Serialize for HighlightState {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.as_ints().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for HighlightState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let ints = Vec::<u8>::deserialize(deserializer)?;
        HighlightState::from_ints(&ints).map_err(serde::de::Error::custom)
    }
}

/// The last value the user is assumed to have perceived for each icon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserBeliefState {
    pub values: [f64; N_PAIRS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub att: AttributeState,
    pub usr: UserBeliefState,
    pub hlt: HighlightState,
    pub step_index: usize,
}

fn reward_schema() -> String {
    REWARD_SCHEMA.to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RewardFile {
    #[serde(default = "reward_schema")]
    schema: String,
    weights: BTreeMap<Attr, f64>,
    highlight_penalty: f64,
}

/// Belief-error weights per attribute and the per-highlight penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RewardFile", into = "RewardFile")]
pub struct RewardConfig {
    pub weights: [f64; N_ATTRS],
    pub highlight_penalty: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        let mut weights = [1.0; N_ATTRS];
        weights[Attr::Rotor.index()] = 100.0;
        weights[Attr::NoFlyZone.index()] = 100.0;
        weights[Attr::Battery.index()] = 50.0;
        weights[Attr::WindSpeed.index()] = 20.0;
        weights[Attr::DistanceToTarget.index()] = 1.0;
        RewardConfig {
            weights,
            highlight_penalty: 500.0,
        }
    }
}

impl TryFrom<RewardFile> for RewardConfig {
    type Error = Error;

    fn try_from(file: RewardFile) -> Result<Self> {
        let mut weights = [f64::NAN; N_ATTRS];
        for (a, w) in &file.weights {
            weights[a.index()] = *w;
        }
        if let Some(missing) = Attr::ALL.iter().find(|a| weights[a.index()].is_nan()) {
            return Err(Error::config(&format!("weights.{missing}"), "missing"));
        }
        let cfg = RewardConfig {
            weights,
            highlight_penalty: file.highlight_penalty,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<RewardConfig> for RewardFile {
    fn from(cfg: RewardConfig) -> Self {
        RewardFile {
            schema: reward_schema(),
            weights: Attr::ALL.iter().map(|a| (*a, cfg.weights[a.index()])).collect(),
            highlight_penalty: cfg.highlight_penalty,
        }
    }
}

impl RewardConfig {
    pub fn with_penalty(highlight_penalty: f64) -> Self {
        RewardConfig {
            highlight_penalty,
            ..Self::default()
        }
    }

    pub fn weight(&self, attr: Attr) -> f64 {
        self.weights[attr.index()]
    }

    pub fn validate(&self) -> Result<()> {
        for a in Attr::ALL {
            let w = self.weights[a.index()];
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::config(&format!("weights.{a}"), "must be positive"));
            }
        }
        if !(self.highlight_penalty.is_finite() && self.highlight_penalty >= 0.0) {
            return Err(Error::config("highlight_penalty", "must be non-negative"));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str, origin: &str) -> Result<Self> {
        files::from_tagged_str(text, REWARD_SCHEMA, origin)
    }

    pub fn load(path: &Path) -> Result<Self> {
        files::read_tagged(path, REWARD_SCHEMA)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        files::write_json(path, self)
    }
}

/// Weighted L1 distance between ground truth and belief.
pub fn belief_distance(att: &AttributeState, usr: &UserBeliefState, weights: &[f64; N_ATTRS]) -> f64 {
    att.values
        .iter()
        .zip(&usr.values)
        .enumerate()
        .map(|(i, (a, u))| weights[attr_of(i).index()] * (a - u).abs())
        .sum()
}

/// Negative belief distance minus the penalty for every shown highlight.
pub fn reward(state: &EnvState, cfg: &RewardConfig) -> f64 {
    -belief_distance(&state.att, &state.usr, &cfg.weights) - cfg.highlight_penalty * state.hlt.count() as f64
}

/// Policy input: normalized ground truth, normalized belief, highlight bits.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(pub Vec<f64>);

pub fn observe(state: &EnvState) -> Observation {
    let mut v = Vec::with_capacity(OBS_DIM);
    v.extend(
        state
            .att
            .values
            .iter()
            .enumerate()
            .map(|(i, x)| attr_of(i).normalize(*x)),
    );
    v.extend(
        state
            .usr
            .values
            .iter()
            .enumerate()
            .map(|(i, x)| attr_of(i).normalize(*x)),
    );
    v.extend(state.hlt.bits.iter().map(|b| *b as u8 as f64));
    Observation(v)
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: EnvState,
    pub reward: f64,
    pub done: bool,
    pub fixation: Pair,
}

/// Environment definition. Cheap to clone; state lives in [`EnvState`].
#[derive(Debug, Clone)]
pub struct OversightEnv {
    pub script: Arc<ScenarioScript>,
    pub reward_cfg: RewardConfig,
    pub attention: Arc<dyn AttentionModel>,
    pub dt: f64,
}

impl OversightEnv {
    pub fn new(script: ScenarioScript, reward_cfg: RewardConfig, attention: AttentionParams) -> Result<Self> {
        attention.validate()?;
        Self::with_model(script, reward_cfg, Arc::new(attention))
    }

    pub fn with_model(
        script: ScenarioScript,
        reward_cfg: RewardConfig,
        attention: Arc<dyn AttentionModel>,
    ) -> Result<Self> {
        script.validate()?;
        reward_cfg.validate()?;
        Ok(OversightEnv {
            script: Arc::new(script),
            reward_cfg,
            attention,
            dt: DEFAULT_DT,
        })
    }

    pub fn horizon(&self) -> usize {
        self.script.horizon(self.dt)
    }

    /// Generator for the stochastic part of an episode with this seed.
    pub fn episode_rng(&self, seed: u64) -> SimRng {
        rng::stream(rng::mix(self.script.seed_base, seed), rng::streams::ENV)
    }

    /// Start state: the user knows the initial values and nothing is highlighted.
    pub fn reset(&self, seed: u64) -> Result<EnvState> {
        let att = init_world(&self.script, seed)?;
        Ok(EnvState {
            usr: UserBeliefState { values: att.values },
            att,
            hlt: HighlightState::none(),
            step_index: 0,
        })
    }

    pub fn is_terminal(&self, state: &EnvState) -> bool {
        state.step_index >= self.horizon()
    }

    /// Transition steps 1 and 2: advance ground truth, then show `action`.
    pub fn advance_and_highlight(
        &self,
        state: &EnvState,
        action: &HighlightAction,
        rng: &mut SimRng,
    ) -> Result<EnvState> {
        if self.is_terminal(state) {
            return Err(Error::TerminalState(state.step_index));
        }
        let att = advance(&state.att, &self.script, self.dt, rng)?;
        Ok(EnvState {
            att,
            usr: state.usr,
            hlt: *action,
            step_index: state.step_index + 1,
        })
    }

    pub fn step(&self, state: &EnvState, action: &HighlightAction, rng: &mut SimRng) -> Result<Transition> {
        let mut next = self.advance_and_highlight(state, action, rng)?;
        let dist = self.attention.predict(&InterfaceFrame {
            att: &next.att,
            hlt: &next.hlt,
            prev_att: Some(&state.att),
        });
        let fixation = sample_fixation(&dist, rng);
        perceive(&mut next, fixation);
        Ok(Transition {
            reward: reward(&next, &self.reward_cfg),
            done: next.step_index >= self.horizon(),
            state: next,
            fixation,
        })
    }
}

/// The user looks at `pair`: its belief becomes the current ground truth.
pub fn perceive(state: &mut EnvState, pair: Pair) {
    let i = pair.index();
    state.usr.values[i] = state.att.values[i];
}
