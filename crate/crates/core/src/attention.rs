//! Where the simulated user looks next.
//!
//! The built-in model scores each icon additively (habitual prior, highlight
//! boost, change boost) and takes a tempered softmax over the 32 icons. Any
//! other gaze model can stand in by implementing [`AttentionModel`].

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::HighlightState;
use crate::error::{Error, Result};
use crate::files;
use crate::layout::{attr_of, Attr, Pair, N_ATTRS, N_PAIRS};
use crate::rng::SimRng;
use crate::world::AttributeState;

pub const ATTENTION_SCHEMA: &str = "attention/1";

/// What the user sees: current values, current highlights, and optionally
/// the previous step's values for change detection.
#[derive(Debug, Clone, Copy)]
pub struct InterfaceFrame<'a> {
    pub att: &'a AttributeState,
    pub hlt: &'a HighlightState,
    pub prev_att: Option<&'a AttributeState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GazeDistribution {
    p: Vec<f64>,
}

impl GazeDistribution {
    /// Normalize non-negative weights into a distribution.
    pub fn from_weights(weights: [f64; N_PAIRS]) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::config("weights", "must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::config("weights", "all zero"));
        }
        Ok(GazeDistribution {
            p: weights.iter().map(|w| w / total).collect(),
        })
    }

    pub fn point_mass(pair: Pair) -> Self {
        let mut p = vec![0.0; N_PAIRS];
        p[pair.index()] = 1.0;
        GazeDistribution { p }
    }

    pub fn uniform() -> Self {
        GazeDistribution {
            p: vec![1.0 / N_PAIRS as f64; N_PAIRS],
        }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn prob(&self, pair: Pair) -> f64 {
        self.p[pair.index()]
    }
}

/// Draw the next fixation by inverse-CDF sampling (one uniform draw).
pub fn sample_fixation(dist: &GazeDistribution, rng: &mut SimRng) -> Pair {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in dist.p.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return Pair::from_index(i).unwrap();
        }
    }
    // Rounding left `u` past the accumulated mass.
    Pair::from_index(last).unwrap()
}

pub trait AttentionModel: Send + Sync + std::fmt::Debug {
    fn predict(&self, frame: &InterfaceFrame<'_>) -> GazeDistribution;
}

fn attention_schema() -> String {
    ATTENTION_SCHEMA.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AttentionFile {
    #[serde(default = "attention_schema")]
    schema: String,
    prior: BTreeMap<Attr, f64>,
    highlight_boost: f64,
    #[serde(default)]
    change_boost: f64,
    temperature: f64,
}

/// Parameters of the additive-score softmax gaze model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AttentionFile", into = "AttentionFile")]
pub struct AttentionParams {
    /// Habitual viewing weight per attribute.
    pub prior: [f64; N_ATTRS],
    pub highlight_boost: f64,
    pub change_boost: f64,
    pub temperature: f64,
}

impl Default for AttentionParams {
    fn default() -> Self {
        let mut prior = [1.0; N_ATTRS];
        prior[Attr::Rotor.index()] = 2.0;
        prior[Attr::Battery.index()] = 2.0;
        AttentionParams {
            prior,
            highlight_boost: 4.0,
            change_boost: 0.0,
            temperature: 1.0,
        }
    }
}

impl TryFrom<AttentionFile> for AttentionParams {
    type Error = Error;

    fn try_from(file: AttentionFile) -> Result<Self> {
        let mut prior = [f64::NAN; N_ATTRS];
        for (attr, w) in &file.prior {
            prior[attr.index()] = *w;
        }
        if let Some(missing) = Attr::ALL.iter().find(|a| prior[a.index()].is_nan()) {
            return Err(Error::config(&format!("prior.{missing}"), "missing"));
        }
        let params = AttentionParams {
            prior,
            highlight_boost: file.highlight_boost,
            change_boost: file.change_boost,
            temperature: file.temperature,
        };
        params.validate()?;
        Ok(params)
    }
}

impl From<AttentionParams> for AttentionFile {
    fn from(p: AttentionParams) -> Self {
        AttentionFile {
            schema: attention_schema(),
            prior: Attr::ALL.iter().map(|a| (*a, p.prior[a.index()])).collect(),
            highlight_boost: p.highlight_boost,
            change_boost: p.change_boost,
            temperature: p.temperature,
        }
    }
}

impl AttentionParams {
    pub fn uniform_prior() -> Self {
        AttentionParams {
            prior: [1.0; N_ATTRS],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for a in Attr::ALL {
            let w = self.prior[a.index()];
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::config(&format!("prior.{a}"), "must be finite and non-negative"));
            }
        }
        if self.prior.iter().all(|w| *w == 0.0) {
            return Err(Error::config("prior", "at least one weight must be positive"));
        }
        if !(self.highlight_boost.is_finite() && self.highlight_boost >= 0.0) {
            return Err(Error::config("highlight_boost", "must be non-negative"));
        }
        if !(self.change_boost.is_finite() && self.change_boost >= 0.0) {
            return Err(Error::config("change_boost", "must be non-negative"));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::config("temperature", "must be positive"));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str, origin: &str) -> Result<Self> {
        files::from_tagged_str(text, ATTENTION_SCHEMA, origin)
    }

    pub fn load(path: &Path) -> Result<Self> {
        files::read_tagged(path, ATTENTION_SCHEMA)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        files::write_json(path, self)
    }

    /// Unnormalized score of every icon.
    pub fn scores(&self, frame: &InterfaceFrame<'_>) -> [f64; N_PAIRS] {
        let mut scores = [0.0; N_PAIRS];
        for (i, s) in scores.iter_mut().enumerate() {
            let attr = attr_of(i);
            *s = self.prior[attr.index()];
            if frame.hlt.bits[i] {
                *s += self.highlight_boost;
            }
            if let Some(prev) = frame.prev_att {
                if self.change_boost != 0.0 {
                    let (lo, hi) = attr.range();
                    let change = (frame.att.values[i] - prev.values[i]).abs() / (hi - lo);
                    *s += self.change_boost * change;
                }
            }
        }
        scores
    }
}

impl AttentionModel for AttentionParams {
    fn predict(&self, frame: &InterfaceFrame<'_>) -> GazeDistribution {
        let scores = self.scores(frame);
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut p: Vec<f64> = scores.iter().map(|s| ((s - max) / self.temperature).exp()).collect();
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        GazeDistribution { p }
    }
}

/// Always fixates the same icon. Useful for tests and scripted walk-throughs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedGaze(pub Pair);

impl AttentionModel for FixedGaze {
    fn predict(&self, _frame: &InterfaceFrame<'_>) -> GazeDistribution {
        GazeDistribution::point_mass(self.0)
    }
}

/// Convenience wrapper over the trait method.
pub fn predict(frame: &InterfaceFrame<'_>, params: &AttentionParams) -> GazeDistribution {
    params.predict(frame)
}
