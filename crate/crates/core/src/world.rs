//! Ground-truth drone attribute simulation driven by scripted events.
//!
//! Each pair carries a hidden *nominal* value that scripted `set` and `ramp`
//! events move, plus battery drain while the rotor runs. The displayed value
//! is the nominal value, overridden by any active `hold`, plus bounded
//! uniform noise for continuous attributes. Holds leave the nominal value
//! untouched, so the pair reverts once the hold ends.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::files;
use crate::layout::{attr_of, pair_index, Attr, DroneId, Pair, N_PAIRS};
use crate::rng::{self, SimRng};

pub const SCENARIO_SCHEMA: &str = "scenario/1";

/// Seconds of simulated time per environment step.
pub const DEFAULT_DT: f64 = 0.5;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeState {
    pub values: [f64; N_PAIRS],
    pub time: f64,
    nominal: [f64; N_PAIRS],
}

impl AttributeState {
    pub fn get(&self, drone: DroneId, attr: Attr) -> f64 {
        self.values[pair_index(drone, attr)]
    }

    /// Build a state with the given displayed values (nominal = displayed).
    pub fn from_values(values: [f64; N_PAIRS], time: f64) -> Self {
        AttributeState {
            values,
            time,
            nominal: values,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// Jump the nominal value at `t_start`.
    Set { value: f64 },
    /// Change the nominal value at `rate` per second over `[t_start, t_end]`.
    Ramp { rate: f64 },
    /// Display `value` during `[t_start, t_end)`, then revert.
    Hold { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptEvent {
    pub t_start: f64,
    pub t_end: f64,
    pub drone: DroneId,
    pub attr: Attr,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl ScriptEvent {
    pub fn pair(&self) -> Pair {
        Pair::new(self.drone, self.attr)
    }

    fn holds_at(&self, t: f64) -> Option<f64> {
        match self.kind {
            EventKind::Hold { value } if self.t_start <= t + TIME_EPS && t + TIME_EPS < self.t_end => Some(value),
            _ => None,
        }
    }
}

fn default_schema() -> String {
    SCENARIO_SCHEMA.to_string()
}

fn default_drain() -> f64 {
    0.001
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScript {
    #[serde(default = "default_schema")]
    pub schema: String,
    #[serde(default)]
    pub name: String,
    pub duration_s: f64,
    /// Initial nominal value per attribute; missing attributes use
    /// [`default_baseline`].
    #[serde(default)]
    pub baselines: BTreeMap<Attr, f64>,
    /// Battery fraction lost per second while the rotor runs.
    #[serde(default = "default_drain")]
    pub battery_drain: f64,
    /// Half-width of the uniform display noise per continuous attribute.
    #[serde(default, rename = "rng_jitter")]
    pub jitter: BTreeMap<Attr, f64>,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default)]
    pub events: Vec<ScriptEvent>,
}

pub fn default_baseline(attr: Attr) -> f64 {
    match attr {
        Attr::HorizontalVelocity => 8.0,
        Attr::VerticalVelocity => 0.5,
        Attr::Altitude => 60.0,
        Attr::Battery => 1.0,
        Attr::Rotor => 1.0,
        Attr::WindSpeed => 4.0,
        Attr::DistanceToTarget => 1200.0,
        Attr::NoFlyZone => 0.0,
    }
}

const DEFAULT_SCENARIO_JSON: &str = include_str!("../scenarios/default.json");
const STATIC_SCENARIO_JSON: &str = include_str!("../scenarios/static.json");
const ROTOR_FAILURE_SCENARIO_JSON: &str = include_str!("../scenarios/rotor_failure.json");

impl ScenarioScript {
    /// An event-free script; with no jitter and no drain nothing ever changes.
    pub fn empty(duration_s: f64) -> Self {
        ScenarioScript {
            schema: default_schema(),
            name: "empty".into(),
            duration_s,
            baselines: BTreeMap::new(),
            battery_drain: 0.0,
            jitter: BTreeMap::new(),
            seed_base: 0,
            events: Vec::new(),
        }
    }

    /// The shipped 120 s scenario with clustered critical events.
    pub fn default_scenario() -> Self {
        Self::from_json_str(DEFAULT_SCENARIO_JSON, "scenarios/default.json").expect("bundled default scenario is valid")
    }

    /// The shipped no-event, zero-noise scenario.
    pub fn static_scenario() -> Self {
        Self::from_json_str(STATIC_SCENARIO_JSON, "scenarios/static.json").expect("bundled static scenario is valid")
    }

    /// Default telemetry with a single rotor failure on drone 2 from 20 s to 60 s.
    pub fn rotor_failure_scenario() -> Self {
        Self::from_json_str(ROTOR_FAILURE_SCENARIO_JSON, "scenarios/rotor_failure.json")
            .expect("bundled rotor-failure scenario is valid")
    }

    /// Resolve a built-in name (`default`, `static`, `rotor_failure`) or a file path.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match name_or_path {
            "default" => Ok(Self::default_scenario()),
            "static" => Ok(Self::static_scenario()),
            "rotor_failure" => Ok(Self::rotor_failure_scenario()),
            path => Self::load(Path::new(path)),
        }
    }

    pub fn from_json_str(text: &str, origin: &str) -> Result<Self> {
        let script: ScenarioScript = files::from_tagged_str(text, SCENARIO_SCHEMA, origin)?;
        script.validate()?;
        Ok(script)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let script: ScenarioScript = files::read_tagged(path, SCENARIO_SCHEMA)?;
        script.validate()?;
        Ok(script)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        files::write_json(path, self)
    }

    /// Number of environment steps at the given step length.
    pub fn horizon(&self, dt: f64) -> usize {
        (self.duration_s / dt + TIME_EPS).floor() as usize
    }

    pub fn baseline(&self, attr: Attr) -> f64 {
        self.baselines
            .get(&attr)
            .copied()
            .unwrap_or_else(|| default_baseline(attr))
    }

    pub fn jitter_of(&self, attr: Attr) -> f64 {
        if attr.is_binary() || attr == Attr::Battery {
            0.0
        } else {
            self.jitter.get(&attr).copied().unwrap_or(0.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |message: String, events: Vec<usize>| Error::InvalidScenario { message, events };
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(invalid("duration_s must be positive".into(), vec![]));
        }
        if !(self.battery_drain.is_finite() && self.battery_drain >= 0.0) {
            return Err(invalid("battery_drain must be non-negative".into(), vec![]));
        }
        for (attr, amp) in &self.jitter {
            if !(amp.is_finite() && *amp >= 0.0) {
                return Err(invalid(format!("jitter for {attr} must be non-negative"), vec![]));
            }
        }
        for (attr, value) in &self.baselines {
            if !value.is_finite() {
                return Err(invalid(format!("baseline for {attr} is not finite"), vec![]));
            }
        }
        for (i, ev) in self.events.iter().enumerate() {
            if !(ev.t_start.is_finite() && ev.t_end.is_finite()) {
                return Err(invalid("event times must be finite".into(), vec![i]));
            }
            if ev.t_end < ev.t_start {
                return Err(invalid("t_end precedes t_start".into(), vec![i]));
            }
            if ev.t_start < 0.0 || ev.t_end > self.duration_s + TIME_EPS {
                return Err(invalid("event outside [0, duration_s]".into(), vec![i]));
            }
            if i > 0 && ev.t_start < self.events[i - 1].t_start {
                return Err(invalid("events not sorted by t_start".into(), vec![i - 1, i]));
            }
            match ev.kind {
                EventKind::Set { value } | EventKind::Hold { value } if !value.is_finite() => {
                    return Err(invalid("event value is not finite".into(), vec![i]));
                }
                EventKind::Ramp { rate } if !rate.is_finite() => {
                    return Err(invalid("ramp rate is not finite".into(), vec![i]));
                }
                EventKind::Ramp { .. } if ev.attr.is_binary() => {
                    return Err(invalid(format!("cannot ramp binary attribute {}", ev.attr), vec![i]));
                }
                _ => {}
            }
            if ev.attr == Attr::Battery {
                let ok = match ev.kind {
                    EventKind::Ramp { rate } => rate <= 0.0,
                    EventKind::Set { .. } => ev.t_start == 0.0,
                    EventKind::Hold { .. } => false,
                };
                if !ok {
                    return Err(invalid(
                        "battery only accepts non-positive ramps and sets at t=0".into(),
                        vec![i],
                    ));
                }
            }
        }
        // Contradictory overlaps on the same pair.
        for i in 0..self.events.len() {
            for j in (i + 1)..self.events.len() {
                let (a, b) = (&self.events[i], &self.events[j]);
                if a.pair() != b.pair() {
                    continue;
                }
                let contradiction = match (a.kind, b.kind) {
                    (EventKind::Set { value: va }, EventKind::Set { value: vb }) => a.t_start == b.t_start && va != vb,
                    (EventKind::Hold { value: va }, EventKind::Hold { value: vb }) => {
                        a.t_start < b.t_end && b.t_start < a.t_end && va != vb
                    }
                    _ => false,
                };
                if contradiction {
                    return Err(invalid(
                        format!("contradictory overlapping events on {}", a.pair()),
                        vec![i, j],
                    ));
                }
            }
        }
        Ok(())
    }

    fn display(&self, nominal: &[f64; N_PAIRS], time: f64, rng: &mut SimRng) -> [f64; N_PAIRS] {
        let mut values = *nominal;
        for ev in &self.events {
            if let Some(v) = ev.holds_at(time) {
                values[ev.pair().index()] = v;
            }
        }
        for (i, v) in values.iter_mut().enumerate() {
            let attr = attr_of(i);
            let amp = self.jitter_of(attr);
            if amp > 0.0 {
                *v += rng.gen_range(-amp..=amp);
            }
            *v = attr.clamp(*v);
        }
        values
    }
}

/// Initial ground truth at time 0: baselines, `set` events at t=0, holds
/// covering t=0, and one draw of display noise from a stream keyed by
/// `(script.seed_base, seed)`.
pub fn init_world(script: &ScenarioScript, seed: u64) -> Result<AttributeState> {
    script.validate()?;
    let mut nominal = [0.0; N_PAIRS];
    for (i, v) in nominal.iter_mut().enumerate() {
        *v = script.baseline(attr_of(i));
    }
    for ev in &script.events {
        if let EventKind::Set { value } = ev.kind {
            if ev.t_start <= TIME_EPS {
                nominal[ev.pair().index()] = value;
            }
        }
    }
    for (i, v) in nominal.iter_mut().enumerate() {
        *v = attr_of(i).clamp(*v);
    }
    let mut rng = rng::stream(rng::mix(script.seed_base, seed), rng::streams::WORLD_INIT);
    let values = script.display(&nominal, 0.0, &mut rng);
    Ok(AttributeState {
        values,
        time: 0.0,
        nominal,
    })
}

/// Advance ground truth by `dt` seconds.
///
/// Events with `t_start` in `(time, time + dt]` fire; ramps integrate over
/// their overlap with that interval. Fails with [`Error::EpisodeEnded`] when
/// the step would run past `duration_s`; the input state is left untouched.
pub fn advance(state: &AttributeState, script: &ScenarioScript, dt: f64, rng: &mut SimRng) -> Result<AttributeState> {
    if !(dt > 0.0) {
        return Err(Error::config("dt", "must be positive"));
    }
    let t0 = state.time;
    let t1 = t0 + dt;
    if t1 > script.duration_s + TIME_EPS {
        return Err(Error::EpisodeEnded {
            time: t0,
            dt,
            duration: script.duration_s,
        });
    }
    let mut nominal = state.nominal;
    for ev in &script.events {
        let i = ev.pair().index();
        match ev.kind {
            EventKind::Set { value } => {
                if ev.t_start > t0 + TIME_EPS && ev.t_start <= t1 + TIME_EPS {
                    nominal[i] = value;
                }
            }
            EventKind::Ramp { rate } => {
                let overlap = t1.min(ev.t_end) - t0.max(ev.t_start);
                if overlap > 0.0 {
                    nominal[i] += rate * overlap;
                }
            }
            EventKind::Hold { .. } => {}
        }
    }
    if script.battery_drain > 0.0 {
        for d in DroneId::all() {
            if state.get(d, Attr::Rotor) == 1.0 {
                nominal[pair_index(d, Attr::Battery)] -= script.battery_drain * dt;
            }
        }
    }
    for (i, v) in nominal.iter_mut().enumerate() {
        *v = attr_of(i).clamp(*v);
    }
    let values = script.display(&nominal, t1, rng);
    Ok(AttributeState {
        values,
        time: t1,
        nominal,
    })
}

/// Whether a pair is in a critical condition: rotor off, inside a no-fly
/// zone, battery below 20 %, or wind above 10 m/s.
pub fn is_critical(state: &AttributeState, drone: DroneId, attr: Attr) -> bool {
    is_critical_value(attr, state.get(drone, attr))
}

pub fn is_critical_value(attr: Attr, value: f64) -> bool {
    match attr {
        Attr::Rotor => value == 0.0,
        Attr::NoFlyZone => value == 1.0,
        Attr::Battery => value < 0.2,
        Attr::WindSpeed => value > 10.0,
        _ => false,
    }
}

/// All currently critical pairs in canonical order.
pub fn critical_pairs(state: &AttributeState) -> Vec<Pair> {
    Pair::all().filter(|p| is_critical(state, p.drone, p.attr)).collect()
}
