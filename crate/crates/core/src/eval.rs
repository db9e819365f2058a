//! Baseline highlighting policies and the evaluation harness.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::checkpoint::PolicyCheckpoint;
use crate::env::{belief_distance, observe, EnvState, HighlightAction, HighlightState, OversightEnv, OBS_DIM};
use crate::error::{Error, Result};
use crate::layout::{attr_of, Pair, N_PAIRS};
use crate::ppo::PolicyHead;
use crate::rng::{self, SimRng};
use crate::world::{is_critical, is_critical_value};

pub const EVALREPORT_SCHEMA: &str = "evalreport/1";

/// A highlighting strategy. Implementations may keep per-episode memory.
pub trait HighlightPolicy: Send {
    fn name(&self) -> String;

    /// Forget per-episode memory.
    fn reset(&mut self) {}

    fn act(&mut self, state: &EnvState, rng: &mut SimRng) -> Result<HighlightAction>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NeverPolicy;

impl HighlightPolicy for NeverPolicy {
    fn name(&self) -> String {
        "never".into()
    }

    fn act(&mut self, _state: &EnvState, _rng: &mut SimRng) -> Result<HighlightAction> {
        Ok(HighlightState::none())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysPolicy;

impl HighlightPolicy for AlwaysPolicy {
    fn name(&self) -> String {
        "always".into()
    }

    fn act(&mut self, _state: &EnvState, _rng: &mut SimRng) -> Result<HighlightAction> {
        Ok(HighlightState::all())
    }
}

pub fn never_policy() -> HighlightAction {
    HighlightState::none()
}

pub fn always_policy() -> HighlightAction {
    HighlightState::all()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RulePolicyConfig {
    pub highlight_duration: f64,
}

impl Default for RulePolicyConfig {
    fn default() -> Self {
        RulePolicyConfig {
            highlight_duration: 5.0,
        }
    }
}

/// Highlights a pair for a fixed duration after it becomes critical.
#[derive(Debug, Clone)]
pub struct RuleBasedPolicy {
    cfg: RulePolicyConfig,
    was_critical: [bool; N_PAIRS],
    onset: [Option<f64>; N_PAIRS],
}

impl RuleBasedPolicy {
    pub fn new(cfg: RulePolicyConfig) -> Result<Self> {
        if !(cfg.highlight_duration > 0.0) {
            return Err(Error::config("highlight_duration", "must be positive"));
        }
        Ok(RuleBasedPolicy {
            cfg,
            was_critical: [false; N_PAIRS],
            onset: [None; N_PAIRS],
        })
    }
}

impl HighlightPolicy for RuleBasedPolicy {
    fn name(&self) -> String {
        format!("rule_based({}s)", self.cfg.highlight_duration)
    }

    fn reset(&mut self) {
        self.was_critical = [false; N_PAIRS];
        self.onset = [None; N_PAIRS];
    }

    fn act(&mut self, state: &EnvState, _rng: &mut SimRng) -> Result<HighlightAction> {
        let t = state.att.time;
        let mut action = HighlightState::none();
        for pair in Pair::all() {
            let i = pair.index();
            let critical = is_critical(&state.att, pair.drone, pair.attr);
            if critical && !self.was_critical[i] {
                self.onset[i] = Some(t);
            }
            self.was_critical[i] = critical;
            if let Some(on) = self.onset[i] {
                // Small slack absorbs accumulated dt rounding.
                action.bits[i] = t + 1e-9 >= on && t + 1e-9 < on + self.cfg.highlight_duration;
            }
        }
        Ok(action)
    }
}

/// A trained policy head, greedy by default.
#[derive(Debug, Clone)]
pub struct LearnedPolicy {
    pub head: PolicyHead,
    pub stochastic: bool,
    pub label: String,
}

impl LearnedPolicy {
    pub fn new(head: PolicyHead, stochastic: bool) -> Result<Self> {
        if head.net.input_width() != OBS_DIM {
            return Err(Error::Dimension {
                context: "policy observation width".into(),
                expected: OBS_DIM,
                found: head.net.input_width(),
            });
        }
        Ok(LearnedPolicy {
            head,
            stochastic,
            label: "learned".into(),
        })
    }

    pub fn from_checkpoint(ckpt: &PolicyCheckpoint, stochastic: bool) -> Result<Self> {
        ckpt.check_obs_dim(OBS_DIM)?;
        Self::new(ckpt.policy().clone(), stochastic)
    }
}

impl HighlightPolicy for LearnedPolicy {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn act(&mut self, state: &EnvState, rng: &mut SimRng) -> Result<HighlightAction> {
        let obs = observe(state);
        if self.stochastic {
            Ok(self.head.act(&obs.0, rng)?.0)
        } else {
            self.head.act_greedy(&obs.0)
        }
    }
}

/// One environment step as persisted in a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub t: f64,
    pub s_att: Vec<f64>,
    pub s_usr: Vec<f64>,
    pub s_hlt: HighlightState,
    pub action: HighlightState,
    /// Sampled fixation; absent in human sessions.
    pub fixation: Option<Pair>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub client_fixations: Vec<Pair>,
    pub reward: f64,
}

impl TraceRecord {
    pub fn from_state(state: &EnvState, action: &HighlightAction, fixation: Option<Pair>, reward: f64) -> Self {
        TraceRecord {
            step: state.step_index,
            t: state.att.time,
            s_att: state.att.values.to_vec(),
            s_usr: state.usr.values.to_vec(),
            s_hlt: state.hlt,
            action: *action,
            fixation,
            client_fixations: Vec::new(),
            reward,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub seed: u64,
    pub records: Vec<TraceRecord>,
}

impl EpisodeTrace {
    pub fn total_reward(&self) -> f64 {
        self.records.iter().map(|r| r.reward).sum()
    }
}

/// Appends one JSON line per record and flushes after each, so an
/// interrupted writer leaves a valid prefix.
pub struct TraceWriter {
    out: BufWriter<File>,
}

impl TraceWriter {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(TraceWriter {
            out: BufWriter::new(file),
        })
    }

    pub fn append<T: Serialize>(&mut self, record: &T) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = TraceWriter::create(path)?;
    for r in records {
        w.append(r).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: format!("{}:{}", path.display(), n + 1),
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Seed of evaluation episode `i` under base seed `base`.
pub fn eval_episode_seed(base: u64, i: usize) -> u64 {
    rng::mix(base ^ 0xE7A1, i as u64)
}

/// Run one episode; the policy's own randomness uses a stream keyed by `seed`.
pub fn run_episode(env: &OversightEnv, policy: &mut dyn HighlightPolicy, seed: u64) -> Result<EpisodeTrace> {
    policy.reset();
    let mut state = env.reset(seed)?;
    let mut env_rng = env.episode_rng(seed);
    let mut policy_rng = rng::stream(seed, rng::streams::ROLLOUT_BASE - 1);
    let mut records = Vec::with_capacity(env.horizon());
    loop {
        let action = policy.act(&state, &mut policy_rng)?;
        let t = env.step(&state, &action, &mut env_rng)?;
        records.push(TraceRecord::from_state(&t.state, &action, Some(t.fixation), t.reward));
        state = t.state;
        if t.done {
            break;
        }
    }
    Ok(EpisodeTrace { seed, records })
}

/// A critical episode on one pair, found from a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalEvent {
    pub pair: Pair,
    pub onset_step: usize,
    /// Steps from onset until the belief first holds a critical value for
    /// the pair; censored at the end of the critical period if never.
    pub latency_steps: usize,
    pub detected: bool,
}

/// Critical onsets and their detection latencies. A pair counts as critical
/// from the first record where its ground truth crosses the threshold until
/// it stops being critical.
pub fn critical_events(trace: &EpisodeTrace) -> Vec<CriticalEvent> {
    let mut events = Vec::new();
    for i in 0..N_PAIRS {
        let attr = attr_of(i);
        let pair = Pair::from_index(i).unwrap();
        let mut k = 0;
        let recs = &trace.records;
        while k < recs.len() {
            if !is_critical_value(attr, recs[k].s_att[i]) {
                k += 1;
                continue;
            }
            let onset = k;
            let mut end = k;
            while end < recs.len() && is_critical_value(attr, recs[end].s_att[i]) {
                end += 1;
            }
            let hit = (onset..end).find(|&j| is_critical_value(attr, recs[j].s_usr[i]));
            events.push(CriticalEvent {
                pair,
                onset_step: onset,
                latency_steps: hit.unwrap_or(end) - onset,
                detected: hit.is_some(),
            });
            k = end;
        }
    }
    events
}

/// Outcome of the highlight-clearing diagnostic on one trace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClearStats {
    /// Fixations that landed on a highlighted icon.
    pub highlighted_fixations: usize,
    /// ...after which the policy dropped that highlight within `window` steps.
    pub cleared_within_window: usize,
    /// Whether the first such fixation was followed by a clear.
    pub first_cleared: Option<bool>,
}

pub const CLEAR_WINDOW_STEPS: usize = 2;

/// Count fixations on highlighted icons and whether the policy removes the
/// highlight within `window` subsequent decisions.
pub fn highlight_clear_stats(trace: &EpisodeTrace, window: usize) -> ClearStats {
    let mut stats = ClearStats::default();
    let recs = &trace.records;
    for (k, r) in recs.iter().enumerate() {
        let Some(fix) = r.fixation.or_else(|| r.client_fixations.first().copied()) else {
            continue;
        };
        if !r.s_hlt.is_set(fix) {
            continue;
        }
        stats.highlighted_fixations += 1;
        let cleared = recs[k + 1..recs.len().min(k + 1 + window)]
            .iter()
            .any(|next| !next.action.is_set(fix));
        if cleared {
            stats.cleared_within_window += 1;
        }
        if stats.first_cleared.is_none() {
            stats.first_cleared = Some(cleared);
        }
    }
    stats
}

/// Per-policy evaluation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub policy: String,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub episode_rewards: Vec<f64>,
    pub mean_episode_reward: f64,
    pub std_episode_reward: f64,
    pub mean_belief_distance_per_step: f64,
    pub mean_highlights_per_step: f64,
    pub critical_events: usize,
    pub mean_detection_latency_steps: Option<f64>,
    pub detection_rate: Option<f64>,
    /// Fraction of episodes whose first fixation on a highlighted icon was
    /// followed by the highlight being cleared within two steps.
    pub highlight_clear_rate: f64,
    pub episodes_with_highlighted_fixation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub scenario: String,
    pub highlight_penalty: f64,
    pub policies: Vec<PolicyReport>,
}

impl EvalReport {
    pub fn new(scenario: &str, highlight_penalty: f64, policies: Vec<PolicyReport>) -> Self {
        EvalReport {
            schema: EVALREPORT_SCHEMA.to_string(),
            scenario: scenario.to_string(),
            highlight_penalty,
            policies,
        }
    }

    pub fn get(&self, policy: &str) -> Option<&PolicyReport> {
        self.policies.iter().find(|p| p.policy == policy)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::files::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        crate::files::read_tagged(path, EVALREPORT_SCHEMA)
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregate a report from stored traces only.
pub fn summarize(policy: &str, env: &OversightEnv, traces: &[EpisodeTrace]) -> PolicyReport {
    let weights = env.reward_cfg.weights;
    let rewards: Vec<f64> = traces.iter().map(EpisodeTrace::total_reward).collect();
    let (mean, std) = mean_std(&rewards);
    let mut steps = 0usize;
    let mut dist_sum = 0.0;
    let mut hl_sum = 0usize;
    let mut events = Vec::new();
    let mut clear_successes = 0usize;
    let mut with_fixation = 0usize;
    for tr in traces {
        for r in &tr.records {
            let mut att = [0.0; N_PAIRS];
            att.copy_from_slice(&r.s_att);
            let mut usr = [0.0; N_PAIRS];
            usr.copy_from_slice(&r.s_usr);
            dist_sum += belief_distance(
                &crate::world::AttributeState::from_values(att, r.t),
                &crate::env::UserBeliefState { values: usr },
                &weights,
            );
            hl_sum += r.s_hlt.count();
            steps += 1;
        }
        events.extend(critical_events(tr));
        let cs = highlight_clear_stats(tr, CLEAR_WINDOW_STEPS);
        if let Some(first) = cs.first_cleared {
            with_fixation += 1;
            if first {
                clear_successes += 1;
            }
        }
    }
    let n_events = events.len();
    PolicyReport {
        policy: policy.to_string(),
        episodes: traces.len(),
        seeds: traces.iter().map(|t| t.seed).collect(),
        episode_rewards: rewards,
        mean_episode_reward: mean,
        std_episode_reward: std,
        mean_belief_distance_per_step: dist_sum / steps.max(1) as f64,
        mean_highlights_per_step: hl_sum as f64 / steps.max(1) as f64,
        critical_events: n_events,
        mean_detection_latency_steps: (n_events > 0)
            .then(|| events.iter().map(|e| e.latency_steps as f64).sum::<f64>() / n_events as f64),
        detection_rate: (n_events > 0).then(|| events.iter().filter(|e| e.detected).count() as f64 / n_events as f64),
        highlight_clear_rate: clear_successes as f64 / traces.len().max(1) as f64,
        episodes_with_highlighted_fixation: with_fixation,
    }
}

/// Run `seeds.len()` episodes of a policy. `make_policy` builds a fresh
/// instance per episode so episodes can run in parallel.
pub fn run_episodes<F>(env: &OversightEnv, make_policy: F, seeds: &[u64]) -> Result<Vec<EpisodeTrace>>
where
    F: Fn() -> Box<dyn HighlightPolicy> + Sync,
{
    let run = |seed: &u64| run_episode(env, make_policy().as_mut(), *seed);
    #[cfg(feature = "parallel")]
    let traces: Vec<Result<EpisodeTrace>> = {
        use rayon::prelude::*;
        seeds.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let traces: Vec<Result<EpisodeTrace>> = seeds.iter().map(run).collect();
    traces.into_iter().collect()
}

/// Evaluate a policy over `n_episodes` seeded episodes.
pub fn evaluate<F>(
    env: &OversightEnv,
    make_policy: F,
    n_episodes: usize,
    base_seed: u64,
) -> Result<(PolicyReport, Vec<EpisodeTrace>)>
where
    F: Fn() -> Box<dyn HighlightPolicy> + Sync,
{
    if n_episodes == 0 {
        return Err(Error::config("n_episodes", "must be at least 1"));
    }
    let name = make_policy().name();
    let seeds: Vec<u64> = (0..n_episodes).map(|i| eval_episode_seed(base_seed, i)).collect();
    let traces = run_episodes(env, make_policy, &seeds)?;
    Ok((summarize(&name, env, &traces), traces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::AttentionParams;
    use crate::env::RewardConfig;
    use crate::layout::{pair_index, Attr, DroneId};
    use crate::world::{EventKind, ScenarioScript, ScriptEvent};

    fn env_for(script: ScenarioScript) -> OversightEnv {
        OversightEnv::new(script, RewardConfig::default(), AttentionParams::default()).unwrap()
    }

    fn rotor_failure_script() -> ScenarioScript {
        let mut s = ScenarioScript::empty(30.0);
        s.events.push(ScriptEvent {
            t_start: 10.0,
            t_end: 10.0,
            drone: DroneId::new(1).unwrap(),
            attr: Attr::Rotor,
            kind: EventKind::Set { value: 0.0 },
        });
        s
    }

    #[test]
    fn rule_based_highlights_for_five_seconds() {
        let env = env_for(rotor_failure_script());
        let mut policy = RuleBasedPolicy::new(RulePolicyConfig::default()).unwrap();
        let mut state = env.reset(0).unwrap();
        let mut rng = env.episode_rng(0);
        let mut prng = rng::stream(0, 9);
        let rotor = pair_index(DroneId::new(1).unwrap(), Attr::Rotor);
        let mut on_times = vec![];
        loop {
            let a = policy.act(&state, &mut prng).unwrap();
            if a.bits[rotor] {
                on_times.push(state.att.time);
            }
            assert!(a.count() <= 1);
            let t = env.step(&state, &a, &mut rng).unwrap();
            state = t.state;
            if t.done {
                break;
            }
        }
        let expected: Vec<f64> = (0..10).map(|k| 10.0 + 0.5 * k as f64).collect();
        assert_eq!(on_times, expected);
    }

    #[test]
    fn rule_based_handles_simultaneous_events() {
        let mut script = rotor_failure_script();
        script.events.push(ScriptEvent {
            t_start: 10.0,
            t_end: 20.0,
            drone: DroneId::new(3).unwrap(),
            attr: Attr::NoFlyZone,
            kind: EventKind::Hold { value: 1.0 },
        });
        let env = env_for(script);
        let mut policy = RuleBasedPolicy::new(RulePolicyConfig::default()).unwrap();
        let mut state = env.reset(0).unwrap();
        let mut rng = env.episode_rng(0);
        let mut prng = rng::stream(0, 9);
        let mut max_on = 0;
        for _ in 0..30 {
            let a = policy.act(&state, &mut prng).unwrap();
            max_on = max_on.max(a.count());
            state = env.step(&state, &a, &mut rng).unwrap().state;
        }
        assert_eq!(max_on, 2);
    }

    #[test]
    fn rule_based_without_events_never_highlights() {
        let env = env_for(ScenarioScript::static_scenario());
        let (report, _) = evaluate(
            &env,
            || Box::new(RuleBasedPolicy::new(RulePolicyConfig::default()).unwrap()),
            3,
            1,
        )
        .unwrap();
        assert_eq!(report.mean_highlights_per_step, 0.0);
        assert!(RuleBasedPolicy::new(RulePolicyConfig {
            highlight_duration: 0.0
        })
        .is_err());
    }

    #[test]
    fn degenerate_baselines() {
        assert_eq!(never_policy().count(), 0);
        assert_eq!(always_policy().count(), 32);
        let env = env_for(ScenarioScript::static_scenario());
        let (always, traces) = evaluate(&env, || Box::new(AlwaysPolicy), 2, 0).unwrap();
        for r in &traces[0].records {
            assert!(r.reward <= -32.0 * 500.0);
        }
        assert!(always.mean_episode_reward <= -16_000.0 * 240.0);
    }

    #[test]
    fn never_on_static_scenario_is_perfect() {
        let env = env_for(ScenarioScript::static_scenario());
        let (report, _) = evaluate(&env, || Box::new(NeverPolicy), 4, 5).unwrap();
        assert_eq!(report.mean_episode_reward, 0.0);
        assert_eq!(report.mean_belief_distance_per_step, 0.0);
    }

    #[test]
    fn evaluation_is_deterministic_and_recomputable() {
        let env = env_for(ScenarioScript::default_scenario());
        let make = || Box::new(RuleBasedPolicy::new(RulePolicyConfig::default()).unwrap()) as Box<dyn HighlightPolicy>;
        let (a, ta) = evaluate(&env, make, 3, 42).unwrap();
        let (b, tb) = evaluate(&env, make, 3, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert_eq!(summarize(&a.policy, &env, &ta), a);
        for (tr, r) in ta.iter().zip(&a.episode_rewards) {
            assert_eq!(tr.total_reward(), *r);
        }
        assert!(evaluate(&env, make, 0, 42).is_err());
    }

    #[test]
    fn latency_from_trace() {
        let env = env_for(rotor_failure_script());
        let (_, traces) = evaluate(&env, || Box::new(NeverPolicy), 1, 0).unwrap();
        let events = critical_events(&traces[0]);
        assert_eq!(events.len(), 1);
        let e = events[0];
        assert_eq!(e.pair, Pair::new(DroneId::new(1).unwrap(), Attr::Rotor));
        assert_eq!(e.onset_step, 19);
        if e.detected {
            let k = e.onset_step + e.latency_steps;
            assert_eq!(traces[0].records[k].s_usr[e.pair.index()], 0.0);
            assert_eq!(traces[0].records[k].fixation, Some(e.pair));
        }
    }

    #[test]
    fn trace_jsonl_roundtrip() {
        let env = env_for(ScenarioScript::default_scenario());
        let (_, traces) = evaluate(&env, || Box::new(NeverPolicy), 1, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        write_jsonl(&path, &traces[0].records).unwrap();
        let back: Vec<TraceRecord> = read_jsonl(&path).unwrap();
        assert_eq!(back, traces[0].records);
    }

    #[test]
    fn learned_policy_rejects_wrong_width() {
        let mut r = rng::stream(0, 0);
        let head = PolicyHead::init(64, &mut r);
        let err = LearnedPolicy::new(head, false).unwrap_err().to_string();
        assert!(err.contains("96") && err.contains("64"));
    }
}
