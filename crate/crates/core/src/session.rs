//! Live oversight sessions and the `session/1` message types.
//!
//! A session owns one environment episode and one policy. In
//! `simulated_user` mode each tick is exactly an environment step. In
//! `human_user` mode the gaze model is not sampled; the belief is a proxy
//! updated only by fixation events reported by the client.

use serde::{Deserialize, Serialize};

use crate::env::{perceive, reward, EnvState, OversightEnv};
use crate::error::{Error, Result};
use crate::eval::{HighlightPolicy, PolicyReport, TraceRecord, TraceWriter};
use crate::layout::{Attr, DroneId, Pair};
use crate::rng::{self, SimRng};
use crate::world::critical_pairs;

pub const SESSION_SCHEMA: &str = "session/1";
pub const DEFAULT_DWELL_THRESHOLD_MS: u64 = 250;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionMode {
    SimulatedUser,
    HumanUser,
    Replay,
}

/// Client to server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello {
        mode: SessionMode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        policy: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Fixation(FixationMessage),
    Pause,
    Resume,
}

/// Raw fixation report; validated by [`Session::handle_fixation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixationMessage {
    pub drone: i64,
    pub attr: String,
    pub dwell_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMessage {
    pub tick: usize,
    pub att: Vec<f64>,
    pub hlt: Vec<u8>,
    pub score: f64,
    pub events: Vec<Pair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AckCode {
    Ok,
    BelowThreshold,
    UnknownPair,
    Closed,
    Paused,
    Resumed,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub code: AckCode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Ack {
    pub fn new(code: AckCode) -> Self {
        Ack { code, detail: None }
    }

    pub fn with_detail(code: AckCode, detail: impl Into<String>) -> Self {
        Ack {
            code,
            detail: Some(detail.into()),
        }
    }
}

/// End-of-session summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub mode: SessionMode,
    pub policy: String,
    pub ticks: usize,
    pub score: f64,
    pub mean_belief_error: f64,
    pub highlights_shown: usize,
    pub fixations_received: usize,
}

/// Server to client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Frame(FrameMessage),
    Ack(Ack),
    End { report: SessionSummary },
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable message")
    }
}

enum Driver {
    Live {
        env: OversightEnv,
        state: EnvState,
        policy: Box<dyn HighlightPolicy>,
        env_rng: SimRng,
        policy_rng: SimRng,
    },
    Replay {
        records: Vec<TraceRecord>,
        next: usize,
    },
}

pub struct Session {
    pub id: String,
    pub mode: SessionMode,
    pub dwell_threshold_ms: u64,
    policy_name: String,
    driver: Driver,
    score: f64,
    tick: usize,
    closed: bool,
    paused: bool,
    pending_fixations: Vec<Pair>,
    fixations_received: usize,
    belief_error_sum: f64,
    highlights_shown: usize,
    trace: Vec<TraceRecord>,
    writer: Option<TraceWriter>,
}

impl Session {
    /// A live session; `seed` plays the same role as in an offline episode.
    pub fn new(
        id: impl Into<String>,
        mode: SessionMode,
        env: OversightEnv,
        mut policy: Box<dyn HighlightPolicy>,
        seed: u64,
    ) -> Result<Self> {
        if mode == SessionMode::Replay {
            return Err(Error::config("mode", "use Session::replay for replay sessions"));
        }
        policy.reset();
        let state = env.reset(seed)?;
        let env_rng = env.episode_rng(seed);
        Ok(Session {
            id: id.into(),
            mode,
            dwell_threshold_ms: DEFAULT_DWELL_THRESHOLD_MS,
            policy_name: policy.name(),
            driver: Driver::Live {
                env,
                state,
                policy,
                env_rng,
                // Same stream as `eval::run_episode`.
                policy_rng: rng::stream(seed, rng::streams::ROLLOUT_BASE - 1),
            },
            score: 0.0,
            tick: 0,
            closed: false,
            paused: false,
            pending_fixations: Vec::new(),
            fixations_received: 0,
            belief_error_sum: 0.0,
            highlights_shown: 0,
            trace: Vec::new(),
            writer: None,
        })
    }

    /// Play back stored trace records.
    pub fn replay(id: impl Into<String>, records: Vec<TraceRecord>) -> Self {
        Session {
            id: id.into(),
            mode: SessionMode::Replay,
            dwell_threshold_ms: DEFAULT_DWELL_THRESHOLD_MS,
            policy_name: "replay".into(),
            driver: Driver::Replay { records, next: 0 },
            score: 0.0,
            tick: 0,
            closed: false,
            paused: false,
            pending_fixations: Vec::new(),
            fixations_received: 0,
            belief_error_sum: 0.0,
            highlights_shown: 0,
            trace: Vec::new(),
            writer: None,
        }
    }

    /// Persist every tick to `writer` as it happens.
    pub fn with_trace_writer(mut self, writer: TraceWriter) -> Self {
        self.writer = Some(writer);
        self
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn tick(&self) -> usize {
        self.tick
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    /// Current environment state (live sessions only).
    pub fn state(&self) -> Option<&EnvState> {
        match &self.driver {
            Driver::Live { state, .. } => Some(state),
            Driver::Replay { .. } => None,
        }
    }

    pub fn pause(&mut self) -> Ack {
        self.paused = true;
        Ack::new(AckCode::Paused)
    }

    pub fn resume(&mut self) -> Ack {
        self.paused = false;
        Ack::new(AckCode::Resumed)
    }

    pub fn close(&mut self) {
        self.closed = true;
    }

    /// Apply a client-reported fixation to the proxy belief.
    pub fn handle_fixation(&mut self, event: &FixationMessage) -> Ack {
        if self.closed {
            return Ack::new(AckCode::Closed);
        }
        let pair = match (
            usize::try_from(event.drone).ok().map(DroneId::new),
            event.attr.parse::<Attr>(),
        ) {
            (Some(Ok(drone)), Ok(attr)) => Pair::new(drone, attr),
            _ => {
                return Ack::with_detail(
                    AckCode::UnknownPair,
                    format!("unknown pair ({}, {})", event.drone, event.attr),
                )
            }
        };
        if event.dwell_ms < self.dwell_threshold_ms {
            return Ack::with_detail(
                AckCode::BelowThreshold,
                format!("dwell {} ms < {} ms", event.dwell_ms, self.dwell_threshold_ms),
            );
        }
        match &mut self.driver {
            Driver::Live { state, .. } => {
                perceive(state, pair);
                self.pending_fixations.push(pair);
                self.fixations_received += 1;
                Ack::new(AckCode::Ok)
            }
            Driver::Replay { .. } => Ack::with_detail(AckCode::UnknownPair, "replay sessions ignore fixations"),
        }
    }

    /// Advance one tick and produce the frame for it.
    pub fn session_step(&mut self) -> Result<FrameMessage> {
        if self.closed {
            return Err(Error::SessionClosed);
        }
        let record = match &mut self.driver {
            Driver::Live {
                env,
                state,
                policy,
                env_rng,
                policy_rng,
            } => {
                let action = policy.act(state, policy_rng)?;
                let (next, rec, done) = match self.mode {
                    SessionMode::SimulatedUser => {
                        let t = env.step(state, &action, env_rng)?;
                        let rec = TraceRecord::from_state(&t.state, &action, Some(t.fixation), t.reward);
                        (t.state, rec, t.done)
                    }
                    _ => {
                        let next = env.advance_and_highlight(state, &action, env_rng)?;
                        let r = reward(&next, &env.reward_cfg);
                        let mut rec = TraceRecord::from_state(&next, &action, None, r);
                        rec.client_fixations = std::mem::take(&mut self.pending_fixations);
                        let done = env.is_terminal(&next);
                        (next, rec, done)
                    }
                };
                self.belief_error_sum += crate::env::belief_distance(&next.att, &next.usr, &env.reward_cfg.weights);
                *state = next;
                if done {
                    self.closed = true;
                }
                rec
            }
            Driver::Replay { records, next } => {
                let rec = records.get(*next).cloned().ok_or(Error::SessionClosed)?;
                *next += 1;
                if *next >= records.len() {
                    self.closed = true;
                }
                rec
            }
        };
        self.score += record.reward;
        self.tick += 1;
        self.highlights_shown += record.s_hlt.count();
        let frame = frame_from_record(&record, self.tick, self.score);
        if let Some(w) = self.writer.as_mut() {
            w.append(&record)
                .map_err(|e| Error::io(format!("session {} trace", self.id), e))?;
        }
        self.trace.push(record);
        Ok(frame)
    }

    pub fn summary(&self) -> SessionSummary {
        SessionSummary {
            session_id: self.id.clone(),
            mode: self.mode,
            policy: self.policy_name.clone(),
            ticks: self.tick,
            score: self.score,
            mean_belief_error: self.belief_error_sum / self.tick.max(1) as f64,
            highlights_shown: self.highlights_shown,
            fixations_received: self.fixations_received,
        }
    }
}

/// Frame for a trace record; `events` lists the currently critical pairs.
pub fn frame_from_record(record: &TraceRecord, tick: usize, score: f64) -> FrameMessage {
    let mut values = [0.0; crate::layout::N_PAIRS];
    values.copy_from_slice(&record.s_att);
    let att = crate::world::AttributeState::from_values(values, record.t);
    FrameMessage {
        tick,
        att: record.s_att.clone(),
        hlt: record.s_hlt.as_ints(),
        score,
        events: critical_pairs(&att),
    }
}

/// Fold a session's summary into the evaluation report shape.
pub fn summary_as_report(s: &SessionSummary) -> PolicyReport {
    PolicyReport {
        policy: s.policy.clone(),
        episodes: 1,
        seeds: vec![],
        episode_rewards: vec![s.score],
        mean_episode_reward: s.score,
        std_episode_reward: 0.0,
        mean_belief_distance_per_step: s.mean_belief_error,
        mean_highlights_per_step: s.highlights_shown as f64 / s.ticks.max(1) as f64,
        critical_events: 0,
        mean_detection_latency_steps: None,
        detection_rate: None,
        highlight_clear_rate: 0.0,
        episodes_with_highlighted_fixation: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::AttentionParams;
    use crate::env::RewardConfig;
    use crate::eval::{run_episode, NeverPolicy, RuleBasedPolicy, RulePolicyConfig};
    use crate::world::ScenarioScript;

    fn env() -> OversightEnv {
        OversightEnv::new(
            ScenarioScript::default_scenario(),
            RewardConfig::default(),
            AttentionParams::default(),
        )
        .unwrap()
    }

    fn fix(drone: i64, attr: &str, dwell_ms: u64) -> FixationMessage {
        FixationMessage {
            drone,
            attr: attr.into(),
            dwell_ms,
        }
    }

    #[test]
    fn human_mode_belief_waits_for_fixations() {
        let mut s = Session::new("h", SessionMode::HumanUser, env(), Box::new(NeverPolicy), 3).unwrap();
        let before = s.state().unwrap().usr;
        for _ in 0..20 {
            s.session_step().unwrap();
        }
        assert_eq!(s.state().unwrap().usr, before);
    }

    #[test]
    fn fixation_updates_proxy_belief() {
        let mut s = Session::new("h", SessionMode::HumanUser, env(), Box::new(NeverPolicy), 3).unwrap();
        for _ in 0..60 {
            s.session_step().unwrap();
        }
        // Drone 3's rotor is held off between t=26 s and t=40 s.
        let pair = Pair::new(DroneId::new(3).unwrap(), Attr::Rotor);
        assert_eq!(s.state().unwrap().att.values[pair.index()], 0.0);
        assert_eq!(s.state().unwrap().usr.values[pair.index()], 1.0);
        assert_eq!(s.handle_fixation(&fix(3, "rotor", 400)).code, AckCode::Ok);
        s.session_step().unwrap();
        let st = s.state().unwrap();
        assert_eq!(st.usr.values[pair.index()], 0.0);
        assert_eq!(s.trace().last().unwrap().client_fixations, vec![pair]);
    }

    #[test]
    fn fixation_validation() {
        let mut s = Session::new("h", SessionMode::HumanUser, env(), Box::new(NeverPolicy), 3).unwrap();
        assert_eq!(s.handle_fixation(&fix(0, "battery", 100)).code, AckCode::BelowThreshold);
        assert_eq!(s.handle_fixation(&fix(7, "battery", 400)).code, AckCode::UnknownPair);
        assert_eq!(s.handle_fixation(&fix(-1, "battery", 400)).code, AckCode::UnknownPair);
        assert_eq!(s.handle_fixation(&fix(1, "speed", 400)).code, AckCode::UnknownPair);
        assert_eq!(s.handle_fixation(&fix(0, "battery", 400)).code, AckCode::Ok);
        assert_eq!(s.handle_fixation(&fix(1, "altitude", 400)).code, AckCode::Ok);
        s.session_step().unwrap();
        assert_eq!(s.trace()[0].client_fixations.len(), 2);
    }

    #[test]
    fn simulated_session_matches_offline_episode() {
        let e = env();
        let mut s = Session::new(
            "s",
            SessionMode::SimulatedUser,
            e.clone(),
            Box::new(RuleBasedPolicy::new(RulePolicyConfig::default()).unwrap()),
            77,
        )
        .unwrap();
        let mut frames = vec![];
        while !s.is_closed() {
            frames.push(s.session_step().unwrap());
        }
        let mut offline_policy = RuleBasedPolicy::new(RulePolicyConfig::default()).unwrap();
        let offline = run_episode(&e, &mut offline_policy, 77).unwrap();
        assert_eq!(s.trace(), offline.records.as_slice());
        let mut score = 0.0;
        for (f, r) in frames.iter().zip(&offline.records) {
            score += r.reward;
            assert_eq!(f.score, score);
            assert_eq!(f.att, r.s_att);
        }
        assert_eq!(s.score(), offline.total_reward());
        assert!(matches!(s.session_step(), Err(Error::SessionClosed)));
    }

    #[test]
    fn replay_reproduces_frames() {
        let e = env();
        let offline = run_episode(&e, &mut NeverPolicy, 5).unwrap();
        let mut s = Session::replay("r", offline.records.clone());
        let mut n = 0;
        while !s.is_closed() {
            let f = s.session_step().unwrap();
            assert_eq!(f.att, offline.records[n].s_att);
            n += 1;
        }
        assert_eq!(n, offline.records.len());
        assert_eq!(s.score(), offline.total_reward());
    }

    #[test]
    fn wire_format_field_names() {
        let msg: ClientMessage =
            serde_json::from_str(r#"{"type":"fixation","drone":2,"attr":"battery","dwell_ms":300}"#).unwrap();
        assert_eq!(msg, ClientMessage::Fixation(fix(2, "battery", 300)));
        let hello: ClientMessage = serde_json::from_str(r#"{"type":"hello","mode":"human_user"}"#).unwrap();
        assert!(matches!(
            hello,
            ClientMessage::Hello {
                mode: SessionMode::HumanUser,
                ..
            }
        ));
        assert_eq!(
            serde_json::from_str::<ClientMessage>(r#"{"type":"pause"}"#).unwrap(),
            ClientMessage::Pause
        );

        let frame = ServerMessage::Frame(FrameMessage {
            tick: 1,
            att: vec![0.5],
            hlt: vec![1],
            score: -2.0,
            events: vec![Pair::new(DroneId::new(0).unwrap(), Attr::Rotor)],
        });
        assert_eq!(
            frame.to_json(),
            r#"{"type":"frame","tick":1,"att":[0.5],"hlt":[1],"score":-2.0,"events":[{"drone":0,"attr":"rotor"}]}"#
        );
        let ack = ServerMessage::Ack(Ack::new(AckCode::BelowThreshold)).to_json();
        assert_eq!(ack, r#"{"type":"ack","code":"below_threshold"}"#);
    }
}
