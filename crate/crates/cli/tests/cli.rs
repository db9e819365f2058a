use std::io::{BufRead, BufReader};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

use oversight_core::eval::{read_jsonl, run_episode, RuleBasedPolicy, RulePolicyConfig, TraceRecord};
use oversight_core::layout::{Attr, DroneId, Pair};
use oversight_core::session::{AckCode, ClientMessage, FixationMessage, ServerMessage, SessionMode};
use oversight_core::{AttentionParams, OversightEnv, RewardConfig, ScenarioScript};
use serde_json::Value;
use tungstenite::{Message, WebSocket};

fn oversight(args: &[&str], data: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oversight"))
        .args(args)
        .env("OVERSIGHT_DATA_DIR", data)
        .output()
        .expect("run oversight")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn error_doc(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not one JSON object ({e}): {text}"))
}

const SMALL_CONFIG: &str = r#"{
  "schema": "train/1",
  "ppo": {"total_samples": 1024, "batch_size": 512, "minibatch_size": 128, "epochs_per_batch": 2, "num_workers": 2},
  "scenario": "default"
}"#;

#[test]
fn training_twice_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, SMALL_CONFIG).unwrap();
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = oversight(
            &[
                "train",
                "--config",
                cfg.to_str().unwrap(),
                "--seed",
                "3",
                "--quiet",
                "--out",
                out_dir.to_str().unwrap(),
            ],
            dir.path(),
        );
        let printed = ok(&out);
        assert_eq!(printed.trim(), out_dir.join("checkpoint.json").display().to_string());
        runs.push(out_dir);
    }
    for file in ["checkpoint.json", "train_log.jsonl", "config.json"] {
        let a = std::fs::read(runs[0].join(file)).unwrap();
        let b = std::fs::read(runs[1].join(file)).unwrap();
        assert!(a == b, "{file} differs");
    }
    let log = std::fs::read_to_string(runs[0].join("train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);

    // The checkpoint can be evaluated directly.
    let eval_dir = dir.path().join("eval");
    let ckpt = runs[0].join("checkpoint.json");
    ok(&oversight(
        &[
            "eval",
            "--policy",
            ckpt.to_str().unwrap(),
            "--episodes",
            "2",
            "--out",
            eval_dir.to_str().unwrap(),
        ],
        dir.path(),
    ));
    assert!(eval_dir.join("report.json").exists());
}

#[test]
fn never_on_the_static_scenario_scores_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("eval");
    ok(&oversight(
        &[
            "eval",
            "--policy",
            "never",
            "--policy",
            "always",
            "--scenario",
            "static",
            "--episodes",
            "3",
            "--out",
            out_dir.to_str().unwrap(),
        ],
        dir.path(),
    ));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema"], "evalreport/1");
    let policies = report["policies"].as_array().unwrap();
    assert_eq!(policies[0]["policy"], "never");
    assert_eq!(policies[0]["mean_episode_reward"].as_f64(), Some(0.0));
    assert!(policies[1]["mean_episode_reward"].as_f64().unwrap() < 0.0);
    let csv = std::fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    for i in 0..3 {
        assert!(out_dir.join(format!("traces/never/episode-{i:03}.jsonl")).exists());
    }
}

#[test]
fn replay_prints_the_stored_record() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("eval");
    ok(&oversight(
        &[
            "eval",
            "--policy",
            "rule",
            "--episodes",
            "1",
            "--seed",
            "9",
            "--out",
            out_dir.to_str().unwrap(),
        ],
        dir.path(),
    ));
    let traces = out_dir.join("traces");
    let sub = std::fs::read_dir(&traces).unwrap().next().unwrap().unwrap().path();
    let trace = sub.join("episode-000.jsonl");
    let stored = std::fs::read_to_string(&trace).unwrap();
    let line = stored
        .lines()
        .find(|l| serde_json::from_str::<Value>(l).unwrap()["step"] == 42)
        .unwrap();
    let printed = ok(&oversight(
        &["replay", "--trace", trace.to_str().unwrap(), "--step", "42"],
        dir.path(),
    ));
    assert_eq!(printed.trim_end(), line);

    let walk = ok(&oversight(&["replay", "--trace", trace.to_str().unwrap()], dir.path()));
    assert!(walk.lines().count() >= 240);

    let missing = oversight(
        &["replay", "--trace", trace.to_str().unwrap(), "--step", "100000"],
        dir.path(),
    );
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn schema_mismatch_is_a_structured_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"schema": "checkpoint/99", "x": 1}"#).unwrap();
    let out = oversight(
        &[
            "export",
            "--input",
            bad.to_str().unwrap(),
            "--output",
            dir.path().join("o.json").to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let doc = error_doc(&out);
    assert_eq!(doc["error"]["kind"], "schema_mismatch");
    assert!(doc["error"]["message"].as_str().unwrap().contains("checkpoint/99"));

    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"schema": "scenario/1"}"#).unwrap();
    let out = oversight(&["train", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_doc(&out)["error"]["kind"], "schema_mismatch");

    let out = oversight(
        &["eval", "--policy", dir.path().join("nope.json").to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(error_doc(&out)["error"]["message"]
        .as_str()
        .unwrap()
        .contains("unknown policy"));

    let out = oversight(&["train", "--frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_doc(&out)["error"]["kind"], "usage");
}

#[test]
fn export_round_trips_reports_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("eval");
    ok(&oversight(
        &[
            "eval",
            "--policy",
            "never",
            "--policy",
            "rule",
            "--episodes",
            "2",
            "--out",
            out_dir.to_str().unwrap(),
        ],
        dir.path(),
    ));
    let report = out_dir.join("report.json");
    let copy = dir.path().join("copy.json");
    ok(&oversight(
        &[
            "export",
            "--input",
            report.to_str().unwrap(),
            "--output",
            copy.to_str().unwrap(),
        ],
        dir.path(),
    ));
    let a: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let b: Value = serde_json::from_str(&std::fs::read_to_string(&copy).unwrap()).unwrap();
    assert_eq!(a, b);

    let csv = dir.path().join("report.csv");
    ok(&oversight(
        &[
            "export",
            "--input",
            report.to_str().unwrap(),
            "--output",
            csv.to_str().unwrap(),
            "--format",
            "csv",
        ],
        dir.path(),
    ));
    assert_eq!(
        std::fs::read_to_string(&csv).unwrap(),
        std::fs::read_to_string(out_dir.join("metrics.csv")).unwrap()
    );

    let trace = out_dir.join("traces/never/episode-000.jsonl");
    let trace_csv = dir.path().join("trace.csv");
    ok(&oversight(
        &[
            "export",
            "--input",
            trace.to_str().unwrap(),
            "--output",
            trace_csv.to_str().unwrap(),
            "--format",
            "csv",
        ],
        dir.path(),
    ));
    let text = std::fs::read_to_string(&trace_csv).unwrap();
    assert_eq!(text.lines().count(), 241);
}

struct Server {
    child: Child,
    addr: String,
}

impl Server {
    fn start(extra: &[&str], data: &Path) -> Server {
        let mut child = Command::new(env!("CARGO_BIN_EXE_oversight"))
            .args(["serve", "--addr", "127.0.0.1:0"])
            .args(extra)
            .env("OVERSIGHT_DATA_DIR", data)
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .unwrap();
        let addr = line
            .trim()
            .strip_prefix("listening on ")
            .expect("listen line")
            .to_string();
        Server { child, addr }
    }

    fn connect(&self) -> WebSocket<tungstenite::stream::MaybeTlsStream<TcpStream>> {
        tungstenite::connect(&self.addr).unwrap().0
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn send(ws: &mut WebSocket<impl std::io::Read + std::io::Write>, msg: &ClientMessage) {
    ws.send(Message::text(serde_json::to_string(msg).unwrap())).unwrap();
}

fn recv(ws: &mut WebSocket<impl std::io::Read + std::io::Write>) -> ServerMessage {
    loop {
        match ws.read().unwrap() {
            Message::Text(t) => return serde_json::from_str(&t).unwrap(),
            _ => continue,
        }
    }
}

fn expect_ack(ws: &mut WebSocket<impl std::io::Read + std::io::Write>) -> oversight_core::session::Ack {
    match recv(ws) {
        ServerMessage::Ack(a) => a,
        other => panic!("expected ack, got {other:?}"),
    }
}

fn default_env() -> OversightEnv {
    OversightEnv::new(
        ScenarioScript::default_scenario(),
        RewardConfig::default(),
        AttentionParams::default(),
    )
    .unwrap()
}

#[test]
fn simulated_session_matches_offline_rollout() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("sessions");
    let server = Server::start(
        &["--trace-dir", traces.to_str().unwrap(), "--max-sessions", "2"],
        dir.path(),
    );

    let mut ws = server.connect();
    send(
        &mut ws,
        &ClientMessage::Hello {
            mode: SessionMode::SimulatedUser,
            policy: Some("rule".into()),
            seed: Some(5),
        },
    );
    let ack = expect_ack(&mut ws);
    assert_eq!(ack.code, AckCode::Ok);
    let mut frames = Vec::new();
    let report = loop {
        match recv(&mut ws) {
            ServerMessage::Frame(f) => frames.push(f),
            ServerMessage::End { report } => break report,
            ServerMessage::Ack(a) => panic!("unexpected ack {a:?}"),
        }
    };
    let mut policy = RuleBasedPolicy::new(RulePolicyConfig::default()).unwrap();
    let offline = run_episode(&default_env(), &mut policy, 5).unwrap();
    assert_eq!(frames.len(), offline.records.len());
    for (f, r) in frames.iter().zip(&offline.records) {
        assert_eq!(f.att, r.s_att);
        assert_eq!(f.hlt, r.s_hlt.as_ints());
    }
    assert_eq!(report.ticks, 240);
    assert_eq!(report.score, offline.total_reward());
    assert_eq!(frames.last().unwrap().score, report.score);

    let stored: Vec<TraceRecord> = read_jsonl(&traces.join(format!("{}.jsonl", report.session_id))).unwrap();
    assert_eq!(stored, offline.records);

    // The stored trace can be played back as a replay session.
    let mut ws = server.connect();
    send(
        &mut ws,
        &ClientMessage::Hello {
            mode: SessionMode::Replay,
            policy: Some(format!("{}.jsonl", report.session_id)),
            seed: None,
        },
    );
    assert_eq!(expect_ack(&mut ws).code, AckCode::Ok);
    let mut replayed = Vec::new();
    let end = loop {
        match recv(&mut ws) {
            ServerMessage::Frame(f) => replayed.push(f),
            ServerMessage::End { report } => break report,
            ServerMessage::Ack(a) => panic!("unexpected ack {a:?}"),
        }
    };
    assert_eq!(replayed, frames);
    assert_eq!(end.score, report.score);
}

#[test]
fn human_session_applies_fixations() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("sessions");
    let server = Server::start(
        &[
            "--trace-dir",
            traces.to_str().unwrap(),
            "--tick-ms",
            "5",
            "--max-sessions",
            "2",
        ],
        dir.path(),
    );

    // A hello that names an unknown policy is rejected and the client may retry.
    let mut ws = server.connect();
    send(
        &mut ws,
        &ClientMessage::Hello {
            mode: SessionMode::HumanUser,
            policy: Some("clairvoyant".into()),
            seed: None,
        },
    );
    assert_eq!(expect_ack(&mut ws).code, AckCode::Rejected);
    send(
        &mut ws,
        &ClientMessage::Hello {
            mode: SessionMode::HumanUser,
            policy: Some("never".into()),
            seed: Some(2),
        },
    );
    assert_eq!(expect_ack(&mut ws).code, AckCode::Ok);

    let fixation = |dwell_ms| {
        ClientMessage::Fixation(FixationMessage {
            drone: 1,
            attr: "altitude".into(),
            dwell_ms,
        })
    };
    let mut frames = Vec::new();
    let mut acks = Vec::new();
    let report = loop {
        match recv(&mut ws) {
            ServerMessage::Frame(f) => {
                if f.tick == 10 {
                    send(&mut ws, &fixation(100));
                    send(&mut ws, &fixation(400));
                    send(
                        &mut ws,
                        &ClientMessage::Fixation(FixationMessage {
                            drone: 9,
                            attr: "altitude".into(),
                            dwell_ms: 400,
                        }),
                    );
                }
                frames.push(f);
            }
            ServerMessage::Ack(a) => acks.push(a.code),
            ServerMessage::End { report } => break report,
        }
    };
    assert_eq!(acks, [AckCode::BelowThreshold, AckCode::Ok, AckCode::UnknownPair]);
    assert_eq!(report.fixations_received, 1);
    assert_eq!(report.ticks, 240);

    let stored: Vec<TraceRecord> = read_jsonl(&traces.join(format!("{}.jsonl", report.session_id))).unwrap();
    let pair = Pair::new(DroneId::new(1).unwrap(), Attr::Altitude).index();
    let k = stored.iter().position(|r| !r.client_fixations.is_empty()).unwrap();
    assert!(k >= 10);
    assert_eq!(stored[k].client_fixations.len(), 1);
    // The belief took the value shown when the fixation arrived, then the world moved on.
    assert_eq!(stored[k].s_usr[pair], stored[k - 1].s_att[pair]);
    assert_ne!(stored[k].s_usr[pair], stored[k - 1].s_usr[pair]);
    let sum: f64 = stored.iter().map(|r| r.reward).sum();
    assert_eq!(report.score, sum);
    assert_eq!(frames.last().unwrap().score, sum);
    assert!(stored.iter().all(|r| r.fixation.is_none()));
}
