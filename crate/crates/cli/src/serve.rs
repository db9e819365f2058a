use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use clap::Args;
use oversight_core::eval::{read_jsonl, TraceRecord, TraceWriter};
use oversight_core::session::{Ack, AckCode, ClientMessage, ServerMessage, Session, SessionMode};
use oversight_core::{OversightEnv, PolicyCheckpoint};
use tungstenite::{Message, WebSocket};

use crate::policy::PolicySpec;
use crate::setup::{data_dir, EnvArgs};

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Listen address; port 0 picks a free port.
    #[arg(long, default_value = "127.0.0.1:8765")]
    pub addr: String,
    #[command(flatten)]
    pub env: EnvArgs,
    /// Checkpoint offered to clients as policy `learned`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = oversight_core::session::DEFAULT_DWELL_THRESHOLD_MS)]
    pub dwell_threshold_ms: u64,
    /// Wall-clock tick period for human sessions [default: the simulation dt].
    #[arg(long)]
    pub tick_ms: Option<u64>,
    /// Where session traces are written and replay traces are looked up
    /// [default: $OVERSIGHT_DATA_DIR/sessions].
    #[arg(long)]
    pub trace_dir: Option<PathBuf>,
    /// Exit after this many sessions have finished.
    #[arg(long)]
    pub max_sessions: Option<usize>,
}

struct Service {
    env: OversightEnv,
    checkpoint: Option<PolicyCheckpoint>,
    dwell_threshold_ms: u64,
    tick: Duration,
    trace_dir: PathBuf,
}

impl Service {
    fn policy(&self, name: Option<&str>) -> anyhow::Result<PolicySpec> {
        match name {
            None if self.checkpoint.is_some() => self.policy(Some("learned")),
            None => Ok(PolicySpec::Rule(Default::default())),
            Some("learned") => match &self.checkpoint {
                Some(c) => Ok(PolicySpec::Learned {
                    label: "learned".into(),
                    checkpoint: Box::new(c.clone()),
                    stochastic: false,
                }),
                None => bail!("no checkpoint loaded; start the server with --checkpoint"),
            },
            Some(n @ ("never" | "always" | "rule" | "rule_based")) => PolicySpec::parse(n, false),
            Some(n) if n.starts_with("rule:") => PolicySpec::parse(n, false),
            Some(n) => bail!("unknown policy `{n}`"),
        }
    }

    /// Resolve a replay trace name inside the trace directory.
    fn replay_path(&self, name: &str) -> anyhow::Result<PathBuf> {
        let file = Path::new(name);
        if file.components().count() != 1 || file.file_name().is_none() {
            bail!("replay trace must be a plain file name, got `{name}`");
        }
        Ok(self.trace_dir.join(file))
    }

    fn open(&self, id: &str, mode: SessionMode, policy: Option<&str>, seed: u64) -> anyhow::Result<Session> {
        let mut session = match mode {
            SessionMode::Replay => {
                let name = policy.context("replay sessions name a trace file in `policy`")?;
                let records: Vec<TraceRecord> = read_jsonl(&self.replay_path(name)?)?;
                if records.is_empty() {
                    bail!("trace `{name}` is empty");
                }
                Session::replay(id, records)
            }
            _ => {
                let spec = self.policy(policy)?;
                let writer = TraceWriter::create(&self.trace_dir.join(format!("{id}.jsonl")))?;
                Session::new(id, mode, self.env.clone(), spec.build(), seed)?.with_trace_writer(writer)
            }
        };
        session.dwell_threshold_ms = self.dwell_threshold_ms;
        Ok(session)
    }
}

fn is_timeout(err: &tungstenite::Error) -> bool {
    matches!(err, tungstenite::Error::Io(e) if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut))
}

fn send(ws: &mut WebSocket<TcpStream>, msg: &ServerMessage) -> anyhow::Result<()> {
    ws.send(Message::text(msg.to_json()))?;
    Ok(())
}

fn reject(ws: &mut WebSocket<TcpStream>, detail: impl Into<String>) -> anyhow::Result<()> {
    send(ws, &ServerMessage::Ack(Ack::with_detail(AckCode::Rejected, detail)))
}

/// Wait for the client's hello and open its session.
fn handshake(ws: &mut WebSocket<TcpStream>, service: &Service, id: &str) -> anyhow::Result<Option<Session>> {
    loop {
        match ws.read() {
            Ok(Message::Text(text)) => match serde_json::from_str::<ClientMessage>(&text) {
                Ok(ClientMessage::Hello { mode, policy, seed }) => {
                    match service.open(id, mode, policy.as_deref(), seed.unwrap_or(0)) {
                        Ok(s) => {
                            send(
                                ws,
                                &ServerMessage::Ack(Ack::with_detail(AckCode::Ok, format!("session {id}"))),
                            )?;
                            return Ok(Some(s));
                        }
                        Err(e) => reject(ws, format!("{e:#}"))?,
                    }
                }
                Ok(_) => reject(ws, "expected hello")?,
                Err(e) => reject(ws, format!("bad message: {e}"))?,
            },
            Ok(Message::Close(_)) => return Ok(None),
            Ok(_) => {}
            Err(e) if is_timeout(&e) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(None),
            Err(e) => return Err(e.into()),
        }
    }
}

fn handle(ws: &mut WebSocket<TcpStream>, session: &mut Session, text: &str) -> anyhow::Result<()> {
    let ack = match serde_json::from_str::<ClientMessage>(text) {
        Ok(ClientMessage::Fixation(f)) => session.handle_fixation(&f),
        Ok(ClientMessage::Pause) => session.pause(),
        Ok(ClientMessage::Resume) => session.resume(),
        Ok(ClientMessage::Hello { .. }) => Ack::with_detail(AckCode::Rejected, "session already started"),
        Err(e) => Ack::with_detail(AckCode::Rejected, format!("bad message: {e}")),
    };
    send(ws, &ServerMessage::Ack(ack))
}

fn run_connection(stream: TcpStream, service: &Service, id: &str) -> anyhow::Result<()> {
    stream.set_nodelay(true)?;
    let mut ws = tungstenite::accept(stream).map_err(|e| anyhow::anyhow!("websocket handshake: {e}"))?;
    let Some(mut session) = handshake(&mut ws, service, id)? else {
        return Ok(());
    };
    let period = match session.mode {
        SessionMode::HumanUser => service.tick,
        _ => Duration::ZERO,
    };
    ws.get_ref().set_read_timeout(Some(Duration::from_millis(2)))?;
    let mut next_tick = Instant::now() + period;
    loop {
        loop {
            match ws.read() {
                Ok(Message::Text(text)) => handle(&mut ws, &mut session, &text)?,
                Ok(Message::Close(_)) => return Ok(()),
                Ok(_) => {}
                Err(e) if is_timeout(&e) => break,
                Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
                Err(e) => return Err(e.into()),
            }
        }
        if session.is_closed() {
            send(
                &mut ws,
                &ServerMessage::End {
                    report: session.summary(),
                },
            )?;
            ws.close(None)?;
            // Let the close handshake finish.
            while ws.read().is_ok() {}
            return Ok(());
        }
        let now = Instant::now();
        if session.is_paused() {
            next_tick = now + period;
        } else if now >= next_tick {
            let frame = session.session_step()?;
            send(&mut ws, &ServerMessage::Frame(frame))?;
            next_tick += period;
        }
    }
}

pub fn run(args: ServeArgs) -> anyhow::Result<()> {
    let env = args.env.build()?;
    let checkpoint = args.checkpoint.as_deref().map(PolicyCheckpoint::load).transpose()?;
    if let Some(c) = &checkpoint {
        c.check_obs_dim(oversight_core::env::OBS_DIM)?;
    }
    let tick = Duration::from_millis(args.tick_ms.unwrap_or((env.dt * 1000.0).round() as u64));
    let trace_dir = args.trace_dir.clone().unwrap_or_else(|| data_dir().join("sessions"));
    std::fs::create_dir_all(&trace_dir).with_context(|| format!("creating {}", trace_dir.display()))?;
    let service = Arc::new(Service {
        env,
        checkpoint,
        dwell_threshold_ms: args.dwell_threshold_ms,
        tick,
        trace_dir,
    });
    let listener = TcpListener::bind(&args.addr).with_context(|| format!("binding {}", args.addr))?;
    println!("listening on ws://{}", listener.local_addr()?);
    let mut handles = Vec::new();
    for (n, stream) in listener.incoming().enumerate() {
        let stream = stream?;
        let service = Arc::clone(&service);
        let id = format!("session-{n:04}");
        handles.push(thread::spawn(move || {
            if let Err(e) = run_connection(stream, &service, &id) {
                eprintln!("{id}: {e:#}");
            }
        }));
        if args.max_sessions.is_some_and(|m| n + 1 >= m) {
            break;
        }
    }
    for h in handles {
        let _ = h.join();
    }
    Ok(())
}
