//! Session server: one environment per session, one reply per frame.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use autocab_core::agents::parse_action_plan;
use autocab_core::episode::{Action, EngineError, ModalityConfig, Recorder, TerminatedBy, TraceLine};
use autocab_core::task::{Suite, TaskError};
use thiserror::Error;

use crate::protocol::{ClientFrame, ErrorCode, Hello, ObsFrame, ServerFrame, PROTO_VERSION};
use crate::store::{wall_clock_now, StoreError, TraceStore, TraceWriter};
use crate::World;

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(300);

/// Monotonic time source; injected so tests can expire sessions.
pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
}

pub struct SystemClock(Instant);

impl SystemClock {
    pub fn new() -> Self {
        SystemClock(Instant::now())
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.0.elapsed()
    }
}

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub idle_timeout: Duration,
    /// How often an idle connection checks the clock.
    pub poll: Duration,
    pub store: Option<TraceStore>,
    pub stamp_wall_clock: bool,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig { idle_timeout: DEFAULT_IDLE_TIMEOUT, poll: Duration::from_millis(200), store: None, stamp_wall_clock: true }
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: String, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Summary of one finished session, for logs and tests.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionRecord {
    pub session_id: u64,
    pub template_id: String,
    pub seed: u64,
    pub reward: u8,
    pub steps: u32,
    pub terminated_by: TerminatedBy,
    pub trace_path: Option<PathBuf>,
}

pub struct Server {
    world: Arc<World>,
    config: ServerConfig,
    clock: Arc<dyn Clock>,
    next_id: AtomicU64,
}

struct Session {
    id: u64,
    rec: Recorder,
    writer: Option<TraceWriter>,
}

impl Server {
    pub fn new(world: Arc<World>, config: ServerConfig) -> Self {
        Self::with_clock(world, config, Arc::new(SystemClock::new()))
    }

    pub fn with_clock(world: Arc<World>, config: ServerConfig, clock: Arc<dyn Clock>) -> Self {
        Server { world, config, clock, next_id: AtomicU64::new(1) }
    }

    pub fn bind(addr: &str) -> Result<TcpListener, ServeError> {
        let addrs = addr.to_socket_addrs().map_err(|source| ServeError::BindFailure { addr: addr.to_string(), source })?;
        TcpListener::bind(addrs.collect::<Vec<_>>().as_slice())
            .map_err(|source| ServeError::BindFailure { addr: addr.to_string(), source })
    }

    /// Accepts connections until the listener fails; one thread each.
    pub fn serve_tcp(self: Arc<Self>, listener: TcpListener) -> Result<(), ServeError> {
        for stream in listener.incoming() {
            let stream = stream?;
            let server = Arc::clone(&self);
            thread::spawn(move || {
                let _ = server.serve_stream(stream);
            });
        }
        Ok(())
    }

    pub fn serve_stream(&self, stream: TcpStream) -> io::Result<Vec<SessionRecord>> {
        let reader = BufReader::new(stream.try_clone()?);
        let handle = stream.try_clone()?;
        let result = self.serve_connection(reader, stream);
        // the reader thread holds a clone; shutting down unblocks it
        let _ = handle.shutdown(std::net::Shutdown::Both);
        result
    }

    /// Runs the protocol over one connection until EOF or idle timeout.
    pub fn serve_connection<R, W>(&self, reader: R, mut out: W) -> io::Result<Vec<SessionRecord>>
    where
        R: BufRead + Send + 'static,
        W: Write,
    {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in reader.lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        writeln!(out, "{}", serde_json::to_string(&Hello { proto: PROTO_VERSION })?)?;
        out.flush()?;

        let mut session: Option<Session> = None;
        let mut finished = false;
        let mut records = Vec::new();
        let mut last_activity = self.clock.now();
        loop {
            match rx.recv_timeout(self.config.poll) {
                Ok(Ok(line)) => {
                    last_activity = self.clock.now();
                    if line.trim().is_empty() {
                        continue;
                    }
                    let reply = self.handle(&line, &mut session, &mut finished, &mut records);
                    writeln!(out, "{}", reply.to_line())?;
                    out.flush()?;
                }
                Ok(Err(e)) => {
                    self.close(&mut session, TerminatedBy::Aborted, "connection error", &mut records);
                    return Err(e);
                }
                Err(RecvTimeoutError::Timeout) => {
                    if self.clock.now().saturating_sub(last_activity) >= self.config.idle_timeout {
                        self.close(&mut session, TerminatedBy::Timeout, "idle timeout", &mut records);
                        let msg = format!("idle for {} s", self.config.idle_timeout.as_secs());
                        let _ = writeln!(out, "{}", ServerFrame::err(ErrorCode::Timeout, msg).to_line());
                        let _ = out.flush();
                        return Ok(records);
                    }
                }
                Err(RecvTimeoutError::Disconnected) => {
                    self.close(&mut session, TerminatedBy::Aborted, "client disconnected", &mut records);
                    return Ok(records);
                }
            }
        }
    }

    fn handle(
        &self,
        line: &str,
        session: &mut Option<Session>,
        finished: &mut bool,
        records: &mut Vec<SessionRecord>,
    ) -> ServerFrame {
        let frame: ClientFrame = match serde_json::from_str(line) {
            Ok(f) => f,
            Err(e) => return ServerFrame::err(ErrorCode::BadFrame, e.to_string()),
        };
        match frame {
            ClientFrame::Start { template_id, seed, region, modalities, max_steps } => {
                if session.is_some() {
                    return ServerFrame::err(ErrorCode::SessionActive, "end the current session first");
                }
                let config = match modalities.map(|m| m.config()).transpose() {
                    Ok(c) => c.unwrap_or_default(),
                    Err(e) => return ServerFrame::err(ErrorCode::BadModalities, e),
                };
                match self.start(&template_id, seed, region.as_deref(), config, max_steps) {
                    Ok(s) => {
                        let obs = ObsFrame::from_observation(s.rec.observation());
                        *session = Some(s);
                        *finished = false;
                        ServerFrame::Obs(Box::new(obs))
                    }
                    Err(f) => f,
                }
            }
            ClientFrame::Act { action, reasoning } => {
                let Some(s) = session.as_mut() else {
                    return if *finished {
                        ServerFrame::err(ErrorCode::SessionInactive, "episode is over")
                    } else {
                        ServerFrame::err(ErrorCode::NoSession, "send a start frame first")
                    };
                };
                let action = decode_action(&action);
                let step = s.rec.step(action, reasoning.unwrap_or_default(), &mut |_, _, _| None);
                let (record, res) = match step {
                    Ok(r) => r,
                    Err(EngineError::SessionInactive) => return ServerFrame::err(ErrorCode::SessionInactive, "episode is over"),
                    Err(e) => return ServerFrame::err(ErrorCode::Internal, e.to_string()),
                };
                if let Some(w) = s.writer.as_mut() {
                    let _ = w.write_line(&TraceLine::Step(record));
                }
                if res.done {
                    *finished = true;
                    self.close(session, TerminatedBy::MaxSteps, "", records)
                        .map(|r| ServerFrame::Done { reward: r.reward, steps: r.steps, terminated_by: r.terminated_by })
                        .unwrap_or_else(|| ServerFrame::err(ErrorCode::Internal, "session vanished"))
                } else {
                    ServerFrame::Obs(Box::new(ObsFrame::from_observation(&res.observation)))
                }
            }
            ClientFrame::End => match self.close(session, TerminatedBy::Aborted, "ended by client", records) {
                Some(r) => {
                    *finished = true;
                    ServerFrame::Done { reward: r.reward, steps: r.steps, terminated_by: r.terminated_by }
                }
                None => ServerFrame::err(ErrorCode::NoSession, "no session to end"),
            },
        }
    }

    fn start(
        &self,
        template_id: &str,
        seed: u64,
        region: Option<&str>,
        config: ModalityConfig,
        max_steps: Option<u32>,
    ) -> Result<Session, ServerFrame> {
        let w = &self.world;
        let tmpl = w
            .suite
            .template(template_id)
            .ok_or_else(|| ServerFrame::err(ErrorCode::UnknownTemplate, format!("no template `{template_id}`")))?;
        let profile = match region {
            Some(r) => w.kb.region(r).ok_or_else(|| ServerFrame::err(ErrorCode::UnknownRegion, format!("no region `{r}`")))?,
            None => Suite::region_for(tmpl, seed, &w.kb).map_err(task_err)?,
        };
        let inst = w.suite.instantiate(tmpl, seed, profile).map_err(task_err)?;
        let rec = Recorder::start("session", &inst, config, &w.kb, &w.layouts, max_steps).map_err(|e| match e {
            EngineError::Init(t) => task_err(t),
            other => ServerFrame::err(ErrorCode::Internal, other.to_string()),
        })?;
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let writer = match &self.config.store {
            Some(store) => {
                let name = Path::new("sessions").join(format!("{template_id}__s{seed}__{id}.jsonl"));
                let mut w = store.writer(&name).map_err(store_err)?;
                if self.config.stamp_wall_clock {
                    w = w.with_wall_clock(wall_clock_now());
                }
                w.write_line(&TraceLine::Header(rec.header().clone())).map_err(store_err)?;
                Some(w)
            }
            None => None,
        };
        Ok(Session { id, rec, writer })
    }

    /// Finishes the active session, if any, and commits its trace.
    fn close(
        &self,
        session: &mut Option<Session>,
        stop: TerminatedBy,
        detail: &str,
        records: &mut Vec<SessionRecord>,
    ) -> Option<SessionRecord> {
        let s = session.take()?;
        let early = !s.rec.is_done();
        let trace = s.rec.finish(early.then(|| (stop, detail.to_string())));
        let mut trace_path = None;
        if let Some(mut w) = s.writer {
            if w.write_line(&TraceLine::Outcome(trace.outcome.clone())).is_ok() {
                trace_path = w.commit().ok();
            }
        }
        let r = SessionRecord {
            session_id: s.id,
            template_id: trace.header.instance.template_id.clone(),
            seed: trace.header.seed,
            reward: trace.outcome.reward,
            steps: trace.outcome.steps_used,
            terminated_by: trace.outcome.terminated_by,
            trace_path,
        };
        records.push(r.clone());
        Some(r)
    }
}

fn task_err(e: TaskError) -> ServerFrame {
    let code = match e {
        TaskError::UnknownRegion(_) => ErrorCode::UnknownRegion,
        TaskError::GeoMismatch { .. } => ErrorCode::GeoMismatch,
        _ => ErrorCode::Internal,
    };
    ServerFrame::err(code, e.to_string())
}

fn store_err(e: StoreError) -> ServerFrame {
    ServerFrame::err(ErrorCode::Internal, e.to_string())
}

/// Strict action JSON first, then the lenient plan forms. Anything else is
/// an invalid action that still consumes a step.
pub fn decode_action(value: &serde_json::Value) -> Result<Action, String> {
    if let Ok(a) = serde_json::from_value::<Action>(value.clone()) {
        return Ok(a);
    }
    let text = value.to_string();
    match parse_action_plan(&text) {
        Ok(plan) => Ok(plan.action),
        Err(_) => Err(text),
    }
}
