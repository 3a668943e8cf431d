//! Episode server for out-of-process agents.
//!
//! Every connection speaks JSON messages `{type, session, payload}`. A raw
//! TCP client sends each message as a frame: a 4-byte big-endian length
//! followed by that many bytes of UTF-8 JSON. A connection that opens with
//! an HTTP `GET ` request is upgraded to a WebSocket and carries one
//! message per text frame. The full layout is in `docs/protocol.md`.
//!
//! Each connection runs on its own thread and owns its sessions, so the
//! only state shared between connections is the immutable task set and a
//! session counter.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use phyq_core::game::{Action, Episode, EpisodeOutcome, EpisodeResult};
use phyq_core::math::Vec2;
use phyq_core::perception::{symbolize, ScreenMap, SymbolicFrame};
use phyq_core::taskgen::TaskInstance;
use phyq_core::trajectory::{first_obstruction, predicted_path, solve_release};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::files::{observe, ObservationKind, TaskSet};

pub const PROTOCOL_VERSION: u32 = 1;
pub const MAX_FRAME_BYTES: usize = 16 << 20;
const POLL: Duration = Duration::from_millis(50);

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: io::Error },
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

/// One protocol message.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<u64>,
    #[serde(default)]
    pub payload: Value,
}

impl Envelope {
    pub fn new(kind: &str, session: Option<u64>, payload: Value) -> Envelope {
        Envelope { kind: kind.into(), session, payload }
    }

    pub fn error(session: Option<u64>, code: &str, message: impl Into<String>) -> Envelope {
        Envelope::new("Error", session, json!({ "code": code, "message": message.into() }))
    }

    pub fn is_error(&self) -> bool {
        self.kind == "Error"
    }

    pub fn error_code(&self) -> Option<&str> {
        self.is_error().then(|| self.payload.get("code").and_then(Value::as_str)).flatten()
    }
}

/// Writes one length-prefixed frame.
pub fn write_frame(w: &mut impl Write, body: &[u8]) -> io::Result<()> {
    let len = u32::try_from(body.len()).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(body)?;
    w.flush()
}

/// Reads one length-prefixed frame; `None` on a clean end of stream.
pub fn read_frame(r: &mut impl Read) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let n = u32::from_be_bytes(len) as usize;
    if n > MAX_FRAME_BYTES {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("frame of {n} bytes")));
    }
    let mut body = vec![0; n];
    r.read_exact(&mut body)?;
    Ok(Some(body))
}

struct Session {
    task: TaskInstance,
    episode: Episode,
    /// Simulated seconds per wall second; `None` runs unthrottled.
    speed: Option<f64>,
    actions: Vec<Action>,
}

impl Session {
    fn start(task: &TaskInstance) -> Result<Session, String> {
        let episode = Episode::new(&task.level).map_err(|e| e.to_string())?;
        Ok(Session { task: task.clone(), episode, speed: None, actions: Vec::new() })
    }

    fn summary(&self, id: u64) -> Value {
        json!({
            "session": id,
            "template_id": self.task.template_id,
            "index": self.task.index,
            "birds": self.episode.bird_queue().collect::<Vec<_>>(),
            "pigs": self.episode.pigs_left(),
            "anchor": self.episode.anchor(),
            "bounds": self.episode.bounds(),
        })
    }
}

struct Shared {
    tasks: TaskSet,
    max_sessions: usize,
    sessions: AtomicUsize,
    next_session: AtomicU64,
    shutdown: AtomicBool,
}

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub addr: String,
    pub max_sessions: usize,
}

/// Stops a running server. Requests already received are answered first.
#[derive(Clone)]
pub struct ShutdownHandle(Arc<Shared>);

impl ShutdownHandle {
    pub fn shutdown(&self) {
        self.0.shutdown.store(true, Ordering::SeqCst);
    }
}

pub struct Server {
    listener: TcpListener,
    shared: Arc<Shared>,
}

impl Server {
    pub fn bind(config: &ServerConfig, tasks: TaskSet) -> Result<Server, ServerError> {
        let bind_err = |source| ServerError::Bind { addr: config.addr.clone(), source };
        let addrs: Vec<SocketAddr> = config.addr.to_socket_addrs().map_err(bind_err)?.collect();
        let listener =
            TcpListener::bind(&addrs[..]).map_err(|source| ServerError::Bind { addr: config.addr.clone(), source })?;
        listener.set_nonblocking(true)?;
        let shared = Arc::new(Shared {
            tasks,
            max_sessions: config.max_sessions.max(1),
            sessions: AtomicUsize::new(0),
            next_session: AtomicU64::new(1),
            shutdown: AtomicBool::new(false),
        });
        Ok(Server { listener, shared })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn shutdown_handle(&self) -> ShutdownHandle {
        ShutdownHandle(self.shared.clone())
    }

    /// Accepts connections until shut down, then waits for every
    /// connection to finish its current request.
    pub fn run(self) -> Result<(), ServerError> {
        let mut workers: Vec<JoinHandle<()>> = Vec::new();
        while !self.shared.shutdown.load(Ordering::SeqCst) {
            match self.listener.accept() {
                Ok((stream, _)) => {
                    let shared = self.shared.clone();
                    workers.push(std::thread::spawn(move || {
                        let _ = serve_connection(stream, &shared);
                    }));
                    workers.retain(|w| !w.is_finished());
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(5)),
                Err(e) => return Err(e.into()),
            }
        }
        for w in workers {
            let _ = w.join();
        }
        Ok(())
    }

    /// Runs the server on a background thread.
    pub fn spawn(self) -> io::Result<RunningServer> {
        let addr = self.local_addr()?;
        let handle = self.shutdown_handle();
        let thread = std::thread::spawn(move || self.run());
        Ok(RunningServer { addr, handle, thread })
    }
}

pub struct RunningServer {
    pub addr: SocketAddr,
    handle: ShutdownHandle,
    thread: JoinHandle<Result<(), ServerError>>,
}

impl RunningServer {
    pub fn shutdown_handle(&self) -> ShutdownHandle {
        self.handle.clone()
    }

    pub fn stop(self) -> Result<(), ServerError> {
        self.handle.shutdown();
        self.thread.join().unwrap_or(Ok(()))
    }
}

/// Whether an I/O error is a read timeout rather than a failure.
fn is_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut)
}

/// Reads exactly `buf.len()` bytes. Returns `false` if the stream ended or
/// the server is shutting down before the first byte arrived.
fn read_polling(stream: &mut TcpStream, buf: &mut [u8], shared: &Shared) -> io::Result<bool> {
    let mut got = 0;
    while got < buf.len() {
        match stream.read(&mut buf[got..]) {
            Ok(0) if got == 0 => return Ok(false),
            Ok(0) => return Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(n) => got += n,
            Err(e) if is_timeout(&e) => {
                if got == 0 && shared.shutdown.load(Ordering::SeqCst) {
                    return Ok(false);
                }
            }
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

fn serve_connection(stream: TcpStream, shared: &Shared) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(POLL))?;
    let mut conn = Connection { shared, sessions: BTreeMap::new() };
    let mut head = [0u8; 4];
    let peeked = loop {
        match stream.peek(&mut head) {
            Ok(n) => break n,
            Err(e) if is_timeout(&e) => {
                if shared.shutdown.load(Ordering::SeqCst) {
                    return Ok(());
                }
            }
            Err(e) => return Err(e),
        }
    };
    let result = if peeked == 4 && &head == b"GET " { conn.serve_websocket(stream) } else { conn.serve_framed(stream) };
    conn.close_all();
    result
}

struct Connection<'a> {
    shared: &'a Shared,
    sessions: BTreeMap<u64, Session>,
}

impl Connection<'_> {
    fn close_all(&mut self) {
        let n = self.sessions.len();
        self.sessions.clear();
        self.shared.sessions.fetch_sub(n, Ordering::SeqCst);
    }

    fn serve_framed(&mut self, mut stream: TcpStream) -> io::Result<()> {
        loop {
            let mut len = [0u8; 4];
            if !read_polling(&mut stream, &mut len, self.shared)? {
                return Ok(());
            }
            let n = u32::from_be_bytes(len) as usize;
            if n > MAX_FRAME_BYTES {
                // The stream cannot be resynchronised after an oversized frame.
                let e =
                    Envelope::error(None, "frame_too_large", format!("frame of {n} bytes exceeds {MAX_FRAME_BYTES}"));
                write_frame(&mut stream, &serde_json::to_vec(&e).unwrap_or_default())?;
                return Ok(());
            }
            let mut body = vec![0; n];
            if !read_polling(&mut stream, &mut body, self.shared)? && n > 0 {
                return Ok(());
            }
            let reply = self.handle_bytes(&body);
            write_frame(&mut stream, &serde_json::to_vec(&reply).unwrap_or_default())?;
        }
    }

    fn serve_websocket(&mut self, stream: TcpStream) -> io::Result<()> {
        use tungstenite::{Error as WsError, Message};
        stream.set_read_timeout(None)?;
        let mut ws = tungstenite::accept(stream).map_err(|e| io::Error::other(e.to_string()))?;
        ws.get_mut().set_read_timeout(Some(POLL))?;
        loop {
            let msg = match ws.read() {
                Ok(m) => m,
                Err(WsError::Io(e)) if is_timeout(&e) => {
                    if self.shared.shutdown.load(Ordering::SeqCst) {
                        let _ = ws.close(None);
                        let _ = ws.flush();
                        return Ok(());
                    }
                    continue;
                }
                Err(WsError::ConnectionClosed | WsError::AlreadyClosed) => return Ok(()),
                Err(e) => return Err(io::Error::other(e.to_string())),
            };
            let reply = match msg {
                Message::Text(t) => self.handle_bytes(t.as_bytes()),
                Message::Binary(b) => self.handle_bytes(&b),
                Message::Close(_) => return Ok(()),
                _ => continue,
            };
            let text = serde_json::to_string(&reply).unwrap_or_default();
            ws.send(Message::text(text)).map_err(|e| io::Error::other(e.to_string()))?;
        }
    }

    fn handle_bytes(&mut self, body: &[u8]) -> Envelope {
        match serde_json::from_slice::<Envelope>(body) {
            Ok(req) => self.handle(&req),
            Err(e) => Envelope::error(None, "malformed", e.to_string()),
        }
    }

    /// Answers one request. Every request gets exactly one response.
    pub fn handle(&mut self, req: &Envelope) -> Envelope {
        let s = req.session;
        let result = match req.kind.as_str() {
            "Hello" => self.hello(&req.payload),
            "ListTasks" => Ok(self.list_tasks(&req.payload)),
            "LoadTask" => return self.load_task(s, &req.payload),
            "GetObservation" => self.get_observation(s, &req.payload),
            "PlanTrajectory" => self.plan(s, &req.payload),
            "Act" => return self.act(s, &req.payload),
            "SetSpeed" => self.set_speed(s, &req.payload),
            "Reset" => self.reset(s),
            other => Err(("unknown_type", format!("unknown message type {other:?}"))),
        };
        match result {
            Ok(payload) => Envelope::new(&req.kind, s, payload),
            Err((code, msg)) => Envelope::error(s, code, msg),
        }
    }

    fn session(&mut self, s: Option<u64>) -> Result<&mut Session, (&'static str, String)> {
        let id = s.ok_or(("no_session", "request needs a session".to_string()))?;
        self.sessions.get_mut(&id).ok_or(("no_session", format!("no session {id} on this connection")))
    }

    fn hello(&self, p: &Value) -> Reply {
        let offered: Vec<u32> = match p.get("versions").or(p.get("version")) {
            Some(Value::Array(v)) => v.iter().filter_map(|x| x.as_u64()).map(|x| x as u32).collect(),
            Some(v) => v.as_u64().map(|x| vec![x as u32]).unwrap_or_default(),
            None => vec![PROTOCOL_VERSION],
        };
        if !offered.contains(&PROTOCOL_VERSION) {
            return Err(("version", format!("server speaks version {PROTOCOL_VERSION}, client offered {offered:?}")));
        }
        Ok(json!({
            "version": PROTOCOL_VERSION,
            "server": "phyq",
            "observation_kinds": ["image", "symbolic", "tensor"],
            "max_sessions": self.shared.max_sessions,
        }))
    }

    fn list_tasks(&self, p: &Value) -> Value {
        let filter = p.get("template_id").and_then(Value::as_str);
        let tasks: Vec<Value> = self
            .shared
            .tasks
            .tasks
            .iter()
            .filter(|t| filter.is_none_or(|f| f == t.template_id))
            .map(|t| json!({ "template_id": t.template_id, "index": t.index, "seed": t.seed }))
            .collect();
        json!({ "tasks": tasks })
    }

    fn load_task(&mut self, s: Option<u64>, p: &Value) -> Envelope {
        #[derive(Deserialize)]
        struct Load {
            template_id: String,
            index: u32,
        }
        let load: Load = match serde_json::from_value(p.clone()) {
            Ok(l) => l,
            Err(e) => return Envelope::error(s, "bad_request", e.to_string()),
        };
        let Some(task) = self.shared.tasks.get(&load.template_id, load.index) else {
            return Envelope::error(s, "unknown_task", format!("no task {} #{}", load.template_id, load.index));
        };
        let session = match Session::start(task) {
            Ok(x) => x,
            Err(e) => return Envelope::error(s, "bad_task", e),
        };
        let id = match s {
            Some(id) if self.sessions.contains_key(&id) => id,
            Some(id) => return Envelope::error(s, "no_session", format!("no session {id} on this connection")),
            None => {
                let prev = self.shared.sessions.fetch_add(1, Ordering::SeqCst);
                if prev >= self.shared.max_sessions {
                    self.shared.sessions.fetch_sub(1, Ordering::SeqCst);
                    return Envelope::error(
                        None,
                        "session_limit",
                        format!("{} sessions open", self.shared.max_sessions),
                    );
                }
                self.shared.next_session.fetch_add(1, Ordering::SeqCst)
            }
        };
        let speed = self.sessions.get(&id).and_then(|x| x.speed);
        let session = Session { speed, ..session };
        let payload = session.summary(id);
        self.sessions.insert(id, session);
        Envelope::new("LoadTask", Some(id), payload)
    }

    fn get_observation(&mut self, s: Option<u64>, p: &Value) -> Reply {
        let kind: ObservationKind = serde_json::from_value(p.get("kind").cloned().unwrap_or(json!("symbolic")))
            .map_err(|e| ("bad_request", e.to_string()))?;
        let session = self.session(s)?;
        let frame = observe(session.episode.world(), &ScreenMap::new(&session.episode.bounds()), kind)
            .map_err(|e| ("internal", e.to_string()))?;
        serde_json::to_value(frame).map_err(|e| ("internal", e.to_string()))
    }

    fn plan(&mut self, s: Option<u64>, p: &Value) -> Reply {
        let session = self.session(s)?;
        let ep = &session.episode;
        let world = ep.world();
        if let Some(r) = p.get("release") {
            let release: Vec2 = serde_json::from_value(r.clone()).map_err(|e| ("bad_request", e.to_string()))?;
            let v = phyq_core::game::release_to_velocity(release).map_err(|e| ("invalid_action", e.to_string()))?;
            let path = predicted_path(ep.anchor(), v, world.gravity(), &ep.bounds(), world.dt());
            return Ok(json!({ "velocity": v, "path": path }));
        }
        let target: Vec2 = serde_json::from_value(p.get("target").cloned().unwrap_or(Value::Null))
            .map_err(|_| ("bad_request", "PlanTrajectory needs a target or a release".to_string()))?;
        let speed = p.get("speed").and_then(Value::as_f64).unwrap_or(phyq_core::game::V_MAX);
        let radius = ep.next_bird().map(|b| b.radius()).unwrap_or(0.45);
        let mut arcs = solve_release(ep.anchor(), target, speed, world.gravity(), &ep.bounds(), world.dt())
            .map_err(|e| ("unreachable", e.to_string()))?;
        for arc in &mut arcs {
            arc.first_obstruction = first_obstruction(ep.anchor(), arc, world, radius, &ep.bounds());
        }
        Ok(json!({ "arcs": arcs }))
    }

    fn act(&mut self, s: Option<u64>, p: &Value) -> Envelope {
        #[derive(Deserialize)]
        struct Act {
            release: Vec2,
            #[serde(default)]
            tap_fraction: Option<f64>,
            #[serde(default)]
            observe: Vec<ObservationKind>,
            /// Sample rate of in-flight symbolic frames, in simulated Hz.
            #[serde(default)]
            frames_hz: Option<f64>,
        }
        let act: Act = match serde_json::from_value(p.clone()) {
            Ok(a) => a,
            Err(e) => return Envelope::error(s, "bad_request", e.to_string()),
        };
        let session = match self.session(s) {
            Ok(x) => x,
            Err((c, m)) => return Envelope::error(s, c, m),
        };
        if session.episode.result() != EpisodeResult::Ongoing {
            return Envelope::error(s, "episode_over", "the episode has ended; send Reset or LoadTask");
        }
        let action = Action { release: act.release, tap_fraction: act.tap_fraction };
        let t0 = Instant::now();
        let dt = session.episode.world().dt();
        let map = ScreenMap::new(&session.episode.bounds());
        let every = act.frames_hz.filter(|hz| *hz > 0.0).map(|hz| ((1.0 / (hz * dt)).round() as u64).max(1));
        let mut flight: Vec<SymbolicFrame> = Vec::new();
        let shot = session.episode.launch_observed(action, |w| {
            if let Some(k) = every {
                if w.tick() % k == 0 {
                    flight.push(symbolize(w, &map));
                }
            }
        });
        let shot = match shot {
            Ok(r) => r.clone(),
            Err(e) => return Envelope::error(s, "invalid_action", e.to_string()),
        };
        session.actions.push(action);
        if let Some(k) = session.speed {
            let wall = Duration::from_secs_f64(shot.ticks as f64 * dt / k);
            if let Some(rest) = wall.checked_sub(t0.elapsed()) {
                std::thread::sleep(rest);
            }
        }
        let ep = &session.episode;
        let result = ep.result();
        let mut observations = Vec::new();
        for kind in act.observe {
            match observe(ep.world(), &map, kind) {
                Ok(f) => observations.push(f),
                Err(e) => return Envelope::error(s, "internal", e.to_string()),
            }
        }
        let mut payload = json!({
            "pigs_destroyed": shot.pigs_destroyed,
            "pigs_left": ep.pigs_left(),
            "birds_left": ep.birds_left(),
            "result": result,
            "ticks": shot.ticks,
            "simulated_seconds": shot.ticks as f64 * dt,
            "timed_out": shot.timed_out,
            "observations": observations,
        });
        if every.is_some() {
            payload["flight_frames"] = json!(flight);
        }
        if result == EpisodeResult::Ongoing {
            return Envelope::new("StepResult", s, payload);
        }
        let mut outcome: EpisodeOutcome = ep.outcome().clone();
        outcome.passed = result == EpisodeResult::Passed;
        payload["outcome"] = json!(outcome);
        payload["transcript"] = json!({
            "template_id": session.task.template_id,
            "index": session.task.index,
            "seed": session.task.seed,
            "actions": session.actions,
        });
        Envelope::new("EpisodeEnd", s, payload)
    }

    fn set_speed(&mut self, s: Option<u64>, p: &Value) -> Reply {
        let speed = match p.get("multiplier") {
            None | Some(Value::Null) => None,
            Some(v) => match v.as_f64() {
                Some(k) if k > 0.0 && k.is_finite() => Some(k),
                _ => return Err(("bad_request", "multiplier must be a positive number or null".into())),
            },
        };
        self.session(s)?.speed = speed;
        Ok(json!({ "multiplier": speed }))
    }

    fn reset(&mut self, s: Option<u64>) -> Reply {
        let id = s.unwrap_or_default();
        let session = self.session(s)?;
        let fresh = Session::start(&session.task).map_err(|e| ("bad_task", e))?;
        session.episode = fresh.episode;
        session.actions.clear();
        Ok(session.summary(id))
    }
}

type Reply = Result<Value, (&'static str, String)>;

/// Blocking client over the framed transport.
pub struct Client {
    stream: TcpStream,
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Client> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Client { stream })
    }

    /// Sends raw bytes as one frame and reads the reply.
    pub fn request_raw(&mut self, body: &[u8]) -> io::Result<Envelope> {
        write_frame(&mut self.stream, body)?;
        let reply = read_frame(&mut self.stream)?.ok_or_else(|| io::Error::from(io::ErrorKind::UnexpectedEof))?;
        serde_json::from_slice(&reply).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    pub fn request(&mut self, kind: &str, session: Option<u64>, payload: Value) -> io::Result<Envelope> {
        let body = serde_json::to_vec(&Envelope::new(kind, session, payload))?;
        self.request_raw(&body)
    }
}
