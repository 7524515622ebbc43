//! Live telemetry service.
//!
//! One simulation thread owns all vessel state. TCP and WebSocket (`/link`)
//! connections each get a reader and a writer; readers push raw lines into a
//! single ordered queue, the simulation thread pushes encoded lines back out
//! through per-connection channels. Both transports carry identical
//! newline-terminated protocol lines.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use tungstenite::handshake::server::{ErrorResponse, Request, Response};
use tungstenite::{Message, WebSocket};
use waveshot_core::telemetry::{decode, encode, Payload, TelemetryMessage};

use crate::metrics::{self, MetricsReport};
use crate::scenario::Scenario;
use crate::simulation::{SimError, Simulation};
use crate::trace::{TraceHeader, TraceRecord};

pub const DEFAULT_TCP_PORT: u16 = 14550;
pub const DEFAULT_WS_PORT: u16 = 8080;
pub const WS_PATH: &str = "/link";

/// Longest accepted inbound line; longer lines are discarded.
const MAX_LINE_BYTES: usize = 1 << 16;
const POLL: Duration = Duration::from_millis(20);

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub tcp: SocketAddr,
    pub ws: SocketAddr,
    /// Simulated seconds per wall-clock second.
    pub speed: f64,
    /// Stop on its own once the scenario duration has elapsed.
    pub stop_at_end: bool,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self {
            tcp: SocketAddr::from(([127, 0, 0, 1], DEFAULT_TCP_PORT)),
            ws: SocketAddr::from(([127, 0, 0, 1], DEFAULT_WS_PORT)),
            speed: 1.0,
            stop_at_end: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        source: std::io::Error,
    },
    #[error("speed multiplier must be finite and > 0, got {0}")]
    Speed(f64),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("simulation thread panicked")]
    Panicked,
}

/// What a session leaves behind.
#[derive(Debug, Clone)]
pub struct ServeSummary {
    pub header: TraceHeader,
    pub rows: Vec<TraceRecord>,
    pub metrics: MetricsReport,
}

enum Inbound {
    Connect { id: u64, tx: Sender<String> },
    Line { id: u64, bytes: Vec<u8> },
    Disconnect { id: u64 },
}

pub struct ServerHandle {
    tcp_addr: SocketAddr,
    ws_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    sim: JoinHandle<Result<ServeSummary, ServeError>>,
    listeners: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn tcp_addr(&self) -> SocketAddr {
        self.tcp_addr
    }

    pub fn ws_addr(&self) -> SocketAddr {
        self.ws_addr
    }

    /// Setting this flag ends the session.
    pub fn stop_flag(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.stop)
    }

    /// Blocks until the session ends (stop flag or scenario end).
    pub fn wait(self) -> Result<ServeSummary, ServeError> {
        let result = self.sim.join().map_err(|_| ServeError::Panicked);
        self.stop.store(true, Ordering::SeqCst);
        for l in self.listeners {
            let _ = l.join();
        }
        result?
    }

    pub fn shutdown(self) -> Result<ServeSummary, ServeError> {
        self.stop.store(true, Ordering::SeqCst);
        self.wait()
    }
}

fn bind(addr: SocketAddr) -> Result<TcpListener, ServeError> {
    let l = TcpListener::bind(addr).map_err(|source| ServeError::Bind { addr, source })?;
    l.set_nonblocking(true).map_err(|source| ServeError::Bind { addr, source })?;
    Ok(l)
}

/// Starts the service; returns once both listeners are bound.
pub fn serve(scenario: &Scenario, opts: &ServeOptions) -> Result<ServerHandle, ServeError> {
    if !(opts.speed.is_finite() && opts.speed > 0.0) {
        return Err(ServeError::Speed(opts.speed));
    }
    let tcp = bind(opts.tcp)?;
    let ws = bind(opts.ws)?;
    let tcp_addr = tcp.local_addr().map_err(|source| ServeError::Bind { addr: opts.tcp, source })?;
    let ws_addr = ws.local_addr().map_err(|source| ServeError::Bind { addr: opts.ws, source })?;

    let stop = Arc::new(AtomicBool::new(false));
    let ids = Arc::new(AtomicU64::new(1));
    let (in_tx, in_rx) = mpsc::channel();

    let listeners = vec![
        spawn_listener(tcp, Arc::clone(&stop), Arc::clone(&ids), in_tx.clone(), handle_tcp),
        spawn_listener(ws, Arc::clone(&stop), Arc::clone(&ids), in_tx, handle_ws),
    ];
    let sim_stop = Arc::clone(&stop);
    let scenario = scenario.clone();
    let speed = opts.speed;
    let stop_at_end = opts.stop_at_end;
    let sim = thread::Builder::new()
        .name("sim".into())
        .spawn(move || sim_loop(&scenario, speed, stop_at_end, &sim_stop, &in_rx))
        .expect("spawning the simulation thread");
    info!("telemetry on tcp://{tcp_addr} and ws://{ws_addr}{WS_PATH}");
    Ok(ServerHandle {
        tcp_addr,
        ws_addr,
        stop,
        sim,
        listeners,
    })
}

type ConnHandler = fn(TcpStream, u64, Arc<AtomicBool>, Sender<Inbound>);

fn spawn_listener(
    listener: TcpListener,
    stop: Arc<AtomicBool>,
    ids: Arc<AtomicU64>,
    inbound: Sender<Inbound>,
    handler: ConnHandler,
) -> JoinHandle<()> {
    thread::spawn(move || {
        while !stop.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, peer)) => {
                    let id = ids.fetch_add(1, Ordering::SeqCst);
                    debug!("client {id} from {peer}");
                    if stream.set_nonblocking(false).is_err() {
                        continue;
                    }
                    let (stop, inbound) = (Arc::clone(&stop), inbound.clone());
                    thread::spawn(move || handler(stream, id, stop, inbound));
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
                Err(e) => {
                    warn!("accept failed: {e}");
                    thread::sleep(POLL);
                }
            }
        }
    })
}

fn is_timeout(e: &std::io::Error) -> bool {
    matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut)
}

fn handle_tcp(stream: TcpStream, id: u64, stop: Arc<AtomicBool>, inbound: Sender<Inbound>) {
    let Ok(write_half) = stream.try_clone() else { return };
    if stream.set_read_timeout(Some(POLL * 5)).is_err() {
        return;
    }
    let (tx, rx) = mpsc::channel::<String>();
    if inbound.send(Inbound::Connect { id, tx }).is_err() {
        return;
    }
    let writer = thread::spawn(move || {
        let mut w = write_half;
        for line in rx {
            if w.write_all(line.as_bytes()).is_err() {
                break;
            }
        }
        let _ = w.shutdown(std::net::Shutdown::Both);
    });

    let mut reader = BufReader::new(stream);
    let mut buf = Vec::new();
    let mut discarding = false;
    while !stop.load(Ordering::SeqCst) {
        match reader.read_until(b'\n', &mut buf) {
            Ok(0) => break,
            Ok(_) if buf.ends_with(b"\n") => {
                if discarding {
                    discarding = false;
                } else if inbound.send(Inbound::Line { id, bytes: std::mem::take(&mut buf) }).is_err() {
                    break;
                }
                buf.clear();
            }
            Ok(_) => break,
            Err(e) if is_timeout(&e) => {}
            Err(_) => break,
        }
        if buf.len() > MAX_LINE_BYTES {
            warn!("client {id}: line longer than {MAX_LINE_BYTES} bytes discarded");
            buf.clear();
            discarding = true;
        }
    }
    let _ = inbound.send(Inbound::Disconnect { id });
    let _ = writer.join();
}

fn handle_ws(stream: TcpStream, id: u64, stop: Arc<AtomicBool>, inbound: Sender<Inbound>) {
    // The handshake callback signature is fixed by tungstenite.
    #[allow(clippy::result_large_err)]
    let check_path = |req: &Request, resp: Response| -> Result<Response, ErrorResponse> {
        if req.uri().path() == WS_PATH {
            Ok(resp)
        } else {
            let mut err = ErrorResponse::new(Some(format!("no endpoint at {}; use {WS_PATH}\n", req.uri().path())));
            *err.status_mut() = tungstenite::http::StatusCode::NOT_FOUND;
            Err(err)
        }
    };
    let _ = stream.set_read_timeout(Some(Duration::from_secs(5)));
    let mut ws: WebSocket<TcpStream> = match tungstenite::accept_hdr(stream, check_path) {
        Ok(ws) => ws,
        Err(e) => {
            debug!("client {id}: websocket handshake failed: {e}");
            return;
        }
    };
    if ws.get_ref().set_read_timeout(Some(POLL)).is_err() {
        return;
    }
    let (tx, rx) = mpsc::channel::<String>();
    if inbound.send(Inbound::Connect { id, tx }).is_err() {
        return;
    }
    'session: while !stop.load(Ordering::SeqCst) {
        match ws.read() {
            Ok(Message::Text(t)) => {
                for line in t.as_str().split_inclusive('\n') {
                    if inbound.send(Inbound::Line { id, bytes: line.as_bytes().to_vec() }).is_err() {
                        break 'session;
                    }
                }
            }
            Ok(Message::Binary(b)) => {
                for line in b.split_inclusive(|&c| c == b'\n') {
                    if inbound.send(Inbound::Line { id, bytes: line.to_vec() }).is_err() {
                        break 'session;
                    }
                }
            }
            Ok(Message::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if is_timeout(&e) => {}
            Err(_) => break,
        }
        loop {
            match rx.try_recv() {
                Ok(line) => {
                    if ws.send(Message::text(line)).is_err() {
                        break 'session;
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => break 'session,
            }
        }
    }
    let _ = ws.close(None);
    let _ = ws.flush();
    let _ = inbound.send(Inbound::Disconnect { id });
}

/// Connection bookkeeping and the single-authority rule.
struct Clients {
    out: BTreeMap<u64, Sender<String>>,
    authority: Option<u64>,
    seq: u64,
}

impl Clients {
    fn send_to(&mut self, id: u64, payload: Payload) {
        self.seq += 1;
        let line = encode(&TelemetryMessage::new(self.seq, payload)).expect("server messages are finite");
        if let Some(tx) = self.out.get(&id) {
            let _ = tx.send(line);
        }
    }

    fn connect(&mut self, id: u64, tx: Sender<String>) {
        self.out.insert(id, tx);
        let granted = self.authority.is_none();
        if granted {
            self.authority = Some(id);
        }
        info!("client {id} connected ({})", if granted { "command authority" } else { "read-only" });
        self.send_to(id, Payload::Authority { granted });
    }

    fn disconnect(&mut self, id: u64) {
        self.out.remove(&id);
        info!("client {id} disconnected");
        if self.authority == Some(id) {
            // Oldest remaining connection inherits command authority.
            self.authority = self.out.keys().next().copied();
            if let Some(next) = self.authority {
                info!("client {next} promoted to command authority");
                self.send_to(next, Payload::Authority { granted: true });
            }
        }
    }

    fn broadcast(&mut self, line: &str) {
        self.out.retain(|_, tx| tx.send(line.to_owned()).is_ok());
    }
}

fn handle_line(clients: &mut Clients, sim: &mut Simulation, id: u64, bytes: &[u8]) {
    let msg = match decode(bytes) {
        Ok(m) => m,
        Err(e) => {
            warn!("client {id}: undecodable line: {e}");
            return;
        }
    };
    let is_authority = clients.authority == Some(id);
    match msg.payload {
        Payload::StateReport(_) | Payload::MissionAck { .. } | Payload::Authority { .. } => {
            debug!("client {id}: ignoring server-side message {}", msg.payload.tag());
        }
        Payload::Heartbeat { .. } if !is_authority => {}
        Payload::MissionUpload { waypoints } if !is_authority => {
            warn!("client {id}: mission upload rejected, read-only");
            let count = u32::try_from(waypoints.len()).unwrap_or(u32::MAX);
            clients.send_to(
                id,
                Payload::MissionAck {
                    count,
                    ok: false,
                    reason: Some("read-only client".into()),
                },
            );
        }
        p if !is_authority => {
            warn!("client {id}: {} rejected, read-only", p.tag());
            clients.send_to(id, Payload::Authority { granted: false });
        }
        p => sim.send_uplink(p),
    }
}

fn sim_loop(
    scenario: &Scenario,
    speed: f64,
    stop_at_end: bool,
    stop: &AtomicBool,
    inbound: &Receiver<Inbound>,
) -> Result<ServeSummary, ServeError> {
    let mut sim = Simulation::new(scenario, false);
    let mut clients = Clients {
        out: BTreeMap::new(),
        authority: None,
        seq: 0,
    };
    let mut rows = Vec::new();
    let start = Instant::now();
    let tick_wall = scenario.dt_s / speed;
    let result = loop {
        if stop.load(Ordering::SeqCst) || (stop_at_end && sim.is_finished()) {
            break Ok(());
        }
        loop {
            match inbound.try_recv() {
                Ok(Inbound::Connect { id, tx }) => clients.connect(id, tx),
                Ok(Inbound::Disconnect { id }) => clients.disconnect(id),
                Ok(Inbound::Line { id, bytes }) => handle_line(&mut clients, &mut sim, id, &bytes),
                Err(_) => break,
            }
        }
        let tick = match sim.step() {
            Ok(t) => t,
            Err(e) => break Err(e),
        };
        rows.push(tick.record);
        for msg in &tick.to_gcs {
            match encode(msg) {
                Ok(line) => clients.broadcast(&line),
                Err(e) => warn!("dropping unencodable {}: {e}", msg.payload.tag()),
            }
        }
        let due = start + Duration::from_secs_f64(sim.ticks() as f64 * tick_wall);
        if let Some(wait) = due.checked_duration_since(Instant::now()) {
            thread::sleep(wait);
        }
    };
    stop.store(true, Ordering::SeqCst);
    drop(clients);
    result?;
    let ctx = sim.metric_context();
    let metrics = metrics::compute(&rows, &ctx);
    Ok(ServeSummary {
        header: TraceHeader::new(&scenario.name, scenario.seed, ctx),
        rows,
        metrics,
    })
}
