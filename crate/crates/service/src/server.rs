//! Interactive session over websockets.
//!
//! One simulation thread owns the engine. Network threads only exchange
//! text frames with it: inbound messages go through a bounded channel
//! drained every tick, and each client has a bounded outbox the simulation
//! thread pushes snapshots into. The first client to connect is the
//! operator; later clients observe. When the operator drops, the clutch is
//! released and the next client to connect becomes operator.

use std::collections::{BTreeMap, VecDeque};
use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, SyncSender, TryRecvError, TrySendError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use log::{info, warn};
use tungstenite::{Message, WebSocket};

use twistarm::task_engine::{CommandVerdict, Phase, TaskCommand, TaskEngine, TaskSetup};
use twistarm::teleop::TraceRecorder;

use crate::headless::{load_setup, RunError};
use crate::metrics::MetricsLog;
use crate::protocol::{master_command, ClientMessage, ControlAction, Role, ServerMessage, PROTOCOL_VERSION};
use crate::session::{SessionConfig, StateSnapshot};

/// Pending operator commands beyond this are refused.
pub const COMMAND_QUEUE_CAPACITY: usize = 256;
const OUTBOX_CAPACITY: usize = 64;
const INBOUND_CAPACITY: usize = 1024;
const POLL: Duration = Duration::from_millis(5);

enum Inbound {
    Connected { id: u64, outbox: SyncSender<String> },
    Message { id: u64, text: String },
    Disconnected { id: u64 },
}

struct Client {
    outbox: SyncSender<String>,
    role: Role,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServeSummary {
    pub ticks: u64,
    pub final_phase: Phase,
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    sim: JoinHandle<Result<ServeSummary, RunError>>,
    acceptor: JoinHandle<()>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stop(self) -> Result<ServeSummary, RunError> {
        self.stop.store(true, Ordering::SeqCst);
        let _ = self.acceptor.join();
        self.sim.join().expect("simulation thread panicked")
    }

    /// Blocks until the simulation loop exits (it only does when stopped).
    pub fn wait(self) -> Result<ServeSummary, RunError> {
        let result = self.sim.join().expect("simulation thread panicked");
        self.stop.store(true, Ordering::SeqCst);
        let _ = self.acceptor.join();
        result
    }
}

/// Binds the listen address and starts the session threads.
pub fn spawn(config: &SessionConfig) -> Result<ServerHandle, RunError> {
    config.validate().map_err(RunError::Config)?;
    let setup = load_setup(config)?;
    let engine = TaskEngine::new(setup.clone())?;
    let listener = TcpListener::bind(&config.listen)
        .map_err(|e| RunError::Config(format!("cannot listen on {}: {e}", config.listen)))?;
    let addr = listener.local_addr().map_err(|e| RunError::Config(e.to_string()))?;
    listener
        .set_nonblocking(true)
        .map_err(|e| RunError::Config(e.to_string()))?;
    info!("listening on ws://{addr}");

    let stop = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::sync_channel(INBOUND_CAPACITY);
    let acceptor = {
        let stop = stop.clone();
        thread::spawn(move || accept_loop(listener, tx, stop))
    };
    let sim = {
        let stop = stop.clone();
        let sim = Simulation::new(setup, engine, config);
        thread::spawn(move || sim.run(rx, stop))
    };
    Ok(ServerHandle {
        addr,
        stop,
        sim,
        acceptor,
    })
}

pub fn serve_interactive(config: &SessionConfig) -> Result<ServeSummary, RunError> {
    spawn(config)?.wait()
}

fn accept_loop(listener: TcpListener, inbound: SyncSender<Inbound>, stop: Arc<AtomicBool>) {
    let mut next_id = 0u64;
    let mut workers = Vec::new();
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let id = next_id;
                next_id += 1;
                let inbound = inbound.clone();
                let stop = stop.clone();
                workers.push(thread::spawn(move || {
                    if let Err(e) = connection(id, stream, inbound, stop) {
                        warn!("client {id} ({peer}): {e}");
                    }
                }));
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => {
                warn!("accept failed: {e}");
                thread::sleep(POLL);
            }
        }
    }
    for w in workers {
        let _ = w.join();
    }
}

fn is_timeout(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if matches!(io.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut))
}

fn connection(id: u64, stream: TcpStream, inbound: SyncSender<Inbound>, stop: Arc<AtomicBool>) -> Result<(), String> {
    stream.set_nonblocking(false).map_err(|e| e.to_string())?;
    let mut ws: WebSocket<TcpStream> = tungstenite::accept(stream).map_err(|e| e.to_string())?;
    ws.get_ref().set_read_timeout(Some(POLL)).map_err(|e| e.to_string())?;
    let (outbox, outgoing) = mpsc::sync_channel::<String>(OUTBOX_CAPACITY);
    if inbound.send(Inbound::Connected { id, outbox }).is_err() {
        return Ok(());
    }
    let result = pump(id, &mut ws, &inbound, &outgoing, &stop);
    let _ = inbound.send(Inbound::Disconnected { id });
    let _ = ws.close(None);
    let _ = ws.flush();
    result
}

fn pump(
    id: u64,
    ws: &mut WebSocket<TcpStream>,
    inbound: &SyncSender<Inbound>,
    outgoing: &Receiver<String>,
    stop: &AtomicBool,
) -> Result<(), String> {
    while !stop.load(Ordering::SeqCst) {
        match ws.read() {
            Ok(Message::Text(text)) => {
                if inbound.send(Inbound::Message { id, text: text.as_str().to_owned() }).is_err() {
                    return Ok(());
                }
            }
            Ok(Message::Binary(_)) => {
                let err = ServerMessage::error("binary frames are not supported").to_json();
                ws.send(Message::text(err)).map_err(|e| e.to_string())?;
            }
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(e) if is_timeout(&e) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(e.to_string()),
        }
        loop {
            match outgoing.try_recv() {
                Ok(text) => match ws.write(Message::text(text)) {
                    Ok(()) => {}
                    Err(e) if is_timeout(&e) => break,
                    Err(e) => return Err(e.to_string()),
                },
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return Ok(()),
            }
        }
        match ws.flush() {
            Ok(()) => {}
            Err(e) if is_timeout(&e) => {}
            Err(e) => return Err(e.to_string()),
        }
    }
    Ok(())
}

struct PendingCommand {
    position: [f64; 3],
    orientation: [f64; 4],
    gripper: f64,
    clutch: bool,
}

struct Simulation {
    setup: TaskSetup,
    engine: TaskEngine,
    tick_period: Duration,
    record_path: Option<PathBuf>,
    recorder: Option<TraceRecorder<std::io::BufWriter<std::fs::File>>>,
    metrics_out: Option<PathBuf>,
    metrics: MetricsLog,
    clients: BTreeMap<u64, Client>,
    operator: Option<u64>,
    queue: VecDeque<PendingCommand>,
    last_verdict: Option<CommandVerdict>,
}

impl Simulation {
    fn new(setup: TaskSetup, engine: TaskEngine, config: &SessionConfig) -> Self {
        let mut metrics = MetricsLog::new(&engine);
        metrics.push(&engine);
        Self {
            setup,
            engine,
            tick_period: Duration::from_secs_f64(1.0 / config.tick_rate),
            record_path: config.record.clone(),
            recorder: None,
            metrics_out: config.metrics_out.clone(),
            metrics,
            clients: BTreeMap::new(),
            operator: None,
            queue: VecDeque::new(),
            last_verdict: None,
        }
    }

    fn run(mut self, inbound: Receiver<Inbound>, stop: Arc<AtomicBool>) -> Result<ServeSummary, RunError> {
        if self.record_path.is_some() {
            self.start_recording()?;
        }
        let mut deadline = Instant::now();
        while !stop.load(Ordering::SeqCst) {
            loop {
                match inbound.try_recv() {
                    Ok(msg) => self.handle(msg)?,
                    Err(TryRecvError::Empty) => break,
                    Err(TryRecvError::Disconnected) => {
                        stop.store(true, Ordering::SeqCst);
                        break;
                    }
                }
            }
            self.tick()?;
            deadline += self.tick_period;
            let now = Instant::now();
            if deadline > now {
                thread::sleep(deadline - now);
            } else {
                deadline = now;
            }
        }
        self.finish()
    }

    fn send(&self, id: u64, msg: &ServerMessage) {
        if let Some(c) = self.clients.get(&id) {
            let _ = c.outbox.try_send(msg.to_json());
        }
    }

    fn handle(&mut self, msg: Inbound) -> Result<(), RunError> {
        match msg {
            Inbound::Connected { id, outbox } => {
                let role = if self.operator.is_none() {
                    self.operator = Some(id);
                    Role::Operator
                } else {
                    Role::Observer
                };
                info!("client {id} connected as {role:?}");
                self.clients.insert(id, Client { outbox, role });
                self.send(id, &ServerMessage::Welcome { v: PROTOCOL_VERSION, role });
            }
            Inbound::Disconnected { id } => {
                self.clients.remove(&id);
                if self.operator == Some(id) {
                    info!("operator {id} disconnected; clutch released");
                    self.operator = None;
                    self.queue.clear();
                    self.engine.release_clutch();
                }
            }
            Inbound::Message { id, text } => {
                let parsed = match ClientMessage::parse(&text) {
                    Ok(m) => m,
                    Err(e) => {
                        self.send(id, &ServerMessage::error(e.to_string()));
                        return Ok(());
                    }
                };
                if self.clients.get(&id).map(|c| c.role) != Some(Role::Operator) {
                    self.send(id, &ServerMessage::error("read-only connection: only the operator may send"));
                    return Ok(());
                }
                match parsed {
                    ClientMessage::Command {
                        position,
                        orientation,
                        gripper,
                        clutch,
                        ..
                    } => {
                        if let Err(e) = master_command(position, orientation, gripper, clutch, 0) {
                            self.send(id, &ServerMessage::error(e.to_string()));
                        } else if self.queue.len() >= COMMAND_QUEUE_CAPACITY {
                            self.send(id, &ServerMessage::error("command queue full; command dropped"));
                        } else {
                            self.queue.push_back(PendingCommand {
                                position,
                                orientation,
                                gripper,
                                clutch,
                            });
                        }
                    }
                    ClientMessage::Control { action: ControlAction::Reset, .. } => {
                        self.reset()?;
                        if self.recorder.is_some() {
                            self.start_recording()?;
                        }
                    }
                    ClientMessage::Control {
                        action: ControlAction::Record,
                        enabled,
                        ..
                    } => {
                        if enabled.unwrap_or(true) {
                            if self.record_path.is_none() {
                                self.send(id, &ServerMessage::error("no record path configured (--record)"));
                            } else {
                                self.reset()?;
                                self.start_recording()?;
                            }
                        } else {
                            self.stop_recording()?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn reset(&mut self) -> Result<(), RunError> {
        self.engine = TaskEngine::new(self.setup.clone())?;
        self.queue.clear();
        self.last_verdict = None;
        self.metrics = MetricsLog::new(&self.engine);
        self.metrics.push(&self.engine);
        info!("session reset");
        Ok(())
    }

    fn start_recording(&mut self) -> Result<(), RunError> {
        let path = self.record_path.clone().expect("checked by caller");
        let io_err = |source| RunError::Output {
            path: path.clone(),
            source,
        };
        let file = std::fs::File::create(&path).map_err(io_err)?;
        self.recorder = Some(TraceRecorder::new(std::io::BufWriter::new(file)).map_err(io_err)?);
        Ok(())
    }

    fn stop_recording(&mut self) -> Result<(), RunError> {
        if let Some(mut rec) = self.recorder.take() {
            let path = self.record_path.clone().unwrap_or_default();
            rec.flush().map_err(|source| RunError::Output { path, source })?;
        }
        Ok(())
    }

    fn tick(&mut self) -> Result<(), RunError> {
        let tick = self.engine.tick() + 1;
        let mut commands = Vec::new();
        if !self.engine.phase().is_terminal() {
            if let Some(p) = self.queue.pop_front() {
                let cmd = master_command(p.position, p.orientation, p.gripper, p.clutch, tick)
                    .expect("validated on receipt");
                if let Some(rec) = self.recorder.as_mut() {
                    let path = self.record_path.clone().unwrap_or_default();
                    rec.record(&cmd).map_err(|source| RunError::Output { path, source })?;
                }
                commands.push(TaskCommand::Teleop(cmd));
            }
        }
        let before = self.engine.phase();
        let report = self.engine.step(&commands);
        if let Some(v) = report.verdicts.into_iter().next() {
            self.last_verdict = Some(v);
        }
        if !before.is_terminal() {
            self.metrics.push(&self.engine);
        }
        if self.engine.phase() != before {
            info!("tick {}: {} -> {}", self.engine.tick(), before, self.engine.phase());
        }
        let frame = ServerMessage::Snapshot(Box::new(StateSnapshot::capture(&self.engine, self.last_verdict.clone()))).to_json();
        for c in self.clients.values() {
            match c.outbox.try_send(frame.clone()) {
                Ok(()) | Err(TrySendError::Full(_)) | Err(TrySendError::Disconnected(_)) => {}
            }
        }
        Ok(())
    }

    fn finish(mut self) -> Result<ServeSummary, RunError> {
        self.stop_recording()?;
        if let Some(path) = &self.metrics_out {
            let file = std::fs::File::create(path).map_err(|source| RunError::Output {
                path: path.clone(),
                source,
            })?;
            self.metrics
                .write_to(std::io::BufWriter::new(file))
                .map_err(|source| RunError::Output {
                    path: path.clone(),
                    source,
                })?;
        }
        Ok(ServeSummary {
            ticks: self.engine.tick(),
            final_phase: self.engine.phase(),
        })
    }
}
