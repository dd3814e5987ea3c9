//! Async driver around [`Engine`].
//!
//! One task owns the engine. Source readers, the tick timer and client
//! handlers reach it only through an ordered queue. Snapshots go out on a
//! `watch` channel (slow clients skip to the latest one); text and speech
//! events go out on a broadcast channel.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use blinkscribe_core::predict::{Dictionary, T6Index, T6Predictor, T6Trie};
use blinkscribe_core::selector::PanelCatalog;
use blinkscribe_core::wire::{ClientMessage, ServerMessage, SessionStats, Snapshot, SourceStatus};
use thiserror::Error;
use tokio::sync::{broadcast, mpsc, oneshot, watch};
use tokio::task::JoinHandle;
use tracing::{debug, info, warn};

use crate::config::{ConfigError, SessionConfig, SourceConfig};
use crate::engine::{CommandError, Engine, EngineSettings};
use crate::replay::{self, ReplayRecord, ScriptedCommand};
use crate::server::{self, AppState};

const QUEUE_DEPTH: usize = 1024;
const EVENT_BUFFER: usize = 256;
const SERIAL_READ_TIMEOUT: Duration = Duration::from_millis(100);

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Resource(String),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("source unavailable: {0}")]
    SourceUnavailable(String),
    #[error("source lost: {0}")]
    SourceLost(String),
    #[error("snapshot log: {0}")]
    Log(#[source] std::io::Error),
}

impl SessionError {
    /// Process exit code for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            SessionError::Config(_) | SessionError::Resource(_) | SessionError::Bind { .. } => 2,
            SessionError::SourceUnavailable(_) => 3,
            SessionError::SourceLost(_) | SessionError::Log(_) => 1,
        }
    }
}

/// Final state handed back when the session stops.
#[derive(Debug, Clone)]
pub struct SessionSummary {
    pub stats: SessionStats,
    pub last_snapshot: Snapshot,
    pub texts: Vec<String>,
}

pub(crate) type CommandReply = Result<Option<Snapshot>, CommandError>;

pub(crate) enum LoopEvent {
    ReplayBytes {
        t_ms: u64,
        data: Vec<u8>,
    },
    ReplayCommand {
        t_ms: u64,
        cmd: ClientMessage,
    },
    LiveBytes(Vec<u8>),
    SourceEnded,
    SourceLost(String),
    Client {
        cmd: ClientMessage,
        reply: oneshot::Sender<CommandReply>,
    },
}

/// Dictionary, predictor and catalog shared by the loop and the server.
#[derive(Clone)]
pub struct Resources {
    pub predictor: Arc<T6Predictor>,
    pub catalog: Arc<PanelCatalog>,
}

impl Resources {
    pub fn load(config: &SessionConfig) -> Result<Self, SessionError> {
        let (dict, report) = Dictionary::load(&config.dictionary_path)
            .map_err(|e| SessionError::Resource(format!("dictionary {e}")))?;
        if !report.rejected.is_empty() {
            warn!(
                rejected = report.rejected.len(),
                "dictionary entries outside a-z were skipped"
            );
        }
        let trie = T6Trie::build(&dict).expect("loaded dictionaries are normalized");
        let mut predictor = T6Predictor::new(trie, config.num_words);
        if let Some(path) = &config.index_path {
            let index =
                T6Index::load(path).map_err(|e| SessionError::Resource(format!("index {e}")))?;
            predictor = predictor.with_index(index);
        }
        let catalog = match &config.catalog_path {
            Some(path) => {
                PanelCatalog::load(path).map_err(|e| SessionError::Resource(e.to_string()))?
            }
            None => PanelCatalog::default(),
        };
        info!(words = dict.len(), "dictionary loaded");
        Ok(Self {
            predictor: Arc::new(predictor),
            catalog: Arc::new(catalog),
        })
    }
}

pub struct SessionHandle {
    local_addr: SocketAddr,
    shutdown: watch::Sender<bool>,
    task: JoinHandle<Result<SessionSummary, SessionError>>,
}

impl SessionHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    /// Asks the session to stop; [`wait`](Self::wait) returns once it has.
    pub fn shutdown(&self) {
        let _ = self.shutdown.send(true);
    }

    pub async fn wait(self) -> Result<SessionSummary, SessionError> {
        self.task.await.expect("session task panicked")
    }
}

/// Runs a session until the source ends (replay) or `shutdown` resolves.
pub async fn run(
    config: SessionConfig,
    shutdown: impl std::future::Future<Output = ()>,
) -> Result<SessionSummary, SessionError> {
    let handle = start(config).await?;
    let stop = handle.shutdown.clone();
    let mut task = handle.task;
    tokio::select! {
        res = &mut task => res.expect("session task panicked"),
        _ = shutdown => {
            let _ = stop.send(true);
            task.await.expect("session task panicked")
        }
    }
}

/// Loads resources, opens the source, binds the listener and spawns the loop.
pub async fn start(config: SessionConfig) -> Result<SessionHandle, SessionError> {
    config.validate()?;
    let resources = Resources::load(&config)?;
    let script = match &config.command_script {
        Some(path) => replay::load_script(path).map_err(|e| {
            SessionError::Resource(format!("command script {}: {e}", path.display()))
        })?,
        None => Vec::new(),
    };
    let log = config
        .snapshot_log
        .as_ref()
        .map(|p| File::create(p).map(BufWriter::new))
        .transpose()
        .map_err(SessionError::Log)?;

    let (tx, rx) = mpsc::channel(QUEUE_DEPTH);
    let source = open_source(&config.source)?;

    let listener = tokio::net::TcpListener::bind(config.listen)
        .await
        .map_err(|source| SessionError::Bind {
            addr: config.listen,
            source,
        })?;
    let local_addr = listener.local_addr().map_err(|source| SessionError::Bind {
        addr: config.listen,
        source,
    })?;

    let engine = Engine::new(
        EngineSettings {
            blink_threshold: config.blink_threshold,
            refractory_ms: config.refractory_ms,
            dwell_ms: config.dwell_ms,
        },
        resources.catalog.clone(),
        resources.predictor.clone(),
        0,
    );
    let initial = engine.snapshot();
    let (snap_tx, snap_rx) = watch::channel(Arc::new(initial.clone()));
    let (event_tx, _) = broadcast::channel(EVENT_BUFFER);
    let (shutdown_tx, shutdown_rx) = watch::channel(false);

    let replay_unpaced =
        matches!(config.source, SourceConfig::Replay { speed, .. } if speed == 0.0);
    let mut publisher = Publisher {
        snapshots: snap_tx,
        events: event_tx.clone(),
        log,
        flush_each_batch: !replay_unpaced,
        texts: Vec::new(),
    };
    publisher.log_message(&ServerMessage::Snapshot(initial))?;

    let clock = match &source {
        OpenedSource::Replay { .. } => Clock::Replay,
        OpenedSource::Serial(_) => Clock::live(0),
    };
    spawn_source(source, script, tx.clone());

    let state = AppState {
        commands: tx,
        snapshots: snap_rx,
        events: event_tx,
        predictor: resources.predictor.clone(),
    };
    let stay = config.stay_after_replay;
    let task = tokio::spawn(async move {
        let (server_done_tx, server_done_rx) = oneshot::channel::<()>();
        let server = tokio::spawn(server::serve(listener, state, async move {
            let _ = server_done_rx.await;
        }));
        let result = event_loop(engine, rx, publisher, clock, shutdown_rx, stay).await;
        let _ = server_done_tx.send(());
        if let Ok(Err(e)) = server.await {
            warn!("server error: {e}");
        }
        result
    });
    info!(%local_addr, "session started");
    Ok(SessionHandle {
        local_addr,
        shutdown: shutdown_tx,
        task,
    })
}

struct Publisher {
    snapshots: watch::Sender<Arc<Snapshot>>,
    events: broadcast::Sender<ServerMessage>,
    log: Option<BufWriter<File>>,
    flush_each_batch: bool,
    texts: Vec<String>,
}

impl Publisher {
    fn log_message(&mut self, msg: &ServerMessage) -> Result<(), SessionError> {
        if let Some(log) = &mut self.log {
            serde_json::to_writer(&mut *log, msg).map_err(|e| SessionError::Log(e.into()))?;
            log.write_all(b"\n").map_err(SessionError::Log)?;
        }
        Ok(())
    }

    fn publish(&mut self, batch: &mut Vec<ServerMessage>) -> Result<(), SessionError> {
        for msg in batch.drain(..) {
            self.log_message(&msg)?;
            match msg {
                ServerMessage::Snapshot(s) => {
                    self.snapshots.send_replace(Arc::new(s));
                }
                other => {
                    if let ServerMessage::TextEmitted { text } = &other {
                        self.texts.push(text.clone());
                    }
                    let _ = self.events.send(other);
                }
            }
        }
        if self.flush_each_batch {
            self.flush()?;
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<(), SessionError> {
        if let Some(log) = &mut self.log {
            log.flush().map_err(SessionError::Log)?;
        }
        Ok(())
    }
}

enum Clock {
    /// Time comes from capture timestamps only.
    Replay,
    Live {
        origin: Instant,
        offset_ms: u64,
    },
}

impl Clock {
    fn live(offset_ms: u64) -> Self {
        Clock::Live {
            origin: Instant::now(),
            offset_ms,
        }
    }

    fn now_ms(&self, engine: &Engine) -> u64 {
        match self {
            Clock::Replay => engine.now_ms(),
            Clock::Live { origin, offset_ms } => offset_ms + origin.elapsed().as_millis() as u64,
        }
    }

    fn deadline(&self, t_ms: u64) -> Option<tokio::time::Instant> {
        match self {
            Clock::Replay => None,
            Clock::Live { origin, offset_ms } => {
                let due = *origin + Duration::from_millis(t_ms.saturating_sub(*offset_ms));
                Some(tokio::time::Instant::from_std(due))
            }
        }
    }
}

async fn event_loop(
    mut engine: Engine,
    mut rx: mpsc::Receiver<LoopEvent>,
    mut publisher: Publisher,
    mut clock: Clock,
    mut shutdown: watch::Receiver<bool>,
    stay: bool,
) -> Result<SessionSummary, SessionError> {
    let mut out = Vec::new();
    let mut failure = None;
    loop {
        let deadline = clock.deadline(engine.next_tick_ms());
        tokio::select! {
            biased;
            changed = shutdown.changed() => {
                if changed.is_err() || *shutdown.borrow() {
                    break;
                }
            }
            _ = tokio::time::sleep_until(deadline.unwrap_or_else(tokio::time::Instant::now)), if deadline.is_some() => {
                let now = clock.now_ms(&engine);
                engine.advance_to(now, &mut out);
            }
            ev = rx.recv() => {
                let Some(ev) = ev else { break };
                match ev {
                    LoopEvent::ReplayBytes { t_ms, data } => engine.feed(t_ms, &data, &mut out),
                    LoopEvent::ReplayCommand { t_ms, cmd } => {
                        if let Err(e) = engine.command(t_ms, &cmd, &mut out) {
                            warn!(t_ms, "scripted command rejected: {e}");
                        }
                    }
                    LoopEvent::LiveBytes(data) => {
                        let now = clock.now_ms(&engine);
                        engine.feed(now, &data, &mut out);
                    }
                    LoopEvent::Client { cmd, reply } => {
                        let now = clock.now_ms(&engine);
                        let _ = reply.send(engine.command(now, &cmd, &mut out));
                    }
                    LoopEvent::SourceEnded => {
                        engine.set_source_status(SourceStatus::Ended, &mut out);
                        if !stay {
                            publisher.publish(&mut out)?;
                            break;
                        }
                        info!("replay finished; continuing on the wall clock");
                        clock = Clock::live(engine.now_ms());
                    }
                    LoopEvent::SourceLost(reason) => {
                        warn!("source lost: {reason}");
                        engine.set_source_status(SourceStatus::Disconnected, &mut out);
                        if matches!(clock, Clock::Replay) && !stay {
                            publisher.publish(&mut out)?;
                            failure = Some(SessionError::SourceLost(reason));
                            break;
                        }
                        if matches!(clock, Clock::Replay) {
                            clock = Clock::live(engine.now_ms());
                        }
                    }
                }
            }
        }
        if !out.is_empty() {
            publisher.publish(&mut out)?;
        }
    }
    publisher.flush()?;
    debug!("event loop stopped");
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(SessionSummary {
        stats: engine.stats(),
        last_snapshot: engine.snapshot(),
        texts: std::mem::take(&mut publisher.texts),
    })
}

enum OpenedSource {
    Replay {
        records: replay::JsonLines<std::io::BufReader<File>, ReplayRecord>,
        speed: f64,
    },
    Serial(Box<dyn serialport::SerialPort>),
}

fn open_source(source: &SourceConfig) -> Result<OpenedSource, SessionError> {
    match source {
        SourceConfig::Replay { path, speed } => {
            let records = replay::open_capture(path)
                .map_err(|e| SessionError::SourceUnavailable(e.to_string()))?;
            Ok(OpenedSource::Replay {
                records,
                speed: *speed,
            })
        }
        SourceConfig::Serial { port, baud } => serialport::new(port, *baud)
            .timeout(SERIAL_READ_TIMEOUT)
            .open()
            .map(OpenedSource::Serial)
            .map_err(|e| SessionError::SourceUnavailable(format!("{port}: {e}"))),
    }
}

fn spawn_source(source: OpenedSource, script: Vec<ScriptedCommand>, tx: mpsc::Sender<LoopEvent>) {
    match source {
        OpenedSource::Replay { records, speed } => {
            tokio::task::spawn_blocking(move || replay_reader(records, speed, script, tx));
        }
        OpenedSource::Serial(port) => {
            std::thread::spawn(move || serial_reader(port, tx));
        }
    }
}

fn replay_reader(
    records: impl Iterator<Item = Result<ReplayRecord, replay::ReplayError>>,
    speed: f64,
    script: Vec<ScriptedCommand>,
    tx: mpsc::Sender<LoopEvent>,
) {
    let origin = Instant::now();
    let pace = |t_ms: u64| {
        if speed > 0.0 {
            let due = origin + Duration::from_secs_f64(t_ms as f64 / 1000.0 / speed);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
        }
    };
    let mut script = script.into_iter().peekable();
    let send = |ev: LoopEvent| tx.blocking_send(ev).is_ok();
    for record in records {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let _ = send(LoopEvent::SourceLost(e.to_string()));
                return;
            }
        };
        while let Some(cmd) = script.next_if(|c| c.t_ms < record.t_ms) {
            pace(cmd.t_ms);
            if !send(LoopEvent::ReplayCommand {
                t_ms: cmd.t_ms,
                cmd: cmd.cmd,
            }) {
                return;
            }
        }
        pace(record.t_ms);
        if !send(LoopEvent::ReplayBytes {
            t_ms: record.t_ms,
            data: record.data,
        }) {
            return;
        }
    }
    for cmd in script {
        pace(cmd.t_ms);
        if !send(LoopEvent::ReplayCommand {
            t_ms: cmd.t_ms,
            cmd: cmd.cmd,
        }) {
            return;
        }
    }
    let _ = send(LoopEvent::SourceEnded);
}

fn serial_reader(mut port: Box<dyn serialport::SerialPort>, tx: mpsc::Sender<LoopEvent>) {
    let mut buf = [0u8; 1024];
    while !tx.is_closed() {
        match port.read(&mut buf) {
            Ok(0) => continue,
            Ok(n) => {
                if tx
                    .blocking_send(LoopEvent::LiveBytes(buf[..n].to_vec()))
                    .is_err()
                {
                    return;
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::TimedOut => continue,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => {
                let _ = tx.blocking_send(LoopEvent::SourceLost(e.to_string()));
                return;
            }
        }
    }
}

/// Runs a capture through a fresh engine without any I/O besides reading
/// the file. Returns every message the session would publish, in order.
pub fn replay_offline(
    capture: &Path,
    script: &[ScriptedCommand],
    settings: EngineSettings,
    resources: &Resources,
) -> Result<Vec<ServerMessage>, SessionError> {
    let mut engine = Engine::new(
        settings,
        resources.catalog.clone(),
        resources.predictor.clone(),
        0,
    );
    let mut out = vec![ServerMessage::Snapshot(engine.snapshot())];
    let mut script = script.iter().peekable();
    let records = replay::open_capture(capture)
        .map_err(|e| SessionError::SourceUnavailable(e.to_string()))?;
    for record in records {
        let record = record.map_err(|e| SessionError::SourceLost(e.to_string()))?;
        while let Some(cmd) = script.next_if(|c| c.t_ms < record.t_ms) {
            let _ = engine.command(cmd.t_ms, &cmd.cmd, &mut out);
        }
        engine.feed(record.t_ms, &record.data, &mut out);
    }
    for cmd in script {
        let _ = engine.command(cmd.t_ms, &cmd.cmd, &mut out);
    }
    engine.set_source_status(SourceStatus::Ended, &mut out);
    Ok(out)
}
