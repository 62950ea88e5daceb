//! TCP line-protocol bridge in front of a [`Bench`].
//!
//! A session starts unbound and may `LIST` the rack or `CONNECT` to one
//! instrument. Once bound, every line is a SCPI program message. Messages go
//! through a FIFO per instrument with a single executor each; executors take
//! the bench lock for the whole message, so a DMM read never observes a
//! half-applied PSU message.

use std::collections::HashMap;
use std::future::Future;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use labbench_core::instruments::{Registry, ResolveError};
use labbench_core::{Bench, BenchConfig, InstrumentId};
use log::{debug, info, warn};
use thiserror::Error;
use tokio::io::{AsyncBufReadExt, AsyncReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, oneshot, watch};
use tokio::task::JoinSet;

use labbench_core::config::ConfigError;

/// Longest accepted input line; longer lines close the session.
pub const MAX_LINE_BYTES: usize = 64 * 1024;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("invalid bench configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("cannot start runtime: {0}")]
    Runtime(std::io::Error),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ServerOptions {
    /// Keep a log of every executed message (for ordering checks).
    pub record_trace: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Phase {
    AwaitingConnect,
    Bound(InstrumentId),
}

#[derive(Debug, Clone)]
pub struct SessionState {
    pub id: u64,
    pub peer: Option<SocketAddr>,
    pub phase: Phase,
}

/// One executed program message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub serial: String,
    pub seq: u64,
    pub session: u64,
    pub message: String,
}

struct QueueEntry {
    session: u64,
    seq: u64,
    message: String,
    reply: oneshot::Sender<Vec<String>>,
}

struct QueueTail {
    next_seq: u64,
    tx: Option<mpsc::UnboundedSender<QueueEntry>>,
}

struct Shared {
    registry: Registry,
    bench: Mutex<Bench>,
    queues: HashMap<String, Mutex<QueueTail>>,
    trace: Option<Mutex<Vec<TraceEntry>>>,
    executed: AtomicU64,
    next_session: AtomicU64,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

impl Shared {
    /// Appends to the instrument's queue and waits for the responses.
    /// `None` means the server is shutting down and the message was not queued.
    async fn submit(&self, serial: &str, session: u64, message: &str) -> Option<Vec<String>> {
        let (reply, rx) = oneshot::channel();
        {
            // Sequence assignment and send happen under one lock, so queue
            // order and sequence order agree.
            let mut tail = lock(self.queues.get(serial)?);
            let seq = tail.next_seq;
            tail.tx.as_ref()?.send(QueueEntry { session, seq, message: message.to_string(), reply }).ok()?;
            tail.next_seq += 1;
        }
        rx.await.ok()
    }

    fn close_queues(&self) {
        for q in self.queues.values() {
            lock(q).tx = None;
        }
    }

    fn run_entry(&self, serial: &str, entry: QueueEntry) {
        let responses = {
            let mut bench = lock(&self.bench);
            if let Some(trace) = &self.trace {
                lock(trace).push(TraceEntry {
                    serial: serial.to_string(),
                    seq: entry.seq,
                    session: entry.session,
                    message: entry.message.clone(),
                });
            }
            bench.execute(serial, &entry.message).unwrap_or_default()
        };
        self.executed.fetch_add(1, Ordering::Relaxed);
        // The session may be gone; its responses are dropped.
        let _ = entry.reply.send(responses);
    }

    async fn handle_line(&self, state: &mut SessionState, line: &str) -> Vec<String> {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            return Vec::new();
        }
        match &state.phase {
            Phase::AwaitingConnect => self.handshake(state, line),
            Phase::Bound(id) => {
                let serial = id.serial.clone();
                self.submit(&serial, state.id, line).await.unwrap_or_default()
            }
        }
    }

    fn handshake(&self, state: &mut SessionState, line: &str) -> Vec<String> {
        let line = line.trim();
        let (verb, rest) = match line.split_once(char::is_whitespace) {
            Some((v, r)) => (v, r.trim()),
            None => (line, ""),
        };
        if verb.eq_ignore_ascii_case("LIST") && rest.is_empty() {
            let mut out: Vec<String> = self.registry.iter().map(|id| format!("{} {} {}", id.model, id.serial, id.kind)).collect();
            out.push("OK".into());
            return out;
        }
        if verb.eq_ignore_ascii_case("CONNECT") && !rest.is_empty() {
            return vec![match self.registry.resolve(rest) {
                Ok(id) => {
                    let reply = format!("OK {}", id.serial);
                    debug!("session {} bound to {}", state.id, id.serial);
                    state.phase = Phase::Bound(id.clone());
                    reply
                }
                Err(ResolveError::NotFound) => "ERR 404 instrument not found".into(),
                Err(ResolveError::AmbiguousModel) => "ERR 409 ambiguous model".into(),
            }];
        }
        vec!["ERR 400 bad verb".into()]
    }
}

/// What the server leaves behind after shutdown.
#[derive(Debug)]
pub struct ServerReport {
    pub bench: Bench,
    pub trace: Vec<TraceEntry>,
    /// Messages accepted into a queue.
    pub enqueued: u64,
    pub executed: u64,
}

pub struct Server {
    listener: TcpListener,
    shared: Arc<Shared>,
    receivers: Vec<(String, mpsc::UnboundedReceiver<QueueEntry>)>,
}

impl Server {
    pub async fn bind(config: &BenchConfig, addr: SocketAddr, options: ServerOptions) -> Result<Self, ServerError> {
        let bench = Bench::new(config)?;
        let listener = TcpListener::bind(addr).await.map_err(|source| ServerError::Bind { addr, source })?;
        let registry = bench.registry().clone();
        let mut queues = HashMap::new();
        let mut receivers = Vec::new();
        for id in registry.iter() {
            let (tx, rx) = mpsc::unbounded_channel();
            queues.insert(id.serial.clone(), Mutex::new(QueueTail { next_seq: 0, tx: Some(tx) }));
            receivers.push((id.serial.clone(), rx));
        }
        let shared = Arc::new(Shared {
            registry,
            bench: Mutex::new(bench),
            queues,
            trace: options.record_trace.then(|| Mutex::new(Vec::new())),
            executed: AtomicU64::new(0),
            next_session: AtomicU64::new(1),
        });
        Ok(Self { listener, shared, receivers })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves until `shutdown` resolves, then stops accepting, lets open
    /// sessions finish their in-flight message, and drains every queue.
    pub async fn run(self, shutdown: impl Future<Output = ()>) -> ServerReport {
        let Server { listener, shared, receivers } = self;
        let mut executors = JoinSet::new();
        for (serial, mut rx) in receivers {
            let shared = Arc::clone(&shared);
            executors.spawn(async move {
                while let Some(entry) = rx.recv().await {
                    shared.run_entry(&serial, entry);
                }
            });
        }

        let (stop_tx, stop_rx) = watch::channel(false);
        let mut sessions = JoinSet::new();
        tokio::pin!(shutdown);
        loop {
            tokio::select! {
                _ = &mut shutdown => break,
                accepted = listener.accept() => match accepted {
                    Ok((stream, peer)) => {
                        let id = shared.next_session.fetch_add(1, Ordering::Relaxed);
                        debug!("session {id} from {peer}");
                        sessions.spawn(session(Arc::clone(&shared), stream, id, peer, stop_rx.clone()));
                    }
                    Err(e) => warn!("accept failed: {e}"),
                },
                Some(_) = sessions.join_next(), if !sessions.is_empty() => {}
            }
        }
        info!("shutting down; draining queues");
        drop(listener);
        let _ = stop_tx.send(true);
        while sessions.join_next().await.is_some() {}
        shared.close_queues();
        while executors.join_next().await.is_some() {}

        let enqueued = shared.queues.values().map(|q| lock(q).next_seq).sum();
        let shared = Arc::try_unwrap(shared).unwrap_or_else(|_| panic!("all tasks joined"));
        ServerReport {
            bench: shared.bench.into_inner().unwrap_or_else(|p| p.into_inner()),
            trace: shared.trace.map(|t| t.into_inner().unwrap_or_else(|p| p.into_inner())).unwrap_or_default(),
            enqueued,
            executed: shared.executed.into_inner(),
        }
    }
}

async fn session(shared: Arc<Shared>, stream: TcpStream, id: u64, peer: SocketAddr, mut stop: watch::Receiver<bool>) {
    let _ = stream.set_nodelay(true);
    let (reader, mut writer) = stream.into_split();
    let mut reader = BufReader::new(reader);
    let mut state = SessionState { id, peer: Some(peer), phase: Phase::AwaitingConnect };
    let mut buf = Vec::new();
    loop {
        let mut limited = AsyncReadExt::take(&mut reader, (MAX_LINE_BYTES - buf.len()) as u64 + 1);
        let n = tokio::select! {
            biased;
            _ = stop.changed() => break,
            n = limited.read_until(b'\n', &mut buf) => n,
        };
        match n {
            Ok(0) | Err(_) => break,
            Ok(_) => {}
        }
        if buf.last() != Some(&b'\n') {
            if buf.len() > MAX_LINE_BYTES {
                warn!("session {id}: line too long, closing");
                break;
            }
            continue;
        }
        buf.pop();
        let line = String::from_utf8_lossy(&buf).into_owned();
        buf.clear();
        let out = shared.handle_line(&mut state, &line).await;
        if out.is_empty() {
            continue;
        }
        let mut text = out.join("\n");
        text.push('\n');
        if writer.write_all(text.as_bytes()).await.is_err() {
            break;
        }
    }
    debug!("session {id} closed");
}

/// A server running on its own runtime thread.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<ServerReport>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn port(&self) -> u16 {
        self.addr.port()
    }

    /// Stops the server and waits for the queues to drain.
    pub fn shutdown(mut self) -> ServerReport {
        self.stop_and_join().expect("server thread")
    }

    fn stop_and_join(&mut self) -> Option<ServerReport> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        self.thread.take().and_then(|t| t.join().ok())
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_and_join();
    }
}

/// Binds `addr` and serves on a background thread.
pub fn spawn(config: &BenchConfig, addr: SocketAddr, options: ServerOptions) -> Result<ServerHandle, ServerError> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_io()
        .build()
        .map_err(ServerError::Runtime)?;
    let server = runtime.block_on(Server::bind(config, addr, options))?;
    let addr = server.local_addr().map_err(|source| ServerError::Bind { addr, source })?;
    let (stop, stopped) = oneshot::channel::<()>();
    let thread = std::thread::Builder::new()
        .name("labbench-server".into())
        .spawn(move || {
            runtime.block_on(server.run(async {
                let _ = stopped.await;
            }))
        })
        .map_err(ServerError::Runtime)?;
    Ok(ServerHandle { addr, stop: Some(stop), thread: Some(thread) })
}

/// Shorthand for tests and tools: default bench on an ephemeral localhost port.
pub fn spawn_local(config: &BenchConfig, options: ServerOptions) -> Result<ServerHandle, ServerError> {
    spawn(config, SocketAddr::from(([127, 0, 0, 1], 0)), options)
}
