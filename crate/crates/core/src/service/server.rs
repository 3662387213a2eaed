//! TCP (newline-delimited) and WebSocket front ends over [`Session`].

use std::fs::{File, OpenOptions};
use std::future::Future;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use futures_util::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::watch;
use tokio::task::JoinSet;
use tokio_tungstenite::tungstenite::Message;

use super::{Clock, Session, Shared};
use crate::error::Result;

/// Direction-tagged log of every message, one JSON object per line:
/// `{"dir":"in"|"out","session":id,"ts":ms,"msg":...}`.
#[derive(Clone)]
pub struct Transcript {
    file: Arc<Mutex<File>>,
    clock: Clock,
}

impl Transcript {
    pub fn create(path: impl Into<PathBuf>, clock: Clock) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path.into())?;
        Ok(Self {
            file: Arc::new(Mutex::new(file)),
            clock,
        })
    }

    pub fn record(&self, dir: &str, session: u64, line: &str) {
        let msg = serde_json::from_str::<Value>(line).unwrap_or_else(|_| Value::from(line));
        let entry = json!({"dir": dir, "session": session, "ts": (self.clock)(), "msg": msg});
        if let Ok(mut f) = self.file.lock() {
            let _ = writeln!(f, "{entry}");
        }
    }
}

pub struct ServerConfig {
    pub tcp_addr: SocketAddr,
    /// WebSocket endpoint; `None` disables it.
    pub ws_addr: Option<SocketAddr>,
    pub transcript: Option<Transcript>,
}

/// Addresses actually bound (useful with port 0).
#[derive(Debug, Clone, Copy)]
pub struct ServerHandle {
    pub tcp_addr: SocketAddr,
    pub ws_addr: Option<SocketAddr>,
}

struct Ctx {
    shared: Arc<Shared>,
    transcript: Option<Transcript>,
    next_id: AtomicU64,
}

impl Ctx {
    fn session(&self) -> Session {
        Session::new(
            self.next_id.fetch_add(1, Ordering::Relaxed),
            self.shared.clone(),
        )
    }

    fn handle(&self, session: &mut Session, line: &str) -> super::Reply {
        if let Some(t) = &self.transcript {
            t.record("in", session.id, line);
        }
        // planning on a first reset can take a while; keep the runtime responsive
        let reply = tokio::task::block_in_place(|| session.handle_line(line));
        if let Some(t) = &self.transcript {
            t.record("out", session.id, &reply.line);
        }
        reply
    }
}

/// Binds the listeners, then returns the bound addresses and a future that
/// serves until `shutdown` resolves. On shutdown no new connections are
/// accepted; open sessions finish the request in progress and close.
///
/// Requires a multi-threaded tokio runtime.
pub async fn serve(
    shared: Arc<Shared>,
    cfg: ServerConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(ServerHandle, impl Future<Output = ()> + Send)> {
    let tcp = TcpListener::bind(cfg.tcp_addr).await?;
    let ws = match cfg.ws_addr {
        Some(a) => Some(TcpListener::bind(a).await?),
        None => None,
    };
    let handle = ServerHandle {
        tcp_addr: tcp.local_addr()?,
        ws_addr: ws.as_ref().map(|l| l.local_addr()).transpose()?,
    };
    let ctx = Arc::new(Ctx {
        shared,
        transcript: cfg.transcript,
        next_id: AtomicU64::new(1),
    });
    let run = async move {
        let (stop_tx, stop_rx) = watch::channel(false);
        let mut tasks = JoinSet::new();
        tokio::pin!(shutdown);
        loop {
            tokio::select! {
                _ = &mut shutdown => break,
                Ok((stream, _)) = tcp.accept() => {
                    tasks.spawn(tcp_session(ctx.clone(), stream, stop_rx.clone()));
                }
                Ok((stream, _)) = accept_opt(ws.as_ref()) => {
                    tasks.spawn(ws_session(ctx.clone(), stream, stop_rx.clone()));
                }
            }
        }
        let _ = stop_tx.send(true);
        while tasks.join_next().await.is_some() {}
    };
    Ok((handle, run))
}

async fn accept_opt(l: Option<&TcpListener>) -> std::io::Result<(TcpStream, SocketAddr)> {
    match l {
        Some(l) => l.accept().await,
        None => std::future::pending().await,
    }
}

async fn tcp_session(ctx: Arc<Ctx>, stream: TcpStream, mut stop: watch::Receiver<bool>) {
    let (read, mut write) = stream.into_split();
    let mut lines = BufReader::new(read).lines();
    let mut session = ctx.session();
    loop {
        let line = tokio::select! {
            _ = stop.changed() => break,
            l = lines.next_line() => match l {
                Ok(Some(l)) => l,
                _ => break,
            },
        };
        if line.trim().is_empty() {
            continue;
        }
        let reply = ctx.handle(&mut session, &line);
        let mut out = reply.line.into_bytes();
        out.push(b'\n');
        if write.write_all(&out).await.is_err() || reply.close {
            break;
        }
    }
    let _ = write.shutdown().await;
}

async fn ws_session(ctx: Arc<Ctx>, stream: TcpStream, mut stop: watch::Receiver<bool>) {
    let Ok(mut ws) = tokio_tungstenite::accept_async(stream).await else {
        return;
    };
    let mut session = ctx.session();
    loop {
        let msg = tokio::select! {
            _ = stop.changed() => break,
            m = ws.next() => match m {
                Some(Ok(m)) => m,
                _ => break,
            },
        };
        let text = match msg {
            Message::Text(t) => t,
            Message::Binary(b) => String::from_utf8_lossy(&b).into_owned(),
            Message::Close(_) => break,
            _ => continue,
        };
        let reply = ctx.handle(&mut session, &text);
        if ws.send(Message::Text(reply.line)).await.is_err() || reply.close {
            break;
        }
    }
    let _ = ws.close(None).await;
}
