//! End-to-end tests of the TCP and WebSocket endpoints.

mod common;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader, Lines};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::TcpStream;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;
use tokio_tungstenite::tungstenite::Message;

use common::GOLDEN_SCRIPT;
use vascnav::cli::time_comparison;
use vascnav::env::{EnvConfig, NavEnv};
use vascnav::phantom::generate_corridor;
use vascnav::service::{
    self, decode_observation, mask_timestamps, read_teleop_logs, reply_tip, PhantomRegistry,
    ServerConfig, ServerHandle, Shared, Transcript,
};
use vascnav::simulator::Action;

struct Server {
    handle: ServerHandle,
    stop: oneshot::Sender<()>,
    task: JoinHandle<()>,
}

impl Server {
    async fn start(ws: bool, teleop_log: Option<PathBuf>, transcript: Option<PathBuf>) -> Self {
        let mut reg = PhantomRegistry::new();
        reg.insert("corridor", generate_corridor(100.0, 10.0, 2.0).unwrap());
        let clock = service::fixed_clock(1234);
        let mut shared = Shared::new(reg, EnvConfig::default(), clock.clone());
        shared.teleop_log_path = teleop_log;
        let cfg = ServerConfig {
            tcp_addr: "127.0.0.1:0".parse().unwrap(),
            ws_addr: ws.then(|| "127.0.0.1:0".parse().unwrap()),
            transcript: transcript.map(|p| Transcript::create(p, clock).unwrap()),
        };
        let (stop, rx) = oneshot::channel::<()>();
        let (handle, run) = service::serve(Arc::new(shared), cfg, async {
            let _ = rx.await;
        })
        .await
        .unwrap();
        Self {
            handle,
            stop,
            task: tokio::spawn(run),
        }
    }

    async fn shutdown(self) {
        let _ = self.stop.send(());
        tokio::time::timeout(Duration::from_secs(10), self.task)
            .await
            .expect("server stops")
            .unwrap();
    }
}

struct Client {
    lines: Lines<BufReader<OwnedReadHalf>>,
    write: OwnedWriteHalf,
}

impl Client {
    async fn connect(addr: SocketAddr) -> Self {
        let (r, write) = TcpStream::connect(addr).await.unwrap().into_split();
        Self {
            lines: BufReader::new(r).lines(),
            write,
        }
    }

    async fn raw(&mut self, line: &str) -> String {
        self.write
            .write_all(format!("{line}\n").as_bytes())
            .await
            .unwrap();
        self.lines.next_line().await.unwrap().expect("reply")
    }

    async fn send(&mut self, msg: Value) -> Value {
        serde_json::from_str(&self.raw(&msg.to_string()).await).unwrap()
    }
}

fn reset(seq: u64) -> Value {
    json!({"type": "reset", "seq": seq, "phantom": "corridor", "target": "END"})
}

fn step(seq: u64, t: f64, r: f64) -> Value {
    json!({"type": "step", "seq": seq, "translate_mm": t, "rotate_deg": r})
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_sessions_are_independent() {
    let srv = Server::start(false, None, None).await;
    let mut a = Client::connect(srv.handle.tcp_addr).await;
    let mut b = Client::connect(srv.handle.tcp_addr).await;
    let ha = a.send(json!({"type": "hello", "seq": 1})).await;
    let hb = b.send(json!({"type": "hello", "seq": 1})).await;
    assert_ne!(ha["session"], hb["session"]);
    a.send(reset(2)).await;
    b.send(reset(2)).await;
    let ra = a.send(step(3, 20.0, 0.0)).await;
    let rb = b.send(step(3, -5.0, 0.0)).await;
    let ra2 = a.send(step(4, 20.0, 0.0)).await;
    assert_eq!(ra["cum_signed_mm"], 20.0);
    assert_eq!(ra2["cum_signed_mm"], 40.0);
    assert_eq!(ra2["step"], 2);
    assert_eq!(rb["step"], 1);
    assert!(rb["cum_signed_mm"].as_f64().unwrap() <= 0.0);
    srv.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn websocket_matches_tcp() {
    let tcp_srv = Server::start(false, None, None).await;
    let mut c = Client::connect(tcp_srv.handle.tcp_addr).await;
    let mut over_tcp = Vec::new();
    for line in GOLDEN_SCRIPT {
        over_tcp.push(c.raw(line).await);
    }
    tcp_srv.shutdown().await;

    let ws_srv = Server::start(true, None, None).await;
    let url = format!("ws://{}", ws_srv.handle.ws_addr.unwrap());
    let (mut ws, _) = tokio_tungstenite::connect_async(url).await.unwrap();
    let mut over_ws = Vec::new();
    for line in GOLDEN_SCRIPT {
        ws.send(Message::Text(line.to_string())).await.unwrap();
        match ws.next().await.unwrap().unwrap() {
            Message::Text(t) => over_ws.push(t),
            other => panic!("unexpected frame {other:?}"),
        }
    }
    // the server closes after bye
    assert!(matches!(
        ws.next().await,
        Some(Ok(Message::Close(_))) | None
    ));
    ws_srv.shutdown().await;
    assert_eq!(over_tcp, over_ws);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn protocol_errors() {
    let srv = Server::start(false, None, None).await;
    let mut c = Client::connect(srv.handle.tcp_addr).await;
    let code = |v: &Value| v["code"].as_str().unwrap_or("").to_string();

    assert_eq!(
        code(&serde_json::from_str(&c.raw("not json").await).unwrap()),
        "parse"
    );
    assert_eq!(
        code(&c.send(json!({"type": "warp", "seq": 1})).await),
        "schema"
    );
    assert_eq!(code(&c.send(json!({"type": "bye"})).await), "schema");
    assert_eq!(
        code(
            &c.send(json!({"type": "metrics", "seq": 2, "extra": 1}))
                .await
        ),
        "schema"
    );
    assert_eq!(code(&c.send(step(3, 1.0, 0.0)).await), "bad_state");
    assert_eq!(
        code(&c.send(json!({"type": "render", "seq": 4})).await),
        "bad_state"
    );
    assert_eq!(
        code(
            &c.send(json!({"type": "reset", "seq": 5, "phantom": "nope", "target": "END"}))
                .await
        ),
        "schema"
    );
    assert_eq!(
        code(
            &c.send(json!({"type": "reset", "seq": 6, "phantom": "corridor", "target": "LSA"}))
                .await
        ),
        "schema"
    );
    // seq must strictly increase
    assert_eq!(c.send(reset(7)).await["type"], "reset_ack");
    assert_eq!(code(&c.send(step(7, 1.0, 0.0)).await), "bad_state");
    assert_eq!(c.send(step(8, 1.0, 0.0)).await["type"], "step_result");
    srv.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn remote_agent_mirrors_local_env() {
    let srv = Server::start(false, None, None).await;
    let mut c = Client::connect(srv.handle.tcp_addr).await;
    let ack = c
        .send(
            json!({"type": "reset", "seq": 1, "phantom": "corridor", "target": "END",
                     "include_path": true, "render": true}),
        )
        .await;
    assert_eq!(ack["type"], "reset_ack");
    assert!(ack["path"].as_array().unwrap().len() > 100);
    let obs = decode_observation(ack["observation"].as_str().unwrap()).unwrap();
    assert_eq!((obs.width(), obs.height()), (232, 52));

    let phantom = Arc::new(generate_corridor(100.0, 10.0, 2.0).unwrap());
    let mut local = NavEnv::new(phantom, EnvConfig::for_target("END")).unwrap();
    local.reset().unwrap();
    let actions = [
        (20.0, 5.0),
        (20.0, -5.0),
        (-3.0, 0.0),
        (20.0, 0.0),
        (20.0, 0.0),
        (20.0, 0.0),
    ];
    let mut seq = 2;
    let mut last = Value::Null;
    for (t, r) in actions {
        let reply = c.send(step(seq, t, r)).await;
        seq += 1;
        let want = local.step(Action::new(t, r)).unwrap();
        let tip = reply_tip(&reply).unwrap();
        assert_eq!(tip, want.info.tip);
        assert_eq!(reply["reward"].as_f64().unwrap(), want.reward);
        assert_eq!(reply["done"].as_bool().unwrap(), want.done);
        last = reply;
        if want.done {
            break;
        }
    }
    assert_eq!(last["kind"], "success");
    let after = c.send(step(seq, 1.0, 0.0)).await;
    assert_eq!(after["code"], "bad_state");
    let m = c.send(json!({"type": "metrics", "seq": seq + 1})).await;
    assert_eq!(m["current"]["termination"], "success");
    assert!(m["finished"].as_array().unwrap().is_empty());
    c.send(reset(seq + 2)).await;
    let m = c.send(json!({"type": "metrics", "seq": seq + 3})).await;
    assert_eq!(m["finished"].as_array().unwrap().len(), 1);
    assert_eq!(m["current"]["steps"], 0);
    srv.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn shutdown_closes_idle_sessions() {
    let srv = Server::start(true, None, None).await;
    let mut c = Client::connect(srv.handle.tcp_addr).await;
    c.send(json!({"type": "hello", "seq": 1})).await;
    let addr = srv.handle.tcp_addr;
    srv.shutdown().await;
    let eof = tokio::time::timeout(Duration::from_secs(5), c.lines.next_line())
        .await
        .expect("session closed");
    assert!(matches!(eof, Ok(None) | Err(_)));
    assert!(TcpStream::connect(addr).await.is_err());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn session_logs_feed_the_time_report() {
    let dir = tempfile::tempdir().unwrap();
    let log_path = dir.path().join("teleop_logs.jsonl");
    let transcript_path = dir.path().join("transcript.jsonl");
    let srv = Server::start(false, Some(log_path.clone()), Some(transcript_path.clone())).await;
    let mut c = Client::connect(srv.handle.tcp_addr).await;
    for (seq, secs, ok) in [(1, 30.0, true), (2, 50.0, true), (3, 90.0, false)] {
        let ack = c
            .send(json!({"type": "session_log", "seq": seq, "log": {
                "phantom": "corridor", "target": "END", "elapsed_s": secs, "steps": 9, "success": ok}}))
            .await;
        assert_eq!(ack["type"], "session_log_ack");
    }
    let m = c.send(json!({"type": "metrics", "seq": 4})).await;
    assert_eq!(m["teleop_logs"].as_array().unwrap().len(), 3);
    c.send(json!({"type": "bye", "seq": 5})).await;
    srv.shutdown().await;

    let logs = read_teleop_logs(&log_path).unwrap();
    assert_eq!(logs.len(), 3);
    let rows = time_comparison(&[], &logs);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].mode, "teleop");
    assert_eq!(rows[0].successes, 2);
    assert!((rows[0].time_s.mean - 170.0 / 3.0).abs() < 1e-12);

    let transcript = std::fs::read_to_string(&transcript_path).unwrap();
    let entries: Vec<Value> = transcript
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(entries.len(), 10);
    assert_eq!(entries[0]["dir"], "in");
    assert_eq!(entries[1]["dir"], "out");
    assert_eq!(entries[1]["msg"]["type"], "session_log_ack");
    assert_eq!(
        mask_timestamps(&entries[1].to_string())
            .matches("\"ts\":0")
            .count(),
        2
    );
}
