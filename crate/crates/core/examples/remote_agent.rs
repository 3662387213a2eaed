//! Starts an in-process server and drives it over TCP as a remote client
//! would: reset with the planned path, then pursue the path using only what
//! the replies contain.
//!
//! cargo run --example remote_agent

use std::sync::Arc;

use serde_json::{json, Value};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::TcpStream;
use vascnav::env::EnvConfig;
use vascnav::service::{self, reply_tip, PhantomRegistry, ServerConfig, Shared};
use vascnav::Point;

#[tokio::main]
async fn main() -> vascnav::Result<()> {
    let shared = Arc::new(Shared::new(
        PhantomRegistry::with_defaults()?,
        EnvConfig::default(),
        service::system_clock(),
    ));
    let cfg = ServerConfig {
        tcp_addr: "127.0.0.1:0".parse().expect("valid address"),
        ws_addr: None,
        transcript: None,
    };
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let (handle, run) = service::serve(shared, cfg, async {
        let _ = stopped.await;
    })
    .await?;
    let server = tokio::spawn(run);

    let (r, mut w) = TcpStream::connect(handle.tcp_addr).await?.into_split();
    let mut lines = BufReader::new(r).lines();
    let mut seq = 0;
    let mut call = async |mut msg: Value| -> vascnav::Result<Value> {
        seq += 1;
        msg["seq"] = json!(seq);
        w.write_all(format!("{msg}\n").as_bytes()).await?;
        let line = lines.next_line().await?.unwrap_or_default();
        Ok(serde_json::from_str(&line).unwrap_or(Value::Null))
    };

    let ack =
        call(json!({"type": "reset", "phantom": "aorta", "target": "LSA", "include_path": true}))
            .await?;
    let path: Vec<Point> = ack["path"]
        .as_array()
        .map(|a| {
            a.iter()
                .filter_map(|p| Some(Point::new(p[0].as_f64()?, p[1].as_f64()?)))
                .collect()
        })
        .unwrap_or_default();
    let max_t = ack["limits"]["max_translate_mm"].as_f64().unwrap_or(20.0);
    let max_r = ack["limits"]["max_rotate_deg"].as_f64().unwrap_or(90.0);
    let mut tip = reply_tip(&ack).unwrap_or(Point::new(0.0, 0.0));
    let mut heading = ack["heading"].as_f64().unwrap_or(0.0);
    println!(
        "planned {} points, tip ({:.1}, {:.1})",
        path.len(),
        tip.x,
        tip.y
    );

    // pure pursuit: aim 30 px ahead of the nearest path point
    loop {
        let near = (0..path.len())
            .min_by(|&a, &b| tip.dist(path[a]).total_cmp(&tip.dist(path[b])))
            .unwrap_or(0);
        let aim = path[(near + 30).min(path.len() - 1)];
        let turn = vascnav::geom::wrap_deg(tip.heading_to(aim) - heading).clamp(-max_r, max_r);
        let push = if turn.abs() > 45.0 {
            0.0
        } else {
            (tip.dist(aim) / 2.0).min(max_t)
        };
        let reply = call(json!({"type": "step", "translate_mm": push, "rotate_deg": turn})).await?;
        if reply["type"] != "step_result" {
            println!("error: {reply}");
            break;
        }
        tip = reply_tip(&reply).unwrap_or(tip);
        heading = reply["heading"].as_f64().unwrap_or(heading);
        println!(
            "step {:>2}: tip ({:5.1}, {:5.1}) reward {:>7.3}",
            reply["step"], tip.x, tip.y, reply["reward"]
        );
        if reply["done"] == true {
            println!("episode ended: {}", reply["kind"]);
            break;
        }
    }
    println!("{}", call(json!({"type": "metrics"})).await?["current"]);
    call(json!({"type": "bye"})).await?;
    let _ = stop.send(());
    let _ = server.await;
    Ok(())
}
