//! Runs the navigation service on TCP and WebSocket until ctrl-c.
//!
//! cargo run --example serve -- [tcp_addr] [ws_addr]

use std::sync::Arc;

use vascnav::env::EnvConfig;
use vascnav::service::{self, PhantomRegistry, ServerConfig, Shared};

#[tokio::main]
async fn main() -> vascnav::Result<()> {
    let mut args = std::env::args().skip(1);
    let tcp = args.next().unwrap_or_else(|| "127.0.0.1:7070".into());
    let ws = args.next().unwrap_or_else(|| "127.0.0.1:7071".into());
    let parse = |s: &str| {
        s.parse()
            .map_err(|e| vascnav::Error::Usage(format!("{s}: {e}")))
    };
    let shared = Arc::new(Shared::new(
        PhantomRegistry::with_defaults()?,
        EnvConfig::default(),
        service::system_clock(),
    ));
    let cfg = ServerConfig {
        tcp_addr: parse(&tcp)?,
        ws_addr: Some(parse(&ws)?),
        transcript: None,
    };
    let (handle, run) = service::serve(shared, cfg, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    println!("tcp {} ws {}", handle.tcp_addr, handle.ws_addr.unwrap());
    run.await;
    Ok(())
}
