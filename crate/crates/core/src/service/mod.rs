//! Session-oriented JSON-lines protocol for remote agents and the teleop
//! console.
//!
//! Every request is one JSON object with a `type` and a strictly increasing
//! `seq`; every reply echoes that `seq`. Message types:
//!
//! | request        | reply            |
//! |----------------|------------------|
//! | `hello`        | `hello_ack`      |
//! | `list_phantoms`| `phantoms`       |
//! | `reset`        | `reset_ack`      |
//! | `step`         | `step_result`    |
//! | `render`       | `frame`          |
//! | `motor_echo`   | `motor`          |
//! | `metrics`      | `metrics`        |
//! | `session_log`  | `session_log_ack`|
//! | `bye`          | `bye_ack`        |
//!
//! Failures produce `{"type":"error","code":...,"detail":...}` with a code in
//! `parse`, `schema`, `bad_state`, `unreachable`; the session stays open.
//! Replies carry a `ts` field (milliseconds since the Unix epoch).

mod server;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::actuation::{schedule, MotorParams};
use crate::env::{EnvConfig, NavEnv, Observation, Termination};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::phantom::{generate_corridor, standard_aorta, VesselPhantom};
use crate::simulator::Action;

pub use server::{serve, ServerConfig, ServerHandle, Transcript};

pub const PROTOCOL_VERSION: &str = "1";

/// Milliseconds since the Unix epoch; replaceable for reproducible runs.
pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    })
}

/// A clock that always returns `ms`.
pub fn fixed_clock(ms: u64) -> Clock {
    Arc::new(move || ms)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Agent,
    Teleop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Parse,
    Schema,
    BadState,
    Unreachable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolError {
    pub code: ErrorCode,
    pub detail: String,
}

impl ProtocolError {
    fn new(code: ErrorCode, detail: impl Into<String>) -> Self {
        Self {
            code,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for ProtocolError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.code, self.detail)
    }
}

impl From<Error> for ProtocolError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Unreachable { .. } => ErrorCode::Unreachable,
            Error::EpisodeFinished => ErrorCode::BadState,
            _ => ErrorCode::Schema,
        };
        Self::new(code, e.to_string())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Request {
    Hello {
        seq: u64,
        #[serde(default)]
        client: Option<String>,
    },
    ListPhantoms {
        seq: u64,
    },
    Reset {
        seq: u64,
        phantom: String,
        target: String,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_mode")]
        mode: Mode,
        #[serde(default)]
        render: bool,
        #[serde(default)]
        include_path: bool,
    },
    Step {
        seq: u64,
        translate_mm: f64,
        rotate_deg: f64,
        #[serde(default)]
        render: bool,
    },
    Render {
        seq: u64,
        #[serde(default = "default_format")]
        format: String,
    },
    MotorEcho {
        seq: u64,
        #[serde(default)]
        params: Option<MotorParams>,
        #[serde(default)]
        translate_mm: f64,
        #[serde(default)]
        rotate_deg: f64,
    },
    Metrics {
        seq: u64,
    },
    SessionLog {
        seq: u64,
        log: TeleopLog,
    },
    Bye {
        seq: u64,
    },
}

fn default_mode() -> Mode {
    Mode::Agent
}

fn default_format() -> String {
    "png".into()
}

/// Summary the console posts after a manual episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeleopLog {
    pub phantom: String,
    pub target: String,
    pub elapsed_s: f64,
    pub steps: u32,
    #[serde(default)]
    pub success: bool,
}

/// One finished or running episode as reported by `metrics`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub phantom: String,
    pub target: String,
    pub mode: Mode,
    pub seed: u64,
    pub steps: u32,
    pub episode_return: f64,
    pub termination: Option<Termination>,
    /// Simulated motor run time, s.
    pub motor_time_s: f64,
    /// Wall-clock time from reset to the terminal step (teleop mode), s.
    pub elapsed_s: Option<f64>,
}

/// Named immutable phantoms shared by all sessions.
#[derive(Debug, Clone, Default)]
pub struct PhantomRegistry {
    phantoms: BTreeMap<String, Arc<VesselPhantom>>,
}

impl PhantomRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// `aorta` (the standard phantom) and `corridor` (100 × 10 mm).
    pub fn with_defaults() -> Result<Self> {
        let mut r = Self::new();
        r.insert("aorta", standard_aorta());
        r.insert("corridor", generate_corridor(100.0, 10.0, 2.0)?);
        Ok(r)
    }

    pub fn insert(&mut self, id: impl Into<String>, phantom: VesselPhantom) {
        self.phantoms.insert(id.into(), Arc::new(phantom));
    }

    pub fn get(&self, id: &str) -> Option<&Arc<VesselPhantom>> {
        self.phantoms.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &String> {
        self.phantoms.keys()
    }
}

/// Planned environments keyed by (phantom, target); clones share the plan.
#[derive(Default)]
pub struct EnvCache {
    envs: Mutex<HashMap<(String, String), NavEnv>>,
}

impl EnvCache {
    fn get(
        &self,
        registry: &PhantomRegistry,
        template: &EnvConfig,
        phantom: &str,
        target: &str,
    ) -> std::result::Result<NavEnv, ProtocolError> {
        let key = (phantom.to_string(), target.to_string());
        if let Some(env) = self.envs.lock().expect("env cache lock").get(&key) {
            return Ok(env.clone());
        }
        let ph = registry.get(phantom).ok_or_else(|| {
            ProtocolError::new(ErrorCode::Schema, format!("unknown phantom {phantom:?}"))
        })?;
        let cfg = EnvConfig {
            target: target.to_string(),
            ..template.clone()
        };
        let mut env = NavEnv::new(ph.clone(), cfg)?;
        // plans once; later sessions clone the planned environment
        env.reset()?;
        self.envs
            .lock()
            .expect("env cache lock")
            .insert(key, env.clone());
        Ok(env)
    }
}

/// State shared by all sessions of one server.
pub struct Shared {
    pub registry: PhantomRegistry,
    pub env_template: EnvConfig,
    pub motor: MotorParams,
    pub clock: Clock,
    cache: EnvCache,
    /// Teleop logs posted by consoles, in arrival order.
    pub teleop_logs: Mutex<Vec<TeleopLog>>,
    /// When set, each posted teleop log is appended here as one JSON line.
    pub teleop_log_path: Option<PathBuf>,
}

impl Shared {
    pub fn new(registry: PhantomRegistry, env_template: EnvConfig, clock: Clock) -> Self {
        Self {
            registry,
            env_template,
            motor: MotorParams::default(),
            clock,
            cache: EnvCache::default(),
            teleop_logs: Mutex::new(Vec::new()),
            teleop_log_path: None,
        }
    }
}

struct Episode {
    phantom: String,
    env: NavEnv,
    mode: Mode,
    seed: u64,
    started_ms: u64,
    finished_ms: Option<u64>,
    episode_return: f64,
    motor_ms: f64,
}

impl Episode {
    fn summary(&self) -> EpisodeSummary {
        EpisodeSummary {
            phantom: self.phantom.clone(),
            target: self.env.config().target.clone(),
            mode: self.mode,
            seed: self.seed,
            steps: self.env.state().step_count,
            episode_return: self.episode_return,
            termination: self.env.termination(),
            motor_time_s: self.motor_ms / 1000.0,
            elapsed_s: match (self.mode, self.finished_ms) {
                (Mode::Teleop, Some(end)) => {
                    Some(end.saturating_sub(self.started_ms) as f64 / 1000.0)
                }
                _ => None,
            },
        }
    }
}

/// Result of handling one line.
#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    /// Serialized reply, without a trailing newline.
    pub line: String,
    /// True after `bye`: the connection should close.
    pub close: bool,
}

/// One client connection. Processing is strictly sequential.
pub struct Session {
    pub id: u64,
    shared: Arc<Shared>,
    last_seq: Option<u64>,
    episode: Option<Episode>,
    finished: Vec<EpisodeSummary>,
}

impl Session {
    pub fn new(id: u64, shared: Arc<Shared>) -> Self {
        Self {
            id,
            shared,
            last_seq: None,
            episode: None,
            finished: Vec::new(),
        }
    }

    /// Parses, validates and answers one request line.
    pub fn handle_line(&mut self, line: &str) -> Reply {
        let value: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => return self.error(None, ProtocolError::new(ErrorCode::Parse, e.to_string())),
        };
        let seq = value.get("seq").and_then(Value::as_u64);
        let req: Request = match serde_json::from_value(value) {
            Ok(r) => r,
            Err(e) => return self.error(seq, ProtocolError::new(ErrorCode::Schema, e.to_string())),
        };
        let seq = request_seq(&req);
        if let Some(last) = self.last_seq {
            if seq <= last {
                return self.error(
                    Some(seq),
                    ProtocolError::new(
                        ErrorCode::BadState,
                        format!("seq {seq} is not greater than the previous {last}"),
                    ),
                );
            }
        }
        self.last_seq = Some(seq);
        let close = matches!(req, Request::Bye { .. });
        match self.dispatch(req) {
            Ok(body) => Reply {
                line: self.envelope(Some(seq), body),
                close,
            },
            Err(e) => self.error(Some(seq), e),
        }
    }

    fn envelope(&self, seq: Option<u64>, body: Value) -> String {
        let mut obj = serde_json::Map::new();
        obj.insert("seq".into(), seq.map_or(Value::Null, Value::from));
        if let Value::Object(m) = body {
            obj.extend(m);
        }
        obj.insert("ts".into(), Value::from((self.shared.clock)()));
        Value::Object(obj).to_string()
    }

    fn error(&self, seq: Option<u64>, e: ProtocolError) -> Reply {
        Reply {
            line: self.envelope(
                seq,
                json!({"type": "error", "code": e.code, "detail": e.detail}),
            ),
            close: false,
        }
    }

    fn dispatch(&mut self, req: Request) -> std::result::Result<Value, ProtocolError> {
        match req {
            Request::Hello { .. } => Ok(json!({
                "type": "hello_ack",
                "protocol": PROTOCOL_VERSION,
                "session": self.id,
            })),
            Request::ListPhantoms { .. } => {
                let list: Vec<Value> = self
                    .shared
                    .registry
                    .ids()
                    .map(|id| {
                        let p = self.shared.registry.get(id).expect("listed id");
                        json!({
                            "id": id,
                            "width": p.mask.width(),
                            "height": p.mask.height(),
                            "px_per_mm": p.px_per_mm,
                            "targets": p.target_names(),
                        })
                    })
                    .collect();
                Ok(json!({"type": "phantoms", "phantoms": list}))
            }
            Request::Reset {
                phantom,
                target,
                seed,
                mode,
                render,
                include_path,
                ..
            } => self.reset(phantom, target, seed, mode, render, include_path),
            Request::Step {
                translate_mm,
                rotate_deg,
                render,
                ..
            } => self.step(translate_mm, rotate_deg, render),
            Request::Render { format, .. } => {
                if format != "png" {
                    return Err(ProtocolError::new(
                        ErrorCode::Schema,
                        format!("unsupported format {format:?}, expected \"png\""),
                    ));
                }
                let ep = self.episode.as_ref().ok_or_else(no_episode)?;
                let obs = ep.env.render()?;
                Ok(json!({
                    "type": "frame",
                    "format": "png",
                    "width": obs.width(),
                    "height": obs.height(),
                    "data": encode_png(&obs)?,
                }))
            }
            Request::MotorEcho {
                params,
                translate_mm,
                rotate_deg,
                ..
            } => {
                let p = params.unwrap_or(self.shared.motor);
                let s = schedule(translate_mm, rotate_deg, &p)?;
                Ok(json!({
                    "type": "motor",
                    "params": p,
                    "translate_mm": translate_mm,
                    "rotate_deg": rotate_deg,
                    "push_pull_ms": s.push_pull_ms,
                    "rotation_ms": s.rotation_ms,
                    "push_pull_dir": s.push_pull_dir,
                    "rotation_dir": s.rotation_dir,
                }))
            }
            Request::Metrics { .. } => {
                let current = self.episode.as_ref().map(Episode::summary);
                let teleop: Vec<TeleopLog> =
                    self.shared.teleop_logs.lock().expect("log lock").clone();
                Ok(json!({
                    "type": "metrics",
                    "current": current,
                    "finished": self.finished,
                    "teleop_logs": teleop,
                }))
            }
            Request::SessionLog { log, .. } => {
                if !(log.elapsed_s >= 0.0 && log.elapsed_s.is_finite()) {
                    return Err(ProtocolError::new(
                        ErrorCode::Schema,
                        "elapsed_s must be >= 0",
                    ));
                }
                if let Some(path) = &self.shared.teleop_log_path {
                    append_line(path, &serde_json::to_string(&log).expect("log serializes"))
                        .map_err(|e| ProtocolError::new(ErrorCode::BadState, e.to_string()))?;
                }
                let mut logs = self.shared.teleop_logs.lock().expect("log lock");
                logs.push(log);
                Ok(json!({"type": "session_log_ack", "stored": logs.len()}))
            }
            Request::Bye { .. } => Ok(json!({"type": "bye_ack"})),
        }
    }

    fn reset(
        &mut self,
        phantom: String,
        target: String,
        seed: u64,
        mode: Mode,
        render: bool,
        include_path: bool,
    ) -> std::result::Result<Value, ProtocolError> {
        let mut env = self.shared.cache.get(
            &self.shared.registry,
            &self.shared.env_template,
            &phantom,
            &target,
        )?;
        let obs = env.reset()?;
        if let Some(prev) = self.episode.take() {
            self.finished.push(prev.summary());
        }
        let plan = env.plan().expect("planned at reset");
        let mut body = json!({
            "type": "reset_ack",
            "phantom": phantom,
            "target": target,
            "target_point": env.target(),
            "mode": mode,
            "seed": seed,
            "tip": env.state().tip,
            "heading": env.state().heading,
            "plan_length_mm": env.phantom().px_to_mm(plan.length()),
            "max_steps": env.config().max_steps,
            "limits": env.config().limits,
        });
        if include_path {
            body["path"] = json!(plan.points);
        }
        if render {
            body["observation"] = Value::from(encode_png(&obs)?);
        }
        self.episode = Some(Episode {
            phantom,
            env,
            mode,
            seed,
            started_ms: (self.shared.clock)(),
            finished_ms: None,
            episode_return: 0.0,
            motor_ms: 0.0,
        });
        Ok(body)
    }

    fn step(
        &mut self,
        translate_mm: f64,
        rotate_deg: f64,
        render: bool,
    ) -> std::result::Result<Value, ProtocolError> {
        let now = (self.shared.clock)();
        let motor = self.shared.motor;
        let ep = self.episode.as_mut().ok_or_else(no_episode)?;
        if !ep.env.is_active() {
            return Err(ProtocolError::new(
                ErrorCode::BadState,
                "episode is finished; send reset",
            ));
        }
        let step = ep.env.step(Action::new(translate_mm, rotate_deg))?;
        let cmd = step.info.commanded;
        let m = schedule(cmd.translate_mm, cmd.rotate_deg, &motor)?;
        ep.episode_return += step.reward;
        ep.motor_ms += m.push_pull_ms + m.rotation_ms;
        if step.done {
            ep.finished_ms = Some(now);
        }
        let mut body = json!({
            "type": "step_result",
            "step": step.info.step,
            "reward": step.reward,
            "reward_case": step.info.reward_case,
            "done": step.done,
            "kind": step.info.termination,
            "tip": step.info.tip,
            "heading": step.info.heading,
            "cum_signed_mm": step.info.cum_signed_mm,
            "executed_mm": step.info.executed_mm,
            "truncated": step.info.truncated,
            "command": {
                "translate_mm": cmd.translate_mm,
                "rotate_deg": cmd.rotate_deg,
                "push_pull_ms": m.push_pull_ms,
                "rotation_ms": m.rotation_ms,
            },
        });
        if render {
            body["observation"] = Value::from(encode_png(&step.observation)?);
        }
        Ok(body)
    }
}

fn append_line(path: &Path, line: &str) -> std::io::Result<()> {
    use std::io::Write as _;
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    writeln!(f, "{line}")
}

/// Reads teleop logs written by a server (one JSON object per line).
pub fn read_teleop_logs(path: impl AsRef<Path>) -> Result<Vec<TeleopLog>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: Some(path.to_path_buf()),
                field: None,
                line: Some(i + 1),
                message: e.to_string(),
            })
        })
        .collect()
}

fn no_episode() -> ProtocolError {
    ProtocolError::new(ErrorCode::BadState, "no active episode; send reset first")
}

fn request_seq(r: &Request) -> u64 {
    match r {
        Request::Hello { seq, .. }
        | Request::ListPhantoms { seq }
        | Request::Reset { seq, .. }
        | Request::Step { seq, .. }
        | Request::Render { seq, .. }
        | Request::MotorEcho { seq, .. }
        | Request::Metrics { seq }
        | Request::SessionLog { seq, .. }
        | Request::Bye { seq } => *seq,
    }
}

fn encode_png(obs: &Observation) -> std::result::Result<String, ProtocolError> {
    let png = obs.to_png()?;
    Ok(base64::engine::general_purpose::STANDARD.encode(png))
}

/// Replaces every `"ts":<digits>` with `"ts":0` so transcripts can be compared.
pub fn mask_timestamps(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut rest = line;
    const KEY: &str = "\"ts\":";
    while let Some(i) = rest.find(KEY) {
        out.push_str(&rest[..i + KEY.len()]);
        rest = &rest[i + KEY.len()..];
        let digits = rest.bytes().take_while(u8::is_ascii_digit).count();
        if digits > 0 {
            out.push('0');
            rest = &rest[digits..];
        }
    }
    out.push_str(rest);
    out
}

/// Decodes a base64 PNG carried in a reply.
pub fn decode_observation(data: &str) -> Result<image::RgbImage> {
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(data)
        .map_err(|e| Error::InvalidParams(format!("bad base64: {e}")))?;
    Ok(image::load_from_memory(&bytes)?.to_rgb8())
}

/// The tip a `step_result` or `reset_ack` reply reports.
pub fn reply_tip(reply: &Value) -> Option<Point> {
    serde_json::from_value(reply.get("tip")?.clone()).ok()
}
