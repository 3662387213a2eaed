//! Command-line front end: phantom generation, planning, policy runs,
//! Q-learning, the protocol server and the time-comparison report.
//!
//! Every subcommand writes under `--out-dir` and leaves a `manifest.json`
//! naming its inputs, seed, outputs and a SHA-256 hash of the effective
//! configuration.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::actuation::MotorParams;
use crate::agents::{
    q_learning_train, GreedyParams, GreedyPolicy, Policy, QLearningParams, QPolicy, QTable,
    RandomPolicy,
};
use crate::env::{base_image, EnvConfig, NavEnv};
use crate::error::{Error, Result};
use crate::geom::Pixel;
use crate::metrics::{
    evaluate_with_motor, metrics_csv, render_trajectories, summarize_with, trajectories_svg,
    EpisodeRecord, MeanStd,
};
use crate::phantom::{
    generate_aorta_phantom_scaled, generate_corridor, load_phantom, save_phantom, standard_aorta,
    VesselPhantom, DEFAULT_LUMEN_MM, DEFAULT_PX_PER_MM, DEFAULT_SEED, DEFAULT_SIZE,
};
use crate::planner::{plan_bda_star, CenteringMode, Connectivity};
use crate::raster::{distance_transform, ndt_heatmap};
use crate::service::{self, PhantomRegistry, ServerConfig, Shared, Transcript};

/// Settings file (`--config`, TOML). Every section is optional.
///
/// ```toml
/// seed = 7
/// out_dir = "out"
///
/// [env]
/// max_steps = 50
/// target = "BCA"
/// [env.limits]
/// max_translate_mm = 20.0
/// max_rotate_deg = 90.0
/// [env.planner]
/// omega = 2.0
/// centering_mode = "penalize_boundary"
/// [env.reward]
/// delta_px = 40.0
///
/// [motor]
/// rpm = 60.0
/// d = 1.0
/// r = 10.0
/// epsilon = 0.0
/// c = 1.0
///
/// [greedy]
/// recovery_px = 24.0
///
/// [q_learning]
/// alpha = 0.2
/// gamma = 0.95
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub env: EnvConfig,
    pub motor: MotorParams,
    pub greedy: GreedyParams,
    pub q_learning: QLearningParams,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            out_dir: PathBuf::from("out"),
            env: EnvConfig::default(),
            motor: MotorParams::default(),
            greedy: GreedyParams::default(),
            q_learning: QLearningParams::default(),
        }
    }
}

impl Settings {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: Some(path.to_path_buf()),
            field: None,
            line: e.span().map(|s| text[..s.start].lines().count().max(1)),
            message: e.message().to_string(),
        })
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("settings serialize");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "vascnav",
    version,
    about = "Vessel phantoms, boundary-aware planning and guidewire navigation"
)]
pub struct Cli {
    /// TOML settings file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed from the settings file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the output directory from the settings file.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate or inspect phantoms.
    #[command(subcommand)]
    Phantom(PhantomCmd),
    /// Plan a path and write it as CSV and SVG.
    Plan(PlanArgs),
    /// Run a policy for several episodes and write records and metrics.
    Run(RunArgs),
    /// Train the tabular Q-learning agent.
    TrainQ(TrainArgs),
    /// Serve the JSON-lines protocol over TCP and WebSocket.
    Serve(ServeArgs),
    /// Merge autonomous records and teleop logs into a time comparison.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum PhantomCmd {
    /// Write a phantom mask and its JSON sidecar.
    Gen(GenArgs),
    /// Describe a phantom and render it with its planned paths.
    Show(ShowArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PhantomKind {
    Aorta,
    Corridor,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "aorta")]
    pub kind: PhantomKind,
    #[arg(long, default_value_t = DEFAULT_SIZE)]
    pub width: usize,
    #[arg(long, default_value_t = DEFAULT_SIZE)]
    pub height: usize,
    /// Aorta lumen width, mm.
    #[arg(long, default_value_t = DEFAULT_LUMEN_MM)]
    pub lumen_mm: f64,
    /// Corridor length, mm.
    #[arg(long, default_value_t = 100.0)]
    pub length_mm: f64,
    /// Corridor width, mm.
    #[arg(long, default_value_t = 10.0)]
    pub corridor_width_mm: f64,
    #[arg(long, default_value_t = DEFAULT_PX_PER_MM)]
    pub px_per_mm: f64,
    /// Mask file name inside the output directory (.png or .pgm).
    #[arg(long, default_value = "phantom.png")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct ShowArgs {
    /// `aorta`, `corridor`, or a mask/sidecar path.
    pub phantom: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    PenalizeBoundary,
    RawHeatmap,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// `aorta`, `corridor`, or a mask/sidecar path.
    #[arg(long, default_value = "aorta")]
    pub phantom: String,
    /// Named target; ignored when --goal is given.
    #[arg(long)]
    pub target: Option<String>,
    /// Start pixel `x,y`; defaults to the phantom start.
    #[arg(long, value_parser = parse_pixel)]
    pub start: Option<Pixel>,
    /// Goal pixel `x,y`.
    #[arg(long, value_parser = parse_pixel)]
    pub goal: Option<Pixel>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// 4 or 8.
    #[arg(long)]
    pub connectivity: Option<u8>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    Greedy,
    Random,
    Q,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_enum, default_value = "greedy")]
    pub policy: PolicyArg,
    /// Q-table JSON (required for `--policy q`).
    #[arg(long)]
    pub q_table: Option<PathBuf>,
    #[arg(long, default_value = "aorta")]
    pub phantom: String,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, default_value_t = 20)]
    pub episodes: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value = "corridor")]
    pub phantom: String,
    #[arg(long, default_value = "END")]
    pub target: String,
    #[arg(long, default_value_t = 2000)]
    pub episodes: usize,
    /// Greedy-policy evaluation episodes after training.
    #[arg(long, default_value_t = 50)]
    pub eval_episodes: usize,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7878")]
    pub tcp: std::net::SocketAddr,
    /// WebSocket address; omit to disable.
    #[arg(long)]
    pub ws: Option<std::net::SocketAddr>,
    /// Extra phantoms as `id=path`.
    #[arg(long = "add-phantom", value_parser = parse_named_path)]
    pub add_phantom: Vec<(String, PathBuf)>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Records JSON-lines files written by `run`.
    #[arg(long = "records", required = true)]
    pub records: Vec<PathBuf>,
    /// Teleop log JSON-lines files written by `serve`.
    #[arg(long = "teleop")]
    pub teleop: Vec<PathBuf>,
}

fn parse_pixel(s: &str) -> std::result::Result<Pixel, String> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| format!("expected x,y, got {s:?}"))?;
    let p = |v: &str| v.trim().parse::<i32>().map_err(|e| format!("{v:?}: {e}"));
    Ok(Pixel::new(p(x)?, p(y)?))
}

fn parse_named_path(s: &str) -> std::result::Result<(String, PathBuf), String> {
    let (id, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected id=path, got {s:?}"))?;
    Ok((id.to_string(), PathBuf::from(path)))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(Error::Usage(e.to_string().trim_end().to_string())),
    };
    execute(cli)
}

pub fn execute(cli: Cli) -> Result<()> {
    let mut settings = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    if let Some(s) = cli.seed {
        settings.seed = s;
    }
    if let Some(d) = &cli.out_dir {
        settings.out_dir = d.clone();
    }
    std::fs::create_dir_all(&settings.out_dir)?;
    let mut out = Outputs::new(&settings, cli.config.clone());
    match cli.command {
        Command::Phantom(PhantomCmd::Gen(a)) => phantom_gen(&settings, &mut out, a)?,
        Command::Phantom(PhantomCmd::Show(a)) => phantom_show(&settings, &mut out, a)?,
        Command::Plan(a) => plan(&settings, &mut out, a)?,
        Command::Run(a) => run(&settings, &mut out, a)?,
        Command::TrainQ(a) => train_q(&settings, &mut out, a)?,
        Command::Serve(a) => serve(&settings, &mut out, a)?,
        Command::Report(a) => report(&settings, &mut out, a)?,
    }
    out.write_manifest()
}

/// Tracks files for the manifest.
struct Outputs {
    dir: PathBuf,
    command: String,
    inputs: BTreeMap<String, String>,
    files: Vec<String>,
    seed: u64,
    config: Option<PathBuf>,
    hash: String,
}

impl Outputs {
    fn new(s: &Settings, config: Option<PathBuf>) -> Self {
        Self {
            dir: s.out_dir.clone(),
            command: String::new(),
            inputs: BTreeMap::new(),
            files: Vec::new(),
            seed: s.seed,
            config,
            hash: s.hash(),
        }
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let p = self.path(name);
        std::fs::write(&p, contents)?;
        Ok(p)
    }

    fn input(&mut self, key: &str, value: impl ToString) {
        self.inputs.insert(key.to_string(), value.to_string());
    }

    fn write_manifest(&self) -> Result<()> {
        let m = serde_json::json!({
            "tool": "vascnav",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config_file": self.config,
            "config_sha256": self.hash,
            "seed": self.seed,
            "inputs": self.inputs,
            "outputs": self.files,
        });
        std::fs::write(
            self.dir.join("manifest.json"),
            serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n",
        )?;
        Ok(())
    }
}

/// Built-in name or mask/sidecar path.
pub fn resolve_phantom(name: &str) -> Result<VesselPhantom> {
    match name {
        "aorta" => Ok(standard_aorta()),
        "corridor" => generate_corridor(100.0, 10.0, 2.0),
        path => load_phantom(path),
    }
}

fn default_target(phantom: &VesselPhantom, settings: &Settings) -> String {
    if phantom.targets.contains_key(&settings.env.target) {
        settings.env.target.clone()
    } else {
        phantom.target_names()[0].clone()
    }
}

fn phantom_gen(s: &Settings, out: &mut Outputs, a: GenArgs) -> Result<()> {
    out.command = "phantom gen".into();
    let ph = match a.kind {
        PhantomKind::Aorta => {
            out.input("kind", "aorta");
            out.input("size", format!("{}x{}", a.width, a.height));
            out.input("lumen_mm", a.lumen_mm);
            generate_aorta_phantom_scaled(a.width, a.height, a.lumen_mm, a.px_per_mm, s.seed)?
        }
        PhantomKind::Corridor => {
            out.input("kind", "corridor");
            out.input("length_mm", a.length_mm);
            out.input("width_mm", a.corridor_width_mm);
            generate_corridor(a.length_mm, a.corridor_width_mm, a.px_per_mm)?
        }
    };
    let mask = out.path(&a.name);
    save_phantom(&ph, &mask)?;
    let sidecar = crate::phantom::sidecar_path(&mask);
    out.files.push(
        sidecar
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
    );
    println!(
        "wrote {} ({} vessel px)",
        mask.display(),
        ph.mask.vessel_count()
    );
    Ok(())
}

fn phantom_show(s: &Settings, out: &mut Outputs, a: ShowArgs) -> Result<()> {
    out.command = "phantom show".into();
    out.input("phantom", &a.phantom);
    let ph = resolve_phantom(&a.phantom)?;
    println!(
        "{}x{} px, {} px/mm, {} vessel px, start {:?}",
        ph.mask.width(),
        ph.mask.height(),
        ph.px_per_mm,
        ph.mask.vessel_count(),
        ph.start
    );
    let heat = ndt_heatmap(&ph.mask)?;
    let mut plans = Vec::new();
    for name in ph.target_names() {
        let goal = ph.target(&name)?;
        let plan = plan_bda_star(&ph.mask, &heat, ph.start, goal, &s.env.planner)?;
        println!(
            "  {name}: {:?}, path {:.1} mm",
            goal,
            ph.px_to_mm(plan.length())
        );
        plans.push(plan);
    }
    let mut img = render_trajectories(&[], &ph, None);
    for plan in &plans {
        for p in &plan.points {
            img.put_pixel(p.x as u32, p.y as u32, image::Rgb([40, 90, 230]));
        }
    }
    for t in ph.targets.values() {
        for dy in -2..=2 {
            for dx in -2..=2 {
                let q = Pixel::new(t.x + dx, t.y + dy);
                if ph.mask.in_bounds(q) {
                    img.put_pixel(q.x as u32, q.y as u32, image::Rgb([40, 200, 60]));
                }
            }
        }
    }
    let p = out.path("phantom_show.png");
    img.save(&p)?;
    println!("wrote {}", p.display());
    Ok(())
}

fn plan(s: &Settings, out: &mut Outputs, a: PlanArgs) -> Result<()> {
    out.command = "plan".into();
    out.input("phantom", &a.phantom);
    let ph = resolve_phantom(&a.phantom)?;
    let mut cfg = s.env.planner;
    if let Some(w) = a.omega {
        cfg.omega = w;
    }
    if let Some(m) = a.mode {
        cfg.centering_mode = match m {
            ModeArg::PenalizeBoundary => CenteringMode::PenalizeBoundary,
            ModeArg::RawHeatmap => CenteringMode::RawHeatmap,
        };
    }
    if let Some(c) = a.connectivity {
        cfg.connectivity = match c {
            4 => Connectivity::Four,
            8 => Connectivity::Eight,
            other => {
                return Err(Error::Config(format!(
                    "connectivity must be 4 or 8, got {other}"
                )))
            }
        };
    }
    let start = a.start.unwrap_or(ph.start);
    let goal = match a.goal {
        Some(g) => g,
        None => ph.target(&a.target.clone().unwrap_or_else(|| default_target(&ph, s)))?,
    };
    out.input("start", format!("{},{}", start.x, start.y));
    out.input("goal", format!("{},{}", goal.x, goal.y));
    out.input("omega", cfg.omega);
    let heat = ndt_heatmap(&ph.mask)?;
    let plan = plan_bda_star(&ph.mask, &heat, start, goal, &cfg)?;
    let dt = distance_transform(&ph.mask);
    out.write("path.csv", plan.to_csv())?;
    let base = base_image(&ph);
    let (w, h) = base.dimensions();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{w}" height="{h}" fill="rgb(200,200,200)"/>"#
    );
    for (i, v) in ph.mask.cells().iter().enumerate() {
        if *v != 0 {
            let p = ph.mask.pixel_at(i);
            let _ = writeln!(
                svg,
                r#"<rect x="{}" y="{}" width="1" height="1" fill="rgb(70,70,70)"/>"#,
                p.x, p.y
            );
        }
    }
    let _ = writeln!(
        svg,
        r#"<polyline fill="none" stroke="rgb(40,90,230)" stroke-width="1.5" points="{}"/>"#,
        plan.svg_points()
    );
    svg.push_str("</svg>\n");
    out.write("path.svg", svg)?;
    println!(
        "path: {} points, {:.2} px ({:.2} mm), total cost {}, mean boundary distance {:.4} px",
        plan.len(),
        plan.length(),
        ph.px_to_mm(plan.length()),
        plan.total_cost,
        plan.mean_field(&dt)
    );
    Ok(())
}

fn make_env_factory(
    ph: Arc<VesselPhantom>,
    cfg: EnvConfig,
) -> Result<impl FnMut() -> Result<NavEnv>> {
    let mut env = NavEnv::new(ph, cfg)?;
    env.reset()?;
    Ok(move || Ok(env.clone()))
}

fn run(s: &Settings, out: &mut Outputs, a: RunArgs) -> Result<()> {
    out.command = "run".into();
    out.input("phantom", &a.phantom);
    let ph = Arc::new(resolve_phantom(&a.phantom)?);
    let target = a.target.clone().unwrap_or_else(|| default_target(&ph, s));
    out.input("target", &target);
    out.input("episodes", a.episodes);
    let cfg = EnvConfig {
        target: target.clone(),
        ..s.env.clone()
    };
    let mut policy: Box<dyn Policy> = match a.policy {
        PolicyArg::Greedy => Box::new(GreedyPolicy::new(s.greedy)),
        PolicyArg::Random => Box::new(RandomPolicy::new(s.seed, cfg.limits)),
        PolicyArg::Q => {
            let path = a
                .q_table
                .as_ref()
                .ok_or_else(|| Error::Config("--policy q needs --q-table".into()))?;
            out.input("q_table", path.display());
            Box::new(QPolicy::new(QTable::load(path)?))
        }
    };
    out.input("policy", policy.name());
    let factory = make_env_factory(ph.clone(), cfg.clone())?;
    let plan = factory_plan(&ph, &cfg)?;
    let records = evaluate_with_motor(policy.as_mut(), factory, a.episodes, s.seed, &s.motor)?;
    write_records(out, &records)?;
    let dt = distance_transform(&ph.mask);
    out.write("metrics.csv", metrics_csv(&records, &dt)?)?;
    let img = render_trajectories(&records, &ph, Some(&plan));
    img.save(out.path("trajectories.png"))?;
    out.write(
        "trajectories.svg",
        trajectories_svg(&records, &ph, Some(&plan))?,
    )?;
    print_summary(&records, &dt)?;
    Ok(())
}

fn factory_plan(ph: &Arc<VesselPhantom>, cfg: &EnvConfig) -> Result<crate::planner::PathPlan> {
    let mut env = NavEnv::new(ph.clone(), cfg.clone())?;
    env.reset()?;
    Ok(env.plan().expect("planned").clone())
}

fn write_records(out: &mut Outputs, records: &[EpisodeRecord]) -> Result<()> {
    let mut text = String::new();
    let mut steps = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("record serializes"));
        text.push('\n');
        steps.push_str(&r.step_log());
    }
    out.write("records.jsonl", text)?;
    out.write("steps.jsonl", steps)?;
    Ok(())
}

fn print_summary(records: &[EpisodeRecord], dt: &crate::raster::ScalarField) -> Result<()> {
    let m = summarize_with(records, dt)?;
    println!("episodes        {}", m.episodes);
    println!("success rate    {:.3}", m.success_rate);
    println!("episode reward  {}", m.episode_reward);
    println!("episode length  {}", m.episode_length);
    println!("movement mm     {}", m.movement_distance_mm);
    println!("boundary px     {}", m.boundary_distance_px);
    println!("retracement mm  {}", m.retracement_distance_mm);
    Ok(())
}

fn train_q(s: &Settings, out: &mut Outputs, a: TrainArgs) -> Result<()> {
    out.command = "train-q".into();
    out.input("phantom", &a.phantom);
    out.input("target", &a.target);
    out.input("episodes", a.episodes);
    let ph = Arc::new(resolve_phantom(&a.phantom)?);
    let cfg = EnvConfig {
        target: a.target.clone(),
        ..s.env.clone()
    };
    let run = q_learning_train(
        make_env_factory(ph.clone(), cfg.clone())?,
        a.episodes,
        s.seed,
        &s.q_learning,
    )?;
    run.table.save(out.path("q_table.json"))?;
    out.write("training_curve.csv", run.curve_csv())?;
    println!("{} states visited", run.table.len());
    if a.eval_episodes > 0 {
        let mut policy = QPolicy::new(run.table);
        let records = evaluate_with_motor(
            &mut policy,
            make_env_factory(ph.clone(), cfg)?,
            a.eval_episodes,
            s.seed,
            &s.motor,
        )?;
        let dt = distance_transform(&ph.mask);
        out.write("eval_metrics.csv", metrics_csv(&records, &dt)?)?;
        print_summary(&records, &dt)?;
    }
    Ok(())
}

fn serve(s: &Settings, out: &mut Outputs, a: ServeArgs) -> Result<()> {
    out.command = "serve".into();
    let mut registry = PhantomRegistry::with_defaults()?;
    for (id, path) in &a.add_phantom {
        registry.insert(id.clone(), load_phantom(path)?);
        out.input(&format!("phantom:{id}"), path.display());
    }
    let clock = service::system_clock();
    let mut shared = Shared::new(registry, s.env.clone(), clock.clone());
    shared.motor = s.motor;
    shared.teleop_log_path = Some(out.path("teleop_logs.jsonl"));
    let transcript = Transcript::create(out.path("transcript.jsonl"), clock)?;
    // the manifest is written up front because serving runs until interrupted
    out.write_manifest()?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    rt.block_on(async {
        let cfg = ServerConfig {
            tcp_addr: a.tcp,
            ws_addr: a.ws,
            transcript: Some(transcript),
        };
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        let (handle, run) = service::serve(Arc::new(shared), cfg, shutdown).await?;
        println!("tcp listening on {}", handle.tcp_addr);
        if let Some(ws) = handle.ws_addr {
            println!("websocket listening on {ws}");
        }
        run.await;
        println!("shut down");
        Ok::<(), Error>(())
    })
}

/// Mean navigation time per (mode, target).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeRow {
    pub mode: String,
    pub target: String,
    pub episodes: usize,
    pub successes: usize,
    pub time_s: MeanStd,
}

/// Autonomous time is the simulated motor run time of each episode; teleop
/// time is the wall-clock time the console reported.
pub fn time_comparison(records: &[EpisodeRecord], teleop: &[service::TeleopLog]) -> Vec<TimeRow> {
    let mut groups: BTreeMap<(String, String), (Vec<f64>, usize)> = BTreeMap::new();
    for r in records {
        let g = groups
            .entry(("autonomous".into(), r.target.clone()))
            .or_default();
        g.0.push(r.motor_time_s());
        g.1 += usize::from(r.is_success());
    }
    for t in teleop {
        let g = groups
            .entry(("teleop".into(), t.target.clone()))
            .or_default();
        g.0.push(t.elapsed_s);
        g.1 += usize::from(t.success);
    }
    groups
        .into_iter()
        .map(|((mode, target), (times, successes))| TimeRow {
            mode,
            target,
            episodes: times.len(),
            successes,
            time_s: MeanStd::of(&times),
        })
        .collect()
}

pub fn time_comparison_csv(rows: &[TimeRow]) -> String {
    let mut out = String::from("mode,target,episodes,successes,mean_time_s,std_time_s\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.mode, r.target, r.episodes, r.successes, r.time_s.mean, r.time_s.std
        );
    }
    out
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<EpisodeRecord>> {
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

fn report(_s: &Settings, out: &mut Outputs, a: ReportArgs) -> Result<()> {
    out.command = "report".into();
    let mut records = Vec::new();
    for (i, p) in a.records.iter().enumerate() {
        out.input(&format!("records{i}"), p.display());
        records.extend(read_records(p)?);
    }
    let mut teleop = Vec::new();
    for (i, p) in a.teleop.iter().enumerate() {
        out.input(&format!("teleop{i}"), p.display());
        teleop.extend(service::read_teleop_logs(p)?);
    }
    let rows = time_comparison(&records, &teleop);
    let csv = time_comparison_csv(&rows);
    out.write("time_comparison.csv", &csv)?;
    print!("{csv}");
    Ok(())
}
