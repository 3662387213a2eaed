//! Episode recording, aggregate navigation metrics and trajectory renders.

use std::fmt::Write as _;

use base64::Engine as _;
use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::actuation::{schedule, MotorParams};
use crate::agents::{Policy, PolicyInput};
use crate::env::{base_image, NavEnv, Termination};
use crate::error::{Error, Result};
use crate::geom::{Pixel, Point};
use crate::phantom::VesselPhantom;
use crate::planner::PathPlan;
use crate::raster::{distance_transform, ScalarField};
use crate::simulator::Action;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub action: Action,
    pub executed_mm: f64,
    pub tip: Point,
    pub reward: f64,
    /// Motor run time for the command (push-pull then rotation), ms.
    pub motor_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub seed: u64,
    pub policy: String,
    pub target: String,
    pub steps: Vec<StepRecord>,
    pub termination: Termination,
    pub episode_return: f64,
    pub length: usize,
}

impl EpisodeRecord {
    pub fn is_success(&self) -> bool {
        self.termination == Termination::Success
    }

    /// Total travel, forward and backward, mm.
    pub fn movement_mm(&self) -> f64 {
        self.steps.iter().map(|s| s.executed_mm.abs()).sum()
    }

    /// Backward travel only, mm.
    pub fn retracement_mm(&self) -> f64 {
        self.steps.iter().map(|s| (-s.executed_mm).max(0.0)).sum()
    }

    /// Mean distance-transform value at the visited tips; `None` without steps.
    pub fn boundary_distance_px(&self, dist: &ScalarField) -> Option<f64> {
        if self.steps.is_empty() {
            return None;
        }
        let sum: f64 = self.steps.iter().map(|s| dist.at(s.tip.pixel())).sum();
        Some(sum / self.steps.len() as f64)
    }

    /// Simulated robot time: sum of motor run times, seconds.
    pub fn motor_time_s(&self) -> f64 {
        self.steps.iter().map(|s| s.motor_ms).sum::<f64>() / 1000.0
    }

    /// One JSON object per step, newline separated.
    pub fn step_log(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.steps.iter().enumerate() {
            let line = serde_json::json!({
                "episode": self.episode,
                "step": i + 1,
                "action": s.action,
                "executed_mm": s.executed_mm,
                "tip": s.tip,
                "reward": s.reward,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}

/// Runs `n_episodes` episodes; episode `i` resets the policy with a seed
/// derived from `seed` and `i`.
pub fn evaluate(
    policy: &mut dyn Policy,
    make_env: impl FnMut() -> Result<NavEnv>,
    n_episodes: usize,
    seed: u64,
) -> Result<Vec<EpisodeRecord>> {
    evaluate_with_motor(policy, make_env, n_episodes, seed, &MotorParams::default())
}

pub fn episode_seed(seed: u64, episode: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(episode as u64)
}

pub fn evaluate_with_motor(
    policy: &mut dyn Policy,
    mut make_env: impl FnMut() -> Result<NavEnv>,
    n_episodes: usize,
    seed: u64,
    motor: &MotorParams,
) -> Result<Vec<EpisodeRecord>> {
    if n_episodes == 0 {
        return Err(Error::Config("n_episodes must be >= 1".into()));
    }
    let mut records = Vec::with_capacity(n_episodes);
    for episode in 0..n_episodes {
        let ep_seed = episode_seed(seed, episode);
        let mut env = make_env()?;
        policy.reset(ep_seed);
        let mut obs = env.reset()?;
        let mut steps = Vec::new();
        let mut ret = 0.0;
        let termination = loop {
            let action = policy.act(&PolicyInput::from_env(&env, Some(&obs)));
            let step = env.step(action)?;
            let cmd = step.info.commanded;
            let m = schedule(cmd.translate_mm, cmd.rotate_deg, motor)?;
            ret += step.reward;
            steps.push(StepRecord {
                action: cmd,
                executed_mm: step.info.executed_mm,
                tip: step.info.tip,
                reward: step.reward,
                motor_ms: m.push_pull_ms + m.rotation_ms,
            });
            obs = step.observation;
            if let Some(t) = step.info.termination {
                break t;
            }
        };
        records.push(EpisodeRecord {
            episode,
            seed: ep_seed,
            policy: policy.name().to_string(),
            target: env.config().target.clone(),
            length: steps.len(),
            steps,
            termination,
            episode_return: ret,
        });
    }
    Ok(records)
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.max(0.0).sqrt(),
        }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.2}±{:.2}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub episodes: usize,
    pub success_rate: f64,
    pub episode_reward: MeanStd,
    pub episode_length: MeanStd,
    pub movement_distance_mm: MeanStd,
    pub boundary_distance_px: MeanStd,
    pub retracement_distance_mm: MeanStd,
}

/// Aggregates records. Boundary distance is averaged per step within an
/// episode, then across episodes (episodes without steps are skipped).
pub fn summarize(records: &[EpisodeRecord], phantom: &VesselPhantom) -> Result<MetricsSummary> {
    summarize_with(records, &distance_transform(&phantom.mask))
}

pub fn summarize_with(records: &[EpisodeRecord], dist: &ScalarField) -> Result<MetricsSummary> {
    if records.is_empty() {
        return Err(Error::Config("cannot summarize zero records".into()));
    }
    let col = |f: &dyn Fn(&EpisodeRecord) -> f64| -> Vec<f64> { records.iter().map(f).collect() };
    let boundary: Vec<f64> = records
        .iter()
        .filter_map(|r| r.boundary_distance_px(dist))
        .collect();
    Ok(MetricsSummary {
        episodes: records.len(),
        success_rate: records.iter().filter(|r| r.is_success()).count() as f64
            / records.len() as f64,
        episode_reward: MeanStd::of(&col(&|r| r.episode_return)),
        episode_length: MeanStd::of(&col(&|r| r.length as f64)),
        movement_distance_mm: MeanStd::of(&col(&|r| r.movement_mm())),
        boundary_distance_px: MeanStd::of(&boundary),
        retracement_distance_mm: MeanStd::of(&col(&|r| r.retracement_mm())),
    })
}

/// One row per episode plus a trailing `summary` row (mean values).
pub fn metrics_csv(records: &[EpisodeRecord], dist: &ScalarField) -> Result<String> {
    let summary = summarize_with(records, dist)?;
    let mut out = String::from(
        "episode,target,termination,success,return,length,movement_mm,boundary_px,retracement_mm,motor_time_s\n",
    );
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.episode,
            r.target,
            termination_name(r.termination),
            u8::from(r.is_success()),
            r.episode_return,
            r.length,
            r.movement_mm(),
            r.boundary_distance_px(dist)
                .map_or(String::new(), |v| v.to_string()),
            r.retracement_mm(),
            r.motor_time_s(),
        );
    }
    let motor = MeanStd::of(
        &records
            .iter()
            .map(EpisodeRecord::motor_time_s)
            .collect::<Vec<_>>(),
    );
    let _ = writeln!(
        out,
        "summary,{},,{},{},{},{},{},{},{}",
        records[0].target,
        summary.success_rate,
        summary.episode_reward.mean,
        summary.episode_length.mean,
        summary.movement_distance_mm.mean,
        summary.boundary_distance_px.mean,
        summary.retracement_distance_mm.mean,
        motor.mean,
    );
    Ok(out)
}

pub fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::Success => "success",
        Termination::OutOfRange => "out_of_range",
        Termination::Timeout => "timeout",
    }
}

const PALETTE: [[u8; 3]; 8] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 160, 25],
    [145, 30, 180],
    [70, 200, 220],
    [240, 50, 230],
    [170, 110, 40],
    [0, 128, 128],
];

pub fn episode_color(i: usize) -> [u8; 3] {
    PALETTE[i % PALETTE.len()]
}

/// Phantom background, planned path, and one colored marker per visited tip.
/// Markers are clipped to vessel pixels.
pub fn render_trajectories(
    records: &[EpisodeRecord],
    phantom: &VesselPhantom,
    plan: Option<&PathPlan>,
) -> RgbImage {
    let base = base_image(phantom);
    let mut img = RgbImage::from_fn(base.width(), base.height(), |x, y| {
        let v = base.get_pixel(x, y)[0];
        Rgb([v, v, v])
    });
    if let Some(plan) = plan {
        for p in &plan.points {
            img.put_pixel(p.x as u32, p.y as u32, Rgb([40, 90, 230]));
        }
    }
    for (i, r) in records.iter().enumerate() {
        let c = Rgb(episode_color(i));
        for s in &r.steps {
            let t = s.tip.pixel();
            for (dx, dy) in [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)] {
                let q = Pixel::new(t.x + dx, t.y + dy);
                if phantom.mask.is_vessel(q) {
                    img.put_pixel(q.x as u32, q.y as u32, c);
                }
            }
        }
    }
    img
}

/// SVG version of [`render_trajectories`]: mask as an embedded PNG, path as a
/// polyline, each episode as a colored polyline with tip markers.
pub fn trajectories_svg(
    records: &[EpisodeRecord],
    phantom: &VesselPhantom,
    plan: Option<&PathPlan>,
) -> Result<String> {
    let base = base_image(phantom);
    let mut png = std::io::Cursor::new(Vec::new());
    base.write_to(&mut png, image::ImageFormat::Png)?;
    let b64 = base64::engine::general_purpose::STANDARD.encode(png.into_inner());
    let (w, h) = base.dimensions();
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(
        out,
        r#"<image width="{w}" height="{h}" href="data:image/png;base64,{b64}"/>"#
    );
    if let Some(plan) = plan {
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="rgb(40,90,230)" stroke-width="1.5" points="{}"/>"#,
            plan.svg_points()
        );
    }
    for (i, r) in records.iter().enumerate() {
        let [cr, cg, cb] = episode_color(i);
        let pts: Vec<String> = r
            .steps
            .iter()
            .map(|s| format!("{:.1},{:.1}", s.tip.x, s.tip.y))
            .collect();
        let _ = writeln!(
            out,
            r#"<g stroke="rgb({cr},{cg},{cb})" fill="rgb({cr},{cg},{cb})"><polyline fill="none" stroke-width="1" points="{}"/>"#,
            pts.join(" ")
        );
        for s in &r.steps {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.1}" cy="{:.1}" r="2"/>"#,
                s.tip.x, s.tip.y
            );
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    Ok(out)
}
