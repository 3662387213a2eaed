//! Episodic navigation environment: plan once at reset, render explicit
//! observations, score steps with the path-navigation reward, and enforce
//! termination.

use std::sync::Arc;

use image::{GrayImage, Luma, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Pixel, Point};
use crate::phantom::VesselPhantom;
use crate::planner::{
    nearest_path_index, plan_bda_star, remaining_length, PathPlan, PlannerConfig,
};
use crate::raster::{ndt_heatmap, ScalarField};
use crate::simulator::{sim_reset, sim_step, Action, ActionLimits, GuidewireState, StepDelta};

/// Gray level of background and lumen in the synthetic camera frame.
pub const BACKGROUND_GRAY: u8 = 200;
pub const LUMEN_GRAY: u8 = 70;

/// Radii, colors and blend factors for the tip, target and path marks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OverlayConfig {
    pub tip_radius: f64,
    pub target_radius: f64,
    pub path_radius: f64,
    pub tip_color: [u8; 3],
    pub target_color: [u8; 3],
    pub path_color: [u8; 3],
    pub tip_alpha: f64,
    pub target_alpha: f64,
    pub path_alpha: f64,
}

impl Default for OverlayConfig {
    fn default() -> Self {
        Self {
            tip_radius: 6.0,
            target_radius: 8.0,
            path_radius: 1.0,
            tip_color: [230, 40, 40],
            target_color: [40, 200, 60],
            path_color: [40, 90, 230],
            tip_alpha: 1.0,
            target_alpha: 0.8,
            path_alpha: 0.6,
        }
    }
}

impl OverlayConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("tip_radius", self.tip_radius),
            ("target_radius", self.target_radius),
            ("path_radius", self.path_radius),
        ] {
            if !(r >= 1.0 && r.is_finite()) {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        for (name, a) in [
            ("tip_alpha", self.tip_alpha),
            ("target_alpha", self.target_alpha),
            ("path_alpha", self.path_alpha),
        ] {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Parameters of the three-case reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    /// Fixed reward when the tip is within `delta_px` of the target.
    pub success: f64,
    /// Penalty when cumulative movement leaves `[-backward_limit_mm, forward_limit_mm]`.
    pub boundary: f64,
    pub delta_px: f64,
    pub forward_limit_mm: f64,
    pub backward_limit_mm: f64,
    /// Weight of the distance-to-path exponent, 1/px.
    pub omega1: f64,
    /// Weight of the remaining path length, 1/px.
    pub omega2: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            success: 50.0,
            boundary: -50.0,
            delta_px: 40.0,
            forward_limit_mm: 400.0,
            backward_limit_mm: 40.0,
            omega1: 0.005,
            omega2: 0.01,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_px > 0.0) {
            return Err(Error::Config("delta_px must be > 0".into()));
        }
        if !(self.success > 0.0 && self.boundary < 0.0) {
            return Err(Error::Config("need success > 0 > boundary".into()));
        }
        if !(self.forward_limit_mm > 0.0 && self.backward_limit_mm > 0.0) {
            return Err(Error::Config("movement limits must be > 0".into()));
        }
        if !(self.omega1 >= 0.0 && self.omega2 >= 0.0) {
            return Err(Error::Config("reward weights must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardCase {
    Success,
    Boundary,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reward {
    pub value: f64,
    pub case: RewardCase,
}

/// Scores a tip position against the planned path.
pub fn compute_reward(
    tip: Point,
    plan: &PathPlan,
    target: Point,
    cum_signed_mm: f64,
    cfg: &RewardConfig,
) -> Reward {
    if tip.dist(target) <= cfg.delta_px {
        return Reward {
            value: cfg.success,
            case: RewardCase::Success,
        };
    }
    if cum_signed_mm > cfg.forward_limit_mm || cum_signed_mm < -cfg.backward_limit_mm {
        return Reward {
            value: cfg.boundary,
            case: RewardCase::Boundary,
        };
    }
    let j = nearest_path_index(plan, tip);
    let off_path = tip.dist(plan.points[j].to_point());
    Reward {
        value: -((cfg.omega1 * off_path).exp() + cfg.omega2 * remaining_length(plan, j)),
        case: RewardCase::Continuous,
    }
}

/// RGB camera frame with overlays.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub image: RgbImage,
}

impl Observation {
    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        let mut buf = std::io::Cursor::new(Vec::new());
        self.image.write_to(&mut buf, image::ImageFormat::Png)?;
        Ok(buf.into_inner())
    }

    pub fn save_png(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        self.image.save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }
}

/// Synthetic grayscale frame of a phantom: dark lumen on a light field.
pub fn base_image(phantom: &VesselPhantom) -> GrayImage {
    let m = &phantom.mask;
    GrayImage::from_fn(m.width() as u32, m.height() as u32, |x, y| {
        if m.is_vessel(Pixel::new(x as i32, y as i32)) {
            Luma([LUMEN_GRAY])
        } else {
            Luma([BACKGROUND_GRAY])
        }
    })
}

fn blend(i: u8, c: u8, alpha: f64) -> u8 {
    ((1.0 - alpha) * i as f64 + alpha * c as f64)
        .round()
        .clamp(0.0, 255.0) as u8
}

fn blend_rgb(i: u8, c: [u8; 3], alpha: f64) -> Rgb<u8> {
    Rgb([
        blend(i, c[0], alpha),
        blend(i, c[1], alpha),
        blend(i, c[2], alpha),
    ])
}

fn for_disk(w: u32, h: u32, center: Point, radius: f64, mut f: impl FnMut(u32, u32)) {
    let x0 = (center.x - radius).floor().max(0.0) as i64;
    let y0 = (center.y - radius).floor().max(0.0) as i64;
    let x1 = ((center.x + radius).ceil() as i64).min(w as i64 - 1);
    let y1 = ((center.y + radius).ceil() as i64).min(h as i64 - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            if Point::new(x as f64, y as f64).dist(center) <= radius {
                f(x as u32, y as u32);
            }
        }
    }
}

/// Region label per pixel: 0 none, 1 tip, 2 target, 3 path.
fn static_labels(w: u32, h: u32, target: Point, plan: &PathPlan, cfg: &OverlayConfig) -> Vec<u8> {
    let mut labels = vec![0u8; (w * h) as usize];
    for p in &plan.points {
        for_disk(w, h, p.to_point(), cfg.path_radius, |x, y| {
            labels[(y * w + x) as usize] = 3
        });
    }
    for_disk(w, h, target, cfg.target_radius, |x, y| {
        labels[(y * w + x) as usize] = 2
    });
    labels
}

/// Blends tip, target and path marks into `base`; tip wins over target,
/// target over path.
pub fn render_observation(
    base: &GrayImage,
    tip: Point,
    target: Point,
    plan: &PathPlan,
    cfg: &OverlayConfig,
) -> Observation {
    ObservationRenderer::new(base.clone(), target, plan, cfg).render(tip)
}

/// Caches the target/path layer so per-step rendering only stamps the tip.
#[derive(Debug, Clone)]
pub struct ObservationRenderer {
    base: GrayImage,
    static_frame: RgbImage,
    cfg: OverlayConfig,
}

impl ObservationRenderer {
    pub fn new(base: GrayImage, target: Point, plan: &PathPlan, cfg: &OverlayConfig) -> Self {
        let (w, h) = base.dimensions();
        let labels = static_labels(w, h, target, plan, cfg);
        let static_frame = RgbImage::from_fn(w, h, |x, y| {
            let i = base.get_pixel(x, y)[0];
            match labels[(y * w + x) as usize] {
                2 => blend_rgb(i, cfg.target_color, cfg.target_alpha),
                3 => blend_rgb(i, cfg.path_color, cfg.path_alpha),
                _ => Rgb([i, i, i]),
            }
        });
        Self {
            base,
            static_frame,
            cfg: *cfg,
        }
    }

    pub fn render(&self, tip: Point) -> Observation {
        let mut image = self.static_frame.clone();
        let (w, h) = image.dimensions();
        for_disk(w, h, tip, self.cfg.tip_radius, |x, y| {
            let i = self.base.get_pixel(x, y)[0];
            image.put_pixel(x, y, blend_rgb(i, self.cfg.tip_color, self.cfg.tip_alpha));
        });
        Observation { image }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub max_steps: u32,
    pub limits: ActionLimits,
    pub planner: PlannerConfig,
    pub overlay: OverlayConfig,
    pub reward: RewardConfig,
    pub target: String,
    /// When set, the forward movement limit becomes this multiple of the
    /// planned path length (in mm) at every reset.
    pub forward_limit_path_factor: Option<f64>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            max_steps: 50,
            limits: ActionLimits::default(),
            planner: PlannerConfig::default(),
            overlay: OverlayConfig::default(),
            reward: RewardConfig::default(),
            target: "BCA".into(),
            forward_limit_path_factor: Some(1.25),
        }
    }
}

impl EnvConfig {
    pub fn for_target(target: impl Into<String>) -> Self {
        Self {
            target: target.into(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps < 1 {
            return Err(Error::Config("max_steps must be >= 1".into()));
        }
        if let Some(f) = self.forward_limit_path_factor {
            if !(f > 0.0) {
                return Err(Error::Config(
                    "forward_limit_path_factor must be > 0".into(),
                ));
            }
        }
        self.overlay.validate()?;
        // forward limit may be replaced at reset; check the rest
        RewardConfig {
            forward_limit_mm: 1.0,
            ..self.reward
        }
        .validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Success,
    OutOfRange,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub tip: Point,
    pub heading: f64,
    pub cum_signed_mm: f64,
    pub executed_mm: f64,
    pub commanded: Action,
    pub truncated: bool,
    pub step: u32,
    pub reward_case: RewardCase,
    pub termination: Option<Termination>,
}

#[derive(Debug, Clone)]
pub struct Step {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Products of planning that are identical across resets.
#[derive(Debug)]
struct Prepared {
    heatmap: ScalarField,
    plan: PathPlan,
    renderer: ObservationRenderer,
    reward: RewardConfig,
}

/// One navigation environment. Cloning shares the immutable phantom and the
/// cached plan; the episode state is copied.
#[derive(Debug, Clone)]
pub struct NavEnv {
    phantom: Arc<VesselPhantom>,
    cfg: EnvConfig,
    target: Pixel,
    prepared: Option<Arc<Prepared>>,
    state: GuidewireState,
    active: bool,
    termination: Option<Termination>,
    last_retraction_mm: f64,
}

impl NavEnv {
    pub fn new(phantom: Arc<VesselPhantom>, cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let target = phantom.target(&cfg.target)?;
        let state = sim_reset(&phantom);
        Ok(Self {
            phantom,
            cfg,
            target,
            prepared: None,
            state,
            active: false,
            termination: None,
            last_retraction_mm: 0.0,
        })
    }

    fn prepare(&mut self) -> Result<Arc<Prepared>> {
        if let Some(p) = &self.prepared {
            return Ok(p.clone());
        }
        let heatmap = ndt_heatmap(&self.phantom.mask)?;
        let start = self.phantom.start;
        let plan = plan_bda_star(
            &self.phantom.mask,
            &heatmap,
            start,
            self.target,
            &self.cfg.planner,
        )?;
        let renderer = ObservationRenderer::new(
            base_image(&self.phantom),
            self.target.to_point(),
            &plan,
            &self.cfg.overlay,
        );
        let mut reward = self.cfg.reward;
        if let Some(f) = self.cfg.forward_limit_path_factor {
            reward.forward_limit_mm = f * self.phantom.px_to_mm(plan.length());
        }
        let p = Arc::new(Prepared {
            heatmap,
            plan,
            renderer,
            reward,
        });
        self.prepared = Some(p.clone());
        Ok(p)
    }

    /// Retracts any inserted wire, plans (first call only) and returns the
    /// first observation.
    pub fn reset(&mut self) -> Result<Observation> {
        let prepared = self.prepare()?;
        self.last_retraction_mm = self.state.cum_signed_mm.max(0.0);
        self.state = sim_reset(&self.phantom);
        self.active = true;
        self.termination = None;
        Ok(prepared.renderer.render(self.state.tip))
    }

    pub fn step(&mut self, action: Action) -> Result<Step> {
        if !self.active {
            return Err(Error::EpisodeFinished);
        }
        let prepared = self.prepared.clone().expect("reset before step");
        let StepDelta {
            commanded,
            executed_mm,
            truncated,
        } = sim_step(&mut self.state, action, &self.phantom, &self.cfg.limits);
        let r = compute_reward(
            self.state.tip,
            &prepared.plan,
            self.target.to_point(),
            self.state.cum_signed_mm,
            &prepared.reward,
        );
        let termination = match r.case {
            RewardCase::Success => Some(Termination::Success),
            RewardCase::Boundary => Some(Termination::OutOfRange),
            RewardCase::Continuous if self.state.step_count >= self.cfg.max_steps => {
                Some(Termination::Timeout)
            }
            RewardCase::Continuous => None,
        };
        let done = termination.is_some();
        if done {
            self.active = false;
            self.termination = termination;
        }
        Ok(Step {
            observation: prepared.renderer.render(self.state.tip),
            reward: r.value,
            done,
            info: StepInfo {
                tip: self.state.tip,
                heading: self.state.heading,
                cum_signed_mm: self.state.cum_signed_mm,
                executed_mm,
                commanded,
                truncated,
                step: self.state.step_count,
                reward_case: r.case,
                termination,
            },
        })
    }

    /// Current frame without stepping.
    pub fn render(&self) -> Result<Observation> {
        let p = self
            .prepared
            .as_ref()
            .ok_or_else(|| Error::Config("environment has not been reset".into()))?;
        Ok(p.renderer.render(self.state.tip))
    }

    pub fn phantom(&self) -> &Arc<VesselPhantom> {
        &self.phantom
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn target(&self) -> Pixel {
        self.target
    }

    pub fn state(&self) -> &GuidewireState {
        &self.state
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    pub fn termination(&self) -> Option<Termination> {
        self.termination
    }

    /// Wire length pulled back at the last reset.
    pub fn last_retraction_mm(&self) -> f64 {
        self.last_retraction_mm
    }

    /// Planned path; `None` before the first reset.
    pub fn plan(&self) -> Option<&PathPlan> {
        self.prepared.as_deref().map(|p| &p.plan)
    }

    pub fn heatmap(&self) -> Option<&ScalarField> {
        self.prepared.as_deref().map(|p| &p.heatmap)
    }

    /// Reward parameters in effect (forward limit resolved).
    pub fn reward_config(&self) -> Option<&RewardConfig> {
        self.prepared.as_deref().map(|p| &p.reward)
    }
}
