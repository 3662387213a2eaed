//! Baseline controllers: a greedy plan follower, a uniform random policy and
//! a tabular Q-learning agent over a coarse discretization of the wire state.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{NavEnv, Observation};
use crate::error::{Error, Result};
use crate::geom::{wrap_deg, Pixel, Point};
use crate::planner::{nearest_path_index, PathPlan};
use crate::raster::GridMask;
use crate::simulator::{Action, ActionLimits, GuidewireState, SUBSTEP_PX};

/// Everything a policy may look at when choosing an action.
#[derive(Debug, Clone, Copy)]
pub struct PolicyInput<'a> {
    pub observation: Option<&'a Observation>,
    pub state: &'a GuidewireState,
    pub mask: &'a GridMask,
    pub plan: &'a PathPlan,
    pub target: Pixel,
    pub px_per_mm: f64,
    pub limits: ActionLimits,
}

impl<'a> PolicyInput<'a> {
    /// Privileged view of a live environment.
    pub fn from_env(env: &'a NavEnv, observation: Option<&'a Observation>) -> Self {
        Self {
            observation,
            state: env.state(),
            mask: &env.phantom().mask,
            plan: env.plan().expect("environment has been reset"),
            target: env.target(),
            px_per_mm: env.phantom().px_per_mm,
            limits: env.config().limits,
        }
    }
}

pub trait Policy {
    fn act(&mut self, input: &PolicyInput<'_>) -> Action;

    /// Called before every episode.
    fn reset(&mut self, _seed: u64) {}

    fn is_deterministic(&self) -> bool;

    fn name(&self) -> &str;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GreedyParams {
    /// Farthest arc distance ahead of the nearest path point to aim at, px.
    /// `None` uses one full step (S in pixels).
    pub lookahead_px: Option<f64>,
    /// Beyond this distance from the path the wire backs off by S/2.
    pub recovery_px: f64,
}

impl Default for GreedyParams {
    fn default() -> Self {
        Self {
            lookahead_px: None,
            recovery_px: 24.0,
        }
    }
}

/// True when every half-pixel sample of the segment `a`-`b` lands on vessel.
pub fn line_of_sight(mask: &GridMask, a: Point, b: Point) -> bool {
    let n = (a.dist(b) / SUBSTEP_PX).ceil().max(1.0) as usize;
    (1..=n).all(|k| mask.is_vessel(a.lerp(b, k as f64 / n as f64).pixel()))
}

/// Aims at the farthest plan point within the lookahead that the tip can
/// reach in a straight line, turns toward it and pushes exactly that far.
/// Backs off by S/2 when the tip is far from the path or nothing ahead is
/// visible. A turn larger than R is done in place.
pub fn greedy_path_follow(
    tip: Point,
    heading: f64,
    mask: &GridMask,
    plan: &PathPlan,
    params: &GreedyParams,
    limits: &ActionLimits,
    px_per_mm: f64,
) -> Action {
    let back_off = Action::new(-limits.max_translate_mm / 2.0, 0.0);
    let j = nearest_path_index(plan, tip);
    if tip.dist(plan.points[j].to_point()) > params.recovery_px {
        return back_off;
    }
    let reach = params
        .lookahead_px
        .unwrap_or(limits.max_translate_mm * px_per_mm);
    let mut aim = None;
    for k in j + 1..plan.len() {
        if plan.cum_length[k] - plan.cum_length[j] > reach {
            break;
        }
        let p = plan.points[k].to_point();
        if !line_of_sight(mask, tip, p) {
            break;
        }
        aim = Some(p);
    }
    let aim = match aim {
        Some(p) => p,
        None if j + 1 == plan.len() => plan.goal().to_point(),
        None => return back_off,
    };
    let dist = tip.dist(aim);
    if dist < 1e-9 {
        return Action::new(0.0, 0.0);
    }
    let rotate = wrap_deg(tip.heading_to(aim) - heading);
    if rotate.abs() > limits.max_rotate_deg {
        return Action::new(0.0, rotate).clamped(limits);
    }
    Action::new(dist / px_per_mm, rotate).clamped(limits)
}

#[derive(Debug, Clone, Default)]
pub struct GreedyPolicy {
    pub params: GreedyParams,
}

impl GreedyPolicy {
    pub fn new(params: GreedyParams) -> Self {
        Self { params }
    }
}

impl Policy for GreedyPolicy {
    fn act(&mut self, input: &PolicyInput<'_>) -> Action {
        greedy_path_follow(
            input.state.tip,
            input.state.heading,
            input.mask,
            input.plan,
            &self.params,
            &input.limits,
            input.px_per_mm,
        )
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn name(&self) -> &str {
        "greedy"
    }
}

/// Uniform actions over the limit box; reproducible per seed.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
    limits: ActionLimits,
}

impl RandomPolicy {
    pub fn new(seed: u64, limits: ActionLimits) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            limits,
        }
    }

    pub fn sample(&mut self) -> Action {
        let s = self.limits.max_translate_mm;
        let r = self.limits.max_rotate_deg;
        Action::new(self.rng.gen_range(-s..=s), self.rng.gen_range(-r..=r))
    }
}

/// Uniform random policy with the default limits.
pub fn random_policy(seed: u64) -> RandomPolicy {
    RandomPolicy::new(seed, ActionLimits::default())
}

impl Policy for RandomPolicy {
    fn act(&mut self, _input: &PolicyInput<'_>) -> Action {
        self.sample()
    }

    fn reset(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn is_deterministic(&self) -> bool {
        false
    }

    fn name(&self) -> &str {
        "random"
    }
}

/// How continuous wire states map to table rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub cell_px: f64,
    pub heading_bins: u32,
    /// Translation levels as fractions of S, e.g. `[-1, 0, 1]`.
    pub translate_levels: [f64; 3],
    /// Rotation levels as fractions of R.
    pub rotate_levels: [f64; 3],
}

impl Default for Discretization {
    fn default() -> Self {
        Self {
            cell_px: 10.0,
            heading_bins: 8,
            translate_levels: [-1.0, 0.0, 1.0],
            rotate_levels: [-1.0, 0.0, 1.0],
        }
    }
}

pub const N_ACTIONS: usize = 9;

pub type StateKey = (i32, i32, u32);

impl Discretization {
    pub fn key(&self, state: &GuidewireState) -> StateKey {
        let bin = 360.0 / self.heading_bins as f64;
        let h = (wrap_deg(state.heading) + 360.0 + bin / 2.0).rem_euclid(360.0);
        (
            (state.tip.x / self.cell_px).floor() as i32,
            (state.tip.y / self.cell_px).floor() as i32,
            ((h / bin).floor() as u32) % self.heading_bins,
        )
    }

    /// Action `a` in `0..9`: translation index `a / 3`, rotation `a % 3`.
    pub fn action(&self, a: usize, limits: &ActionLimits) -> Action {
        Action::new(
            self.translate_levels[a / 3] * limits.max_translate_mm,
            self.rotate_levels[a % 3] * limits.max_rotate_deg,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub discretization: Discretization,
    pub init: f64,
    values: HashMap<StateKey, [f64; N_ACTIONS]>,
}

#[derive(Serialize, Deserialize)]
struct QTableFile {
    discretization: Discretization,
    init: f64,
    entries: Vec<QEntry>,
}

#[derive(Serialize, Deserialize)]
struct QEntry {
    state: [i64; 3],
    q: [f64; N_ACTIONS],
}

impl QTable {
    pub fn new(discretization: Discretization, init: f64) -> Self {
        Self {
            discretization,
            init,
            values: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, key: &StateKey) -> Option<&[f64; N_ACTIONS]> {
        self.values.get(key)
    }

    fn row(&mut self, key: StateKey) -> &mut [f64; N_ACTIONS] {
        let init = self.init;
        self.values.entry(key).or_insert([init; N_ACTIONS])
    }

    /// Best action for a state; unseen states and ties take the lowest index.
    pub fn greedy(&self, key: &StateKey) -> usize {
        match self.values.get(key) {
            Some(row) => argmax(row),
            None => 0,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.values().flatten().all(|v| v.is_finite())
    }

    pub fn to_json(&self) -> String {
        let mut entries: Vec<QEntry> = self
            .values
            .iter()
            .map(|(&(x, y, h), q)| QEntry {
                state: [x as i64, y as i64, h as i64],
                q: *q,
            })
            .collect();
        entries.sort_by_key(|e| e.state);
        serde_json::to_string_pretty(&QTableFile {
            discretization: self.discretization,
            init: self.init,
            entries,
        })
        .expect("q-table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: QTableFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: None,
            field: None,
            line: Some(e.line()),
            message: e.to_string(),
        })?;
        let mut t = QTable::new(f.discretization, f.init);
        for e in f.entries {
            t.values.insert(
                (e.state[0] as i32, e.state[1] as i32, e.state[2] as u32),
                e.q,
            );
        }
        Ok(t)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn argmax(row: &[f64; N_ACTIONS]) -> usize {
    let mut best = 0;
    for a in 1..N_ACTIONS {
        if row[a] > row[best] {
            best = a;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QLearningParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the episodes over which epsilon decays linearly.
    pub epsilon_decay_fraction: f64,
    pub init_q: f64,
    pub discretization: Discretization,
}

impl Default for QLearningParams {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            gamma: 0.95,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.7,
            init_q: 0.0,
            discretization: Discretization::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub episode_return: f64,
    pub length: u32,
    pub success: bool,
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub table: QTable,
    pub curve: Vec<CurvePoint>,
}

impl TrainingRun {
    /// CSV with header `episode,return,length`.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("episode,return,length\n");
        for c in &self.curve {
            let _ = writeln!(out, "{},{},{}", c.episode, c.episode_return, c.length);
        }
        out
    }
}

/// Epsilon-greedy tabular Q-learning; deterministic for a given seed.
pub fn q_learning_train(
    mut make_env: impl FnMut() -> Result<NavEnv>,
    episodes: usize,
    seed: u64,
    params: &QLearningParams,
) -> Result<TrainingRun> {
    if episodes == 0 {
        return Err(Error::Config("episodes must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let disc = params.discretization;
    let mut table = QTable::new(disc, params.init_q);
    let mut curve = Vec::with_capacity(episodes);
    let mut env = make_env()?;
    let limits = env.config().limits;
    let decay_episodes = (episodes as f64 * params.epsilon_decay_fraction).max(1.0);

    for ep in 0..episodes {
        let frac = (ep as f64 / decay_episodes).min(1.0);
        let epsilon = params.epsilon_start + (params.epsilon_end - params.epsilon_start) * frac;
        env.reset()?;
        let mut key = disc.key(env.state());
        table.row(key);
        let mut ret = 0.0;
        loop {
            let a = if rng.gen::<f64>() < epsilon {
                rng.gen_range(0..N_ACTIONS)
            } else {
                table.greedy(&key)
            };
            let step = env.step(disc.action(a, &limits))?;
            ret += step.reward;
            let next = disc.key(env.state());
            let bootstrap = match step.info.termination {
                Some(crate::env::Termination::Success | crate::env::Termination::OutOfRange) => 0.0,
                _ => params.gamma * table.row(next).iter().copied().fold(f64::MIN, f64::max),
            };
            let q = &mut table.row(key)[a];
            *q += params.alpha * (step.reward + bootstrap - *q);
            key = next;
            if step.done {
                let success = step.info.termination == Some(crate::env::Termination::Success);
                curve.push(CurvePoint {
                    episode: ep,
                    episode_return: ret,
                    length: step.info.step,
                    success,
                });
                break;
            }
        }
    }
    Ok(TrainingRun { table, curve })
}

/// Acts greedily on a learned table.
#[derive(Debug, Clone)]
pub struct QPolicy {
    pub table: QTable,
}

impl QPolicy {
    pub fn new(table: QTable) -> Self {
        Self { table }
    }
}

impl Policy for QPolicy {
    fn act(&mut self, input: &PolicyInput<'_>) -> Action {
        let key = self.table.discretization.key(input.state);
        self.table
            .discretization
            .action(self.table.greedy(&key), &input.limits)
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn name(&self) -> &str {
        "q_table"
    }
}

/// Moving averages of episode returns over consecutive windows.
pub fn window_means(curve: &[CurvePoint], window: usize) -> Vec<f64> {
    curve
        .chunks(window)
        .filter(|c| c.len() == window)
        .map(|c| c.iter().map(|p| p.episode_return).sum::<f64>() / window as f64)
        .collect()
}

/// Stable ordering of state keys, handy for diffing tables.
pub fn sorted_keys(table: &QTable) -> Vec<StateKey> {
    let m: BTreeMap<_, _> = table.values.iter().collect();
    m.keys().map(|k| **k).collect()
}
