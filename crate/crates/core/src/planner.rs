//! Boundary-aware A* (BDA-star) on the vessel grid, a plain A* baseline, and
//! the path queries the reward needs.
//!
//! Search costs are accumulated in fixed point ([`COST_UNITS_PER_PX`] units
//! per pixel of length) so that two paths of equal cost always compare equal,
//! whatever order their terms were summed in:
//!
//! * orthogonal step: `COST_UNITS_PER_PX`
//! * diagonal step: `ceil(√2 · COST_UNITS_PER_PX)`
//! * entering node `n`: `round(ω · B(n) · COST_UNITS_PER_PX)`
//!
//! `B(n)` is `max H − H(n)` in [`CenteringMode::PenalizeBoundary`] and `H(n)` in
//! [`CenteringMode::RawHeatmap`]. The start node is never charged.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Pixel, Point};
use crate::raster::{GridMask, ScalarField};

pub const COST_UNITS_PER_PX: f64 = (1u64 << 30) as f64;

/// How the heatmap enters the node cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenteringMode {
    /// `ω · (max H − H(n))`: pulls the path toward the vessel center.
    #[default]
    PenalizeBoundary,
    /// `ω · H(n)` taken literally.
    RawHeatmap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(i32, i32)] {
        const FOUR: [(i32, i32); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];
        const EIGHT: [(i32, i32); 8] = [
            (1, 0),
            (0, 1),
            (-1, 0),
            (0, -1),
            (1, 1),
            (-1, 1),
            (-1, -1),
            (1, -1),
        ];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }

    /// Whether two pixels are neighbours under this connectivity.
    pub fn adjacent(self, a: Pixel, b: Pixel) -> bool {
        let dx = (a.x - b.x).abs();
        let dy = (a.y - b.y).abs();
        match self {
            Connectivity::Four => dx + dy == 1,
            Connectivity::Eight => dx.max(dy) == 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Weight of the boundary term.
    pub omega: f64,
    pub centering_mode: CenteringMode,
    pub connectivity: Connectivity,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            omega: 2.0,
            centering_mode: CenteringMode::PenalizeBoundary,
            connectivity: Connectivity::Eight,
        }
    }
}

impl PlannerConfig {
    pub fn with_omega(omega: f64) -> Self {
        Self {
            omega,
            ..Self::default()
        }
    }
}

/// Ordered pixel path `p_1 … p_N` with prefix arc lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPlan {
    pub points: Vec<Pixel>,
    /// `cum_length[k]` is the polyline length from `points[0]` to `points[k]`.
    pub cum_length: Vec<f64>,
    /// Search cost in pixels (length plus weighted boundary terms).
    pub total_cost: f64,
    /// The same cost in fixed-point units.
    pub cost_units: u64,
}

impl PathPlan {
    pub fn from_points(points: Vec<Pixel>, cost_units: u64) -> Self {
        assert!(!points.is_empty(), "a path has at least one point");
        let mut cum_length = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        cum_length.push(0.0);
        for w in points.windows(2) {
            acc += w[0].dist(w[1]);
            cum_length.push(acc);
        }
        Self {
            points,
            cum_length,
            total_cost: cost_units as f64 / COST_UNITS_PER_PX,
            cost_units,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start(&self) -> Pixel {
        self.points[0]
    }

    pub fn goal(&self) -> Pixel {
        *self.points.last().expect("non-empty path")
    }

    /// Polyline length in pixels.
    pub fn length(&self) -> f64 {
        *self.cum_length.last().expect("non-empty path")
    }

    /// Mean of `field` sampled at every path point.
    pub fn mean_field(&self, field: &ScalarField) -> f64 {
        self.points.iter().map(|&p| field.at(p)).sum::<f64>() / self.points.len() as f64
    }

    /// Point `arc` pixels further along the path than index `from`
    /// (clamped to the goal).
    pub fn point_ahead(&self, from: usize, arc: f64) -> Pixel {
        let wanted = self.cum_length[from] + arc;
        let k = self.cum_length.partition_point(|&c| c < wanted);
        self.points[k.min(self.points.len() - 1)]
    }

    /// CSV with header `k,x,y,cum_length`; `k` counts from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,x,y,cum_length\n");
        for (k, (p, c)) in self.points.iter().zip(&self.cum_length).enumerate() {
            let _ = writeln!(out, "{},{},{},{}", k + 1, p.x, p.y, c);
        }
        out
    }

    /// SVG `points` attribute value for a polyline overlay.
    pub fn svg_points(&self) -> String {
        self.points
            .iter()
            .map(|p| format!("{},{}", p.x, p.y))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn step_units(dx: i32, dy: i32) -> u64 {
    if dx != 0 && dy != 0 {
        (std::f64::consts::SQRT_2 * COST_UNITS_PER_PX).ceil() as u64
    } else {
        COST_UNITS_PER_PX as u64
    }
}

fn heuristic_units(a: Pixel, b: Pixel) -> u64 {
    // Deflated slightly so float error can never make it inconsistent.
    (a.dist(b) * COST_UNITS_PER_PX * (1.0 - 1e-9)).floor() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Frontier {
    f: u64,
    h: u64,
    idx: usize,
    g: u64,
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; smallest (f, h, idx) first.
        (other.f, other.h, other.idx).cmp(&(self.f, self.h, self.idx))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn check_endpoints(mask: &GridMask, start: Pixel, goal: Pixel) -> Result<()> {
    if !mask.is_vessel(start) {
        return Err(Error::OffVessel {
            what: "start",
            point: (start.x, start.y),
        });
    }
    if !mask.is_vessel(goal) {
        return Err(Error::OffVessel {
            what: "goal",
            point: (goal.x, goal.y),
        });
    }
    Ok(())
}

/// A* over vessel pixels where entering node `i` costs `node_units(i)` on top
/// of the step length.
fn search(
    mask: &GridMask,
    start: Pixel,
    goal: Pixel,
    connectivity: Connectivity,
    node_units: impl Fn(usize) -> u64,
) -> Result<PathPlan> {
    check_endpoints(mask, start, goal)?;
    let n = mask.width() * mask.height();
    let mut g_best = vec![u64::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let s = mask.index(start);
    let t = mask.index(goal);
    let mut heap = BinaryHeap::new();
    g_best[s] = 0;
    let h0 = heuristic_units(start, goal);
    heap.push(Frontier {
        f: h0,
        h: h0,
        idx: s,
        g: 0,
    });
    while let Some(Frontier { idx, g, .. }) = heap.pop() {
        if g > g_best[idx] {
            continue;
        }
        if idx == t {
            let mut points = vec![goal];
            let mut cur = t;
            while cur != s {
                cur = parent[cur];
                points.push(mask.pixel_at(cur));
            }
            points.reverse();
            return Ok(PathPlan::from_points(points, g));
        }
        let p = mask.pixel_at(idx);
        for &(dx, dy) in connectivity.offsets() {
            let q = Pixel::new(p.x + dx, p.y + dy);
            if !mask.is_vessel(q) {
                continue;
            }
            let j = mask.index(q);
            let ng = g
                .saturating_add(step_units(dx, dy))
                .saturating_add(node_units(j));
            if ng < g_best[j] {
                g_best[j] = ng;
                parent[j] = idx;
                let h = heuristic_units(q, goal);
                heap.push(Frontier {
                    f: ng.saturating_add(h),
                    h,
                    idx: j,
                    g: ng,
                });
            }
        }
    }
    Err(Error::Unreachable {
        start: (start.x, start.y),
        goal: (goal.x, goal.y),
    })
}

/// Per-node boundary charge in fixed-point units.
pub fn boundary_units(heat: f64, max_heat: f64, cfg: &PlannerConfig) -> u64 {
    let b = match cfg.centering_mode {
        CenteringMode::PenalizeBoundary => max_heat - heat,
        CenteringMode::RawHeatmap => heat,
    };
    (cfg.omega * b * COST_UNITS_PER_PX).round() as u64
}

/// BDA-star: A* with the Euclidean heuristic plus `ω · B(n)` per entered node.
pub fn plan_bda_star(
    mask: &GridMask,
    heatmap: &ScalarField,
    start: Pixel,
    goal: Pixel,
    cfg: &PlannerConfig,
) -> Result<PathPlan> {
    if !(cfg.omega >= 0.0 && cfg.omega.is_finite()) {
        return Err(Error::Config(format!(
            "omega must be finite and >= 0, got {}",
            cfg.omega
        )));
    }
    assert_eq!(
        (heatmap.width(), heatmap.height()),
        (mask.width(), mask.height()),
        "heatmap and mask dimensions differ"
    );
    let max_h = heatmap.max();
    let units: Vec<u64> = heatmap
        .cells()
        .iter()
        .map(|&h| boundary_units(h, max_h, cfg))
        .collect();
    search(mask, start, goal, cfg.connectivity, |i| units[i])
}

/// Classic shortest path on the vessel grid.
pub fn plan_a_star(
    mask: &GridMask,
    start: Pixel,
    goal: Pixel,
    connectivity: Connectivity,
) -> Result<PathPlan> {
    search(mask, start, goal, connectivity, |_| 0)
}

/// Index (0-based) of the path point closest to `x`; ties go to the later
/// point.
pub fn nearest_path_index(plan: &PathPlan, x: Point) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, p) in plan.points.iter().enumerate() {
        let d = x.dist(p.to_point());
        if d <= best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

/// Path length from point `j` (0-based) to the goal.
pub fn remaining_length(plan: &PathPlan, j: usize) -> f64 {
    plan.length() - plan.cum_length[j]
}
