//! Kinematic 2D guidewire model inside a phantom lumen.
//!
//! The tip follows its heading in 0.5 px substeps. When the next substep
//! would leave the lumen, the tip slides along the wall: it takes the
//! feasible direction within ±60° of the heading (5° increments) with the
//! smallest deviation, counter-clockwise first on ties. Rotation changes only
//! the heading. Pulling retraces the stored body polyline.

use serde::{Deserialize, Serialize};

use crate::geom::{wrap_deg, Point};
use crate::phantom::VesselPhantom;

pub const SUBSTEP_PX: f64 = 0.5;
pub const SLIDE_CONE_DEG: i32 = 60;
pub const SLIDE_STEP_DEG: i32 = 5;

/// Per-step action limits (S and R).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionLimits {
    pub max_translate_mm: f64,
    pub max_rotate_deg: f64,
}

impl Default for ActionLimits {
    fn default() -> Self {
        Self {
            max_translate_mm: 20.0,
            max_rotate_deg: 90.0,
        }
    }
}

/// Push/pull and rotation command for one step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub translate_mm: f64,
    pub rotate_deg: f64,
}

impl Action {
    pub const fn new(translate_mm: f64, rotate_deg: f64) -> Self {
        Self {
            translate_mm,
            rotate_deg,
        }
    }

    /// Clamps both components into the limit box; NaN becomes 0.
    pub fn clamped(self, limits: &ActionLimits) -> Self {
        let c = |v: f64, m: f64| if v.is_nan() { 0.0 } else { v.clamp(-m, m) };
        Self {
            translate_mm: c(self.translate_mm, limits.max_translate_mm),
            rotate_deg: c(self.rotate_deg, limits.max_rotate_deg),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidewireState {
    pub tip: Point,
    /// Screen-CCW degrees, 0 = +x, wrapped into (-180, 180].
    pub heading: f64,
    /// Past tip positions from the insertion point to the current tip.
    pub body: Vec<Point>,
    pub inserted_mm: f64,
    /// Sum of executed signed translations.
    pub cum_signed_mm: f64,
    pub step_count: u32,
}

impl GuidewireState {
    /// A fresh wire with its tip at `tip`.
    pub fn at(tip: Point, heading: f64) -> Self {
        Self {
            tip,
            heading: wrap_deg(heading),
            body: vec![tip],
            inserted_mm: 0.0,
            cum_signed_mm: 0.0,
            step_count: 0,
        }
    }

    pub fn snapshot(&self) -> StateSnapshot {
        StateSnapshot {
            tip: self.tip,
            heading: self.heading,
            inserted_mm: self.inserted_mm,
            cum_signed_mm: self.cum_signed_mm,
            step_count: self.step_count,
        }
    }

    /// Arc length of the body polyline in pixels.
    pub fn body_length_px(&self) -> f64 {
        self.body.windows(2).map(|w| w[0].dist(w[1])).sum()
    }
}

/// JSON view of a wire state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub tip: Point,
    pub heading: f64,
    pub inserted_mm: f64,
    pub cum_signed_mm: f64,
    pub step_count: u32,
}

/// What one step actually did.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepDelta {
    /// The clamped command.
    pub commanded: Action,
    /// Signed translation that was carried out, in mm.
    pub executed_mm: f64,
    /// True when the commanded translation was cut short.
    pub truncated: bool,
}

/// Tip at the phantom entry, heading along the trunk.
pub fn sim_reset(phantom: &VesselPhantom) -> GuidewireState {
    GuidewireState::at(phantom.start.to_point(), phantom.initial_heading())
}

fn slide_offsets() -> impl Iterator<Item = i32> {
    std::iter::once(0).chain(
        (1..=SLIDE_CONE_DEG / SLIDE_STEP_DEG)
            .flat_map(|k| [k * SLIDE_STEP_DEG, -k * SLIDE_STEP_DEG]),
    )
}

/// Advances `state` by one clamped action.
pub fn sim_step(
    state: &mut GuidewireState,
    action: Action,
    phantom: &VesselPhantom,
    limits: &ActionLimits,
) -> StepDelta {
    let action = action.clamped(limits);
    state.heading = wrap_deg(state.heading + action.rotate_deg);

    let want_px = phantom.mm_to_px(action.translate_mm.abs());
    let moved_px = if action.translate_mm > 0.0 {
        advance(state, want_px, phantom)
    } else if action.translate_mm < 0.0 {
        -retract(state, want_px, phantom)
    } else {
        0.0
    };

    let executed_mm = phantom.px_to_mm(moved_px);
    state.inserted_mm = if state.body.len() <= 1 {
        0.0
    } else {
        (state.inserted_mm + executed_mm).max(0.0)
    };
    state.cum_signed_mm += executed_mm;
    state.step_count += 1;
    StepDelta {
        commanded: action,
        executed_mm,
        truncated: moved_px.abs() + 1e-9 < want_px,
    }
}

fn advance(state: &mut GuidewireState, want_px: f64, phantom: &VesselPhantom) -> f64 {
    let mut moved = 0.0;
    while want_px - moved > 1e-12 {
        let step = SUBSTEP_PX.min(want_px - moved);
        let next = slide_offsets().find_map(|dev| {
            let p = state
                .tip
                .offset(Point::heading_unit(state.heading + dev as f64), step);
            phantom.mask.is_vessel(p.pixel()).then_some(p)
        });
        match next {
            Some(p) => {
                state.tip = p;
                state.body.push(p);
                moved += step;
            }
            None => break,
        }
    }
    moved
}

fn retract(state: &mut GuidewireState, want_px: f64, phantom: &VesselPhantom) -> f64 {
    let mut left = want_px;
    while left > 1e-12 && state.body.len() > 1 {
        let n = state.body.len();
        let (last, prev) = (state.body[n - 1], state.body[n - 2]);
        let seg = last.dist(prev);
        if seg <= left {
            state.body.pop();
            left -= seg;
        } else {
            let p = last.lerp(prev, left / seg);
            if phantom.mask.is_vessel(p.pixel()) {
                state.body[n - 1] = p;
                left = 0.0;
            } else if left * 2.0 >= seg {
                // a cut corner would land on the wall: snap to the nearer body point
                state.body.pop();
                left -= seg;
            } else {
                break;
            }
        }
    }
    state.tip = *state.body.last().expect("body keeps its insertion point");
    want_px - left
}
