//! Property tests against brute-force oracles and structural invariants.

mod common;

use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use common::*;
use vascnav::actuation::{
    push_pull_distance_mm, push_pull_duration_ms, rotation_angle_deg, rotation_duration_ms,
    MotorParams,
};
use vascnav::env::{compute_reward, RewardCase, RewardConfig, Termination};
use vascnav::metrics::{EpisodeRecord, StepRecord};
use vascnav::phantom::{standard_aorta, VesselPhantom};
use vascnav::planner::{
    nearest_path_index, plan_bda_star, remaining_length, CenteringMode, Connectivity, PathPlan,
    PlannerConfig,
};
use vascnav::raster::{convolve, distance_transform, ndt_heatmap, DiskKernel, GridMask};
use vascnav::simulator::{sim_reset, sim_step, Action, ActionLimits};
use vascnav::{Pixel, Point};

fn aorta() -> &'static Arc<VesselPhantom> {
    static A: OnceLock<Arc<VesselPhantom>> = OnceLock::new();
    A.get_or_init(|| Arc::new(standard_aorta()))
}

fn mask_strategy(max: usize) -> impl Strategy<Value = GridMask> {
    (1..=max, 1..=max).prop_flat_map(|(w, h)| {
        proptest::collection::vec(prop::bool::weighted(0.7), w * h).prop_map(move |bits| {
            let s: Vec<u8> = bits.into_iter().map(u8::from).collect();
            GridMask::from_samples(w, h, &s).unwrap()
        })
    })
}

/// Mask plus two pixels forced onto the vessel.
fn endpoints_strategy(max: usize) -> impl Strategy<Value = (GridMask, Pixel, Pixel)> {
    mask_strategy(max).prop_flat_map(|m| {
        let n = m.width() * m.height();
        (Just(m), 0..n, 0..n).prop_map(|(mut m, a, b)| {
            let (s, g) = (m.pixel_at(a), m.pixel_at(b));
            m.set(s, true);
            m.set(g, true);
            (m, s, g)
        })
    })
}

fn config_strategy() -> impl Strategy<Value = PlannerConfig> {
    (
        prop::sample::select(vec![0.0, 0.5, 1.0, 2.0, 4.0]),
        prop::bool::ANY,
        prop::bool::ANY,
    )
        .prop_map(|(omega, raw, four)| PlannerConfig {
            omega,
            centering_mode: if raw {
                CenteringMode::RawHeatmap
            } else {
                CenteringMode::PenalizeBoundary
            },
            connectivity: if four {
                Connectivity::Four
            } else {
                Connectivity::Eight
            },
        })
}

fn node_charges(mask: &GridMask, cfg: &PlannerConfig) -> Vec<u64> {
    let heat = ndt_heatmap(mask).unwrap();
    let max_h = heat.max();
    heat.cells()
        .iter()
        .map(|&h| {
            let b = match cfg.centering_mode {
                CenteringMode::PenalizeBoundary => max_h - h,
                CenteringMode::RawHeatmap => h,
            };
            charge_units(cfg.omega, b)
        })
        .collect()
}

fn straight_plan(len: i32) -> PathPlan {
    PathPlan::from_points((0..=len).map(|x| Pixel::new(x, 0)).collect(), 0)
}

fn action_strategy() -> impl Strategy<Value = Action> {
    (-25.0..25.0f64, -100.0..100.0f64).prop_map(|(t, r)| Action::new(t, r))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn distance_transform_matches_brute_force(m in mask_strategy(24)) {
        let got = distance_transform(&m);
        for (a, b) in got.cells().iter().zip(brute_distance(&m)) {
            prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn convolution_matches_nested_loops(m in mask_strategy(20), r in 1usize..6) {
        let got = convolve(&m, &DiskKernel::disk(r));
        let want = brute_convolve(&m, &disk_offsets(r as i32));
        prop_assert_eq!(field_values(&got), want);
    }

    #[test]
    fn heatmap_matches_definition(m in mask_strategy(20)) {
        prop_assume!(m.vessel_count() > 0);
        let h = ndt_heatmap(&m).unwrap();
        for (k, (&a, b)) in h.cells().iter().zip(brute_heatmap(&m)).enumerate() {
            prop_assert!(a.is_finite() && a >= 0.0);
            prop_assert!((a - b).abs() <= 1e-12);
            if m.cells()[k] == 0 {
                prop_assert_eq!(a, 0.0);
            }
        }
    }

    #[test]
    fn corridor_heatmap_is_symmetric(w in 3usize..30, h in 3usize..16) {
        let m = GridMask::from_samples(w, h, &vec![1; w * h]).unwrap();
        let f = ndt_heatmap(&m).unwrap();
        for y in 0..h {
            for x in 0..w {
                let v = f.get(x, y);
                prop_assert!((v - f.get(w - 1 - x, y)).abs() <= 1e-12);
                prop_assert!((v - f.get(x, h - 1 - y)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn planner_matches_dijkstra((m, s, g) in endpoints_strategy(16), cfg in config_strategy()) {
        let node = node_charges(&m, &cfg);
        let oracle = dijkstra(&m, &node, s, g, cfg.connectivity == Connectivity::Eight);
        let heat = ndt_heatmap(&m).unwrap();
        let got = plan_bda_star(&m, &heat, s, g, &cfg).ok().map(|p| p.cost_units);
        prop_assert_eq!(got, oracle);
    }

    #[test]
    fn planned_paths_are_feasible((m, s, g) in endpoints_strategy(16), cfg in config_strategy()) {
        let heat = ndt_heatmap(&m).unwrap();
        let Ok(plan) = plan_bda_star(&m, &heat, s, g, &cfg) else {
            return Ok(());
        };
        prop_assert_eq!(plan.start(), s);
        prop_assert_eq!(plan.goal(), g);
        let node = node_charges(&m, &cfg);
        let mut cost = 0u64;
        for w in plan.points.windows(2) {
            prop_assert!(m.is_vessel(w[1]));
            prop_assert!(cfg.connectivity.adjacent(w[0], w[1]));
            cost += step_cost_units(w[1].x - w[0].x, w[1].y - w[0].y) + node[m.index(w[1])];
        }
        prop_assert_eq!(cost, plan.cost_units);
        prop_assert!((plan.total_cost - cost as f64 / UNITS).abs() <= 1e-9 * plan.total_cost.max(1.0));
        let last = *plan.cum_length.last().unwrap();
        prop_assert!((plan.length() - last).abs() <= 1e-12);
    }

    #[test]
    fn nearest_index_matches_linear_scan(
        pts in proptest::collection::vec((0i32..20, 0i32..20), 1..30),
        x in 0.0..20.0f64,
        y in 0.0..20.0f64,
    ) {
        let plan = PathPlan::from_points(pts.iter().map(|&(a, b)| Pixel::new(a, b)).collect(), 0);
        let q = Point::new(x, y);
        let d: Vec<f64> = plan.points.iter().map(|p| q.dist(p.to_point())).collect();
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let want = d.iter().rposition(|&v| v == min).unwrap();
        let j = nearest_path_index(&plan, q);
        prop_assert_eq!(j, want);
        let mut rest = 0.0;
        for w in plan.points[j..].windows(2) {
            rest += w[0].to_point().dist(w[1].to_point());
        }
        prop_assert!((remaining_length(&plan, j) - rest).abs() <= 1e-9);
    }

    #[test]
    fn motor_times_are_linear_and_invertible(
        a in 0.0..200.0f64,
        b in 0.0..200.0f64,
        rpm in 1.0..200.0f64,
        r in 1.0..30.0f64,
    ) {
        let p = MotorParams { rpm, r, ..MotorParams::default() };
        let t = |v| push_pull_duration_ms(v, &p).unwrap();
        let q = |v| rotation_duration_ms(v, &p).unwrap();
        prop_assert!((t(a + b) - t(a) - t(b)).abs() <= 1e-9 * t(a + b).max(1.0));
        prop_assert!((q(a + b) - q(a) - q(b)).abs() <= 1e-9 * q(a + b).max(1.0));
        prop_assert!((push_pull_distance_mm(t(a), &p).unwrap() - a).abs() <= 1e-9 * a.max(1.0));
        prop_assert!((rotation_angle_deg(q(a), &p).unwrap() - a).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn continuous_reward_is_negative_and_falls_off_path(
        x in 0.0..900.0f64,
        y1 in 0.0..100.0f64,
        extra in 0.1..100.0f64,
    ) {
        let cfg = RewardConfig::default();
        let plan = straight_plan(1000);
        let target = Point::new(1000.0, 0.0);
        let near = compute_reward(Point::new(x, y1), &plan, target, 0.0, &cfg);
        let far = compute_reward(Point::new(x, y1 + extra), &plan, target, 0.0, &cfg);
        prop_assert_eq!(near.case, RewardCase::Continuous);
        prop_assert!(near.value < 0.0);
        prop_assert!(far.value < near.value);
    }

    #[test]
    fn simulator_invariants(actions in proptest::collection::vec(action_strategy(), 1..40)) {
        let ph = aorta();
        let limits = ActionLimits::default();
        let mut s = sim_reset(ph);
        let mut sum = 0.0;
        for a in actions {
            let before = s.tip;
            let d = sim_step(&mut s, a, ph, &limits);
            sum += d.executed_mm;
            prop_assert!(ph.mask.is_vessel(s.tip.pixel()));
            prop_assert!(d.executed_mm.abs() <= d.commanded.translate_mm.abs() + ph.px_to_mm(0.5));
            if d.commanded.translate_mm == 0.0 {
                prop_assert_eq!(s.tip, before);
            }
        }
        prop_assert!((s.cum_signed_mm - sum).abs() <= 1e-9);
    }

    #[test]
    fn rotation_alone_never_moves_tip(rots in proptest::collection::vec(-180.0..180.0f64, 1..20)) {
        let ph = aorta();
        let mut s = sim_reset(ph);
        let start = s.tip;
        for r in rots {
            sim_step(&mut s, Action::new(0.0, r), ph, &ActionLimits::default());
            prop_assert_eq!(s.tip, start);
            prop_assert!(s.heading > -180.0 && s.heading <= 180.0);
        }
    }

    #[test]
    fn movement_bounds_retracement(moves in proptest::collection::vec(-20.0..20.0f64, 0..30)) {
        let steps = moves
            .iter()
            .map(|&m| StepRecord {
                action: Action::new(m, 0.0),
                executed_mm: m,
                tip: Point::new(0.0, 0.0),
                reward: 0.0,
                motor_ms: 0.0,
            })
            .collect();
        let rec = EpisodeRecord {
            episode: 0,
            seed: 0,
            policy: "test".into(),
            target: "T".into(),
            steps,
            termination: Termination::Timeout,
            episode_return: 0.0,
            length: moves.len(),
        };
        prop_assert!(rec.retracement_mm() >= 0.0);
        prop_assert!(rec.movement_mm() + 1e-12 >= rec.retracement_mm());
    }
}
