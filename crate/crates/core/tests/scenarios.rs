//! Scenario tests: planner behavior on phantoms, environment episodes, and
//! the command-line workflow end to end.

mod common;

use std::path::Path;
use std::sync::Arc;

use common::*;
use vascnav::agents::{q_learning_train, window_means, GreedyPolicy, QLearningParams};
use vascnav::cli::{read_records, run_from};
use vascnav::env::{EnvConfig, NavEnv, RewardCase, Termination};
use vascnav::metrics::evaluate;
use vascnav::phantom::{generate_corridor, standard_aorta, VesselPhantom, AORTA_TARGETS};
use vascnav::planner::{plan_bda_star, CenteringMode, Connectivity, PlannerConfig};
use vascnav::raster::{distance_transform, ndt_heatmap, GridMask};
use vascnav::simulator::Action;
use vascnav::{Error, Pixel};

/// Minimum path cost by exhaustive depth-first enumeration of simple paths,
/// pruned only by the best complete path found so far.
fn exhaustive(
    mask: &GridMask,
    node: &[u64],
    start: Pixel,
    goal: Pixel,
    eight: bool,
) -> Option<u64> {
    #[allow(clippy::too_many_arguments)]
    fn go(
        mask: &GridMask,
        node: &[u64],
        p: Pixel,
        goal: Pixel,
        eight: bool,
        cost: u64,
        seen: &mut Vec<bool>,
        best: &mut Option<u64>,
    ) {
        if best.is_some_and(|b| cost >= b) {
            return;
        }
        if p == goal {
            *best = Some(cost);
            return;
        }
        for dy in -1..=1 {
            for dx in -1..=1 {
                if (dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0) {
                    continue;
                }
                let q = Pixel::new(p.x + dx, p.y + dy);
                if !mask.in_bounds(q) || !mask.is_vessel(q) || seen[mask.index(q)] {
                    continue;
                }
                let i = mask.index(q);
                seen[i] = true;
                let c = cost + step_cost_units(dx, dy) + node[i];
                go(mask, node, q, goal, eight, c, seen, best);
                seen[i] = false;
            }
        }
    }
    let mut seen = vec![false; node.len()];
    seen[mask.index(start)] = true;
    let mut best = None;
    go(mask, node, start, goal, eight, 0, &mut seen, &mut best);
    best
}

#[test]
fn planner_agrees_with_exhaustive_search_on_small_masks() {
    let cases: Vec<Case> = corpus(3000, 88)
        .into_iter()
        .filter(|c| c.mask.width() * c.mask.height() <= 24)
        .take(60)
        .collect();
    assert_eq!(cases.len(), 60);
    for (i, c) in cases.iter().enumerate() {
        let heat = ndt_heatmap(&c.mask).unwrap();
        let max_h = heat.max();
        for (omega, conn) in [
            (0.0, Connectivity::Eight),
            (2.0, Connectivity::Eight),
            (1.0, Connectivity::Four),
        ] {
            let node: Vec<u64> = heat
                .cells()
                .iter()
                .map(|&h| charge_units(omega, max_h - h))
                .collect();
            let cfg = PlannerConfig {
                omega,
                connectivity: conn,
                centering_mode: CenteringMode::PenalizeBoundary,
            };
            let got = plan_bda_star(&c.mask, &heat, c.start, c.goal, &cfg)
                .ok()
                .map(|p| p.cost_units);
            let want = exhaustive(&c.mask, &node, c.start, c.goal, conn == Connectivity::Eight);
            assert_eq!(got, want, "case {i}, omega {omega}, {conn:?}");
        }
    }
}

fn boundary_sum(ph: &VesselPhantom, omega: f64, goal: Pixel) -> (f64, f64) {
    let heat = ndt_heatmap(&ph.mask).unwrap();
    let max_h = heat.max();
    let plan = plan_bda_star(
        &ph.mask,
        &heat,
        ph.start,
        goal,
        &PlannerConfig::with_omega(omega),
    )
    .unwrap();
    let b = plan.points[1..].iter().map(|&p| max_h - heat.at(p)).sum();
    (b, plan.length())
}

#[test]
fn larger_omega_never_raises_the_boundary_penalty() {
    let ph = standard_aorta();
    for name in AORTA_TARGETS {
        let goal = ph.target(name).unwrap();
        let runs: Vec<(f64, f64)> = [0.0, 1.0, 2.0, 4.0]
            .iter()
            .map(|&w| boundary_sum(&ph, w, goal))
            .collect();
        for w in runs.windows(2) {
            // fixed-point charges allow a sub-unit slack per node
            assert!(w[1].0 <= w[0].0 + 1e-6, "{name}: {runs:?}");
            assert!(w[1].1 + 1e-9 >= w[0].1, "{name}: {runs:?}");
        }
    }
}

#[test]
fn corridor_plan_follows_the_centerline() {
    let ph = generate_corridor(100.0, 10.0, 2.0).unwrap();
    let goal = ph.target("END").unwrap();
    let dt = distance_transform(&ph.mask);
    let center = dt.max();
    for omega in [1.0, 2.0, 4.0] {
        let heat = ndt_heatmap(&ph.mask).unwrap();
        let plan = plan_bda_star(
            &ph.mask,
            &heat,
            ph.start,
            goal,
            &PlannerConfig::with_omega(omega),
        )
        .unwrap();
        // end walls dominate within a half width of either end
        let interior = plan
            .points
            .iter()
            .filter(|p| p.x >= ph.start.x + 12 && p.x <= goal.x - 12);
        assert!(interior.clone().count() > 150);
        assert!(
            interior.into_iter().all(|&p| dt.at(p) >= center - 1.0),
            "omega {omega}"
        );
    }
}

#[test]
fn bca_path_and_greedy_enter_the_bca_branch() {
    let ph = Arc::new(standard_aorta());
    let branch = &ph.branch_polylines["BCA"];
    let mid = branch[branch.len() / 2].to_point();
    let heat = ndt_heatmap(&ph.mask).unwrap();
    let plan = plan_bda_star(
        &ph.mask,
        &heat,
        ph.start,
        ph.target("BCA").unwrap(),
        &PlannerConfig::with_omega(2.0),
    )
    .unwrap();
    assert!(plan.points.iter().any(|p| p.to_point().dist(mid) <= 3.0));

    let mut env = NavEnv::new(ph.clone(), EnvConfig::for_target("BCA")).unwrap();
    env.reset().unwrap();
    let recs = evaluate(&mut GreedyPolicy::default(), || Ok(env.clone()), 1, 5).unwrap();
    let r = &recs[0];
    assert_eq!(r.termination, Termination::Success);
    let lumen_px = distance_transform(&ph.mask).at(branch[branch.len() / 2]);
    assert!(r.steps.iter().any(|s| s.tip.dist(mid) <= lumen_px + 2.0));
    for other in ["LCA", "LSA"] {
        let t = ph.target(other).unwrap().to_point();
        assert!(
            r.steps.iter().all(|s| s.tip.dist(t) > 40.0),
            "wandered into {other}"
        );
    }
}

fn corridor_env(cfg: EnvConfig) -> NavEnv {
    let ph = Arc::new(generate_corridor(100.0, 10.0, 2.0).unwrap());
    let mut env = NavEnv::new(ph, cfg).unwrap();
    env.reset().unwrap();
    env
}

#[test]
fn episode_times_out_after_max_steps() {
    let mut env = corridor_env(EnvConfig::for_target("END"));
    for k in 1..=50 {
        let s = env.step(Action::new(0.0, 7.0)).unwrap();
        assert_eq!(s.done, k == 50);
        assert_eq!(s.info.reward_case, RewardCase::Continuous);
    }
    assert!(!env.is_active());
    assert!(matches!(
        env.step(Action::new(1.0, 0.0)),
        Err(Error::EpisodeFinished)
    ));
    env.reset().unwrap();
    assert!(env.is_active());
}

#[test]
fn commands_are_clamped_to_the_limits() {
    let mut env = corridor_env(EnvConfig::for_target("END"));
    let s = env.step(Action::new(100.0, 400.0)).unwrap();
    assert_eq!(s.info.commanded.translate_mm, 20.0);
    assert_eq!(s.info.commanded.rotate_deg, 90.0);
    let s = env.step(Action::new(-100.0, -400.0)).unwrap();
    assert_eq!(s.info.commanded.translate_mm, -20.0);
    assert_eq!(s.info.commanded.rotate_deg, -90.0);
}

#[test]
fn leaving_the_movement_interval_ends_the_episode() {
    let mut cfg = EnvConfig::for_target("END");
    cfg.forward_limit_path_factor = None;
    cfg.reward.forward_limit_mm = 10.0;
    let mut env = corridor_env(cfg);
    let s = env.step(Action::new(20.0, 0.0)).unwrap();
    assert!(s.done);
    assert_eq!(s.reward, -50.0);
    assert_eq!(s.info.termination, Some(Termination::OutOfRange));
}

#[test]
fn pulling_at_the_entry_does_nothing() {
    let mut env = corridor_env(EnvConfig::for_target("END"));
    let start = env.state().tip;
    let s = env.step(Action::new(-20.0, 0.0)).unwrap();
    assert_eq!(s.info.executed_mm, 0.0);
    assert!(s.info.truncated);
    assert_eq!(env.state().tip, start);
}

fn cli(out: &Path, args: &[&str]) {
    let mut argv = vec!["vascnav", "--out-dir", out.to_str().unwrap(), "--seed", "3"];
    argv.extend_from_slice(args);
    run_from(argv).unwrap();
}

fn manifest(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn cli_generate_plan_run_report() {
    let root = tempfile::tempdir().unwrap();
    let gen = root.path().join("gen");
    cli(
        &gen,
        &[
            "phantom",
            "gen",
            "--kind",
            "corridor",
            "--length-mm",
            "60",
            "--name",
            "c.png",
        ],
    );
    let mask = gen.join("c.png");
    assert!(mask.exists());

    let plan_dir = root.path().join("plan");
    cli(
        &plan_dir,
        &[
            "plan",
            "--phantom",
            mask.to_str().unwrap(),
            "--target",
            "END",
        ],
    );
    let csv = std::fs::read_to_string(plan_dir.join("path.csv")).unwrap();
    assert!(csv.lines().count() > 100);
    assert!(std::fs::read_to_string(plan_dir.join("path.svg"))
        .unwrap()
        .contains("<svg"));
    assert_eq!(manifest(&plan_dir)["command"], "plan");

    let run_dir = root.path().join("run");
    cli(
        &run_dir,
        &[
            "run",
            "--phantom",
            "corridor",
            "--target",
            "END",
            "--episodes",
            "3",
        ],
    );
    let records = read_records(run_dir.join("records.jsonl")).unwrap();
    assert_eq!(records.len(), 3);
    assert!(records.iter().all(|r| r.is_success()));
    for f in [
        "steps.jsonl",
        "metrics.csv",
        "trajectories.png",
        "trajectories.svg",
    ] {
        assert!(run_dir.join(f).exists(), "{f}");
    }
    let m = manifest(&run_dir);
    assert_eq!(m["seed"], 3);

    let report_dir = root.path().join("report");
    cli(
        &report_dir,
        &[
            "report",
            "--records",
            run_dir.join("records.jsonl").to_str().unwrap(),
        ],
    );
    let table = std::fs::read_to_string(report_dir.join("time_comparison.csv")).unwrap();
    assert!(table
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("autonomous,END,3,3,"));
}

#[test]
fn cli_train_then_run_q_policy() {
    let root = tempfile::tempdir().unwrap();
    let train = root.path().join("train");
    cli(
        &train,
        &["train-q", "--episodes", "600", "--eval-episodes", "5"],
    );
    let table = train.join("q_table.json");
    assert!(table.exists());
    assert!(train.join("training_curve.csv").exists());
    let run = root.path().join("run");
    cli(
        &run,
        &[
            "run",
            "--policy",
            "q",
            "--q-table",
            table.to_str().unwrap(),
            "--phantom",
            "corridor",
            "--target",
            "END",
            "--episodes",
            "2",
        ],
    );
    assert_eq!(read_records(run.join("records.jsonl")).unwrap().len(), 2);
}

#[test]
fn cli_rejects_bad_input() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().to_str().unwrap();
    assert!(matches!(
        run_from(["vascnav", "--out-dir", out, "plan", "--bogus"]),
        Err(Error::Usage(_))
    ));
    assert!(run_from([
        "vascnav",
        "--out-dir",
        out,
        "plan",
        "--phantom",
        "corridor",
        "--target",
        "LSA"
    ])
    .is_err());
    assert!(run_from(["vascnav", "--out-dir", out, "run", "--policy", "q"]).is_err());
}

#[test]
fn open_8x8_plan_is_the_exhaustive_optimum() {
    let mask = GridMask::from_samples(8, 8, &[1; 64]).unwrap();
    let heat = ndt_heatmap(&mask).unwrap();
    let max_h = heat.max();
    let node: Vec<u64> = heat
        .cells()
        .iter()
        .map(|&h| charge_units(2.0, max_h - h))
        .collect();
    for (s, g) in [((0, 0), (7, 7)), ((0, 3), (7, 4)), ((1, 6), (6, 0))] {
        let (s, g) = (Pixel::new(s.0, s.1), Pixel::new(g.0, g.1));
        let plan = plan_bda_star(&mask, &heat, s, g, &PlannerConfig::with_omega(2.0)).unwrap();
        assert_eq!(
            Some(plan.cost_units),
            exhaustive(&mask, &node, s, g, true),
            "{s:?} -> {g:?}"
        );
    }
}

#[test]
fn corridor_centering_is_monotone_in_omega() {
    let ph = generate_corridor(100.0, 10.0, 2.0).unwrap();
    let heat = ndt_heatmap(&ph.mask).unwrap();
    let dt = distance_transform(&ph.mask);
    let goal = ph.target("END").unwrap();
    let means: Vec<f64> = [0.0, 1.0, 2.0, 4.0]
        .iter()
        .map(|&w| {
            plan_bda_star(
                &ph.mask,
                &heat,
                ph.start,
                goal,
                &PlannerConfig::with_omega(w),
            )
            .unwrap()
            .mean_field(&dt)
        })
        .collect();
    assert!(means.windows(2).all(|w| w[1] >= w[0]), "{means:?}");
}

#[test]
fn q_learning_improves_over_200_episode_windows() {
    let env = corridor_env(EnvConfig::for_target("END"));
    let run = q_learning_train(|| Ok(env.clone()), 2000, 11, &QLearningParams::default()).unwrap();
    let w = window_means(&run.curve, 200);
    assert_eq!(w.len(), 10);
    for p in w.windows(2) {
        assert!(p[1] >= p[0] - 0.1 * p[0].abs(), "{w:?}");
    }
    assert!(w[9] > w[0]);
}

#[test]
fn greedy_clears_the_corridor() {
    let env = corridor_env(EnvConfig::for_target("END"));
    let recs = evaluate(&mut GreedyPolicy::default(), || Ok(env.clone()), 5, 1).unwrap();
    for r in &recs {
        assert_eq!(r.termination, Termination::Success);
        assert_eq!(r.length, 4);
        assert!(r.steps.iter().all(|s| s.action.rotate_deg.abs() < 1e-9));
    }
}
