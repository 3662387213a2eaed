//! Evaluates greedy and random policies on every aorta target and writes the
//! metrics table and trajectory overlays.
//!
//! cargo run --release --example evaluate_metrics -- [out_dir]

use std::sync::Arc;

use vascnav::agents::{random_policy, GreedyPolicy, Policy};
use vascnav::env::{EnvConfig, NavEnv};
use vascnav::metrics::{evaluate, metrics_csv, render_trajectories, summarize};
use vascnav::phantom::{standard_aorta, AORTA_TARGETS};
use vascnav::raster::distance_transform;

fn main() -> vascnav::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "out".into());
    std::fs::create_dir_all(&out)?;
    let ph = Arc::new(standard_aorta());
    let dt = distance_transform(&ph.mask);
    for name in AORTA_TARGETS {
        let mut template = NavEnv::new(ph.clone(), EnvConfig::for_target(name))?;
        template.reset()?;
        let plan = template.plan().cloned();
        let policies: [Box<dyn Policy>; 2] = [
            Box::new(GreedyPolicy::default()),
            Box::new(random_policy(7)),
        ];
        for mut policy in policies {
            let recs = evaluate(policy.as_mut(), || Ok(template.clone()), 20, 7)?;
            let s = summarize(&recs, &ph)?;
            println!(
                "{name} {:<7} success {:.2}  length {}  movement {} mm  retracement {} mm  wall distance {} px",
                policy.name(),
                s.success_rate,
                s.episode_length,
                s.movement_distance_mm,
                s.retracement_distance_mm,
                s.boundary_distance_px
            );
            let stem = format!("{out}/{name}_{}", policy.name());
            std::fs::write(format!("{stem}.csv"), metrics_csv(&recs, &dt)?)?;
            render_trajectories(&recs, &ph, plan.as_ref()).save(format!("{stem}.png"))?;
        }
    }
    println!("wrote per-target metrics and overlays to {out}/");
    Ok(())
}
