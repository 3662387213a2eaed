//! Plans from the entry to every aorta target with and without the centering
//! term and compares how far each path keeps from the wall.
//!
//! cargo run --example plan_aorta

use vascnav::phantom::{standard_aorta, AORTA_TARGETS};
use vascnav::planner::{plan_a_star, plan_bda_star, Connectivity, PlannerConfig};
use vascnav::raster::{distance_transform, ndt_heatmap};

fn main() -> vascnav::Result<()> {
    let ph = standard_aorta();
    let heat = ndt_heatmap(&ph.mask)?;
    let dt = distance_transform(&ph.mask);
    println!("target  omega  points  length_px  mean_wall_dist_px");
    for name in AORTA_TARGETS {
        let goal = ph.target(name)?;
        let plain = plan_a_star(&ph.mask, ph.start, goal, Connectivity::Eight)?;
        println!(
            "{name:<7} {:>5}  {:>6}  {:>9.2}  {:>17.3}",
            "A*",
            plain.len(),
            plain.length(),
            plain.mean_field(&dt)
        );
        for omega in [0.0, 1.0, 2.0, 4.0] {
            let p = plan_bda_star(
                &ph.mask,
                &heat,
                ph.start,
                goal,
                &PlannerConfig::with_omega(omega),
            )?;
            println!(
                "{name:<7} {omega:>5}  {:>6}  {:>9.2}  {:>17.3}",
                p.len(),
                p.length(),
                p.mean_field(&dt)
            );
        }
    }
    Ok(())
}
