//! Drives the guidewire by hand: pushes along the corridor, turns into the
//! wall to show sliding, then pulls back along the inserted body.
//!
//! cargo run --example simulate_guidewire

use vascnav::phantom::generate_corridor;
use vascnav::simulator::{sim_reset, sim_step, Action, ActionLimits};

fn main() -> vascnav::Result<()> {
    let ph = generate_corridor(100.0, 10.0, 2.0)?;
    let limits = ActionLimits::default();
    let mut s = sim_reset(&ph);
    println!(
        "start tip ({:.1}, {:.1}) heading {:.1}",
        s.tip.x, s.tip.y, s.heading
    );
    let script = [
        Action::new(20.0, 0.0),
        Action::new(10.0, 60.0),
        Action::new(10.0, 0.0),
        Action::new(0.0, -60.0),
        Action::new(-15.0, 0.0),
        Action::new(-40.0, 0.0),
        Action::new(-20.0, 0.0),
    ];
    for a in script {
        let d = sim_step(&mut s, a, &ph, &limits);
        println!(
            "cmd {:>6.1} mm {:>6.1} deg -> moved {:>6.2} mm{}  tip ({:6.1}, {:5.1}) heading {:6.1} inserted {:5.2} mm",
            d.commanded.translate_mm,
            d.commanded.rotate_deg,
            d.executed_mm,
            if d.truncated { " (truncated)" } else { "" },
            s.tip.x,
            s.tip.y,
            s.heading,
            s.inserted_mm,
        );
    }
    Ok(())
}
