//! Converts guidewire commands into stepper run times and back.
//!
//! cargo run --example motor_timing

use vascnav::actuation::{push_pull_distance_mm, rotation_angle_deg, schedule, MotorParams};

fn main() -> vascnav::Result<()> {
    let p = MotorParams::default();
    println!(
        "rpm {} d {} r {} mm epsilon {} mm c {}",
        p.rpm, p.d, p.r, p.epsilon, p.c
    );
    for (t, r) in [(20.0, 90.0), (-5.0, 10.0), (0.5, -45.0), (0.0, 0.0)] {
        let s = schedule(t, r, &p)?;
        println!(
            "{t:>5} mm {r:>5} deg -> push-pull {:>9.4} ms (dir {:>2}), rotation {:>7.3} ms (dir {:>2})",
            s.push_pull_ms, s.push_pull_dir, s.rotation_ms, s.rotation_dir
        );
        let back_t = push_pull_distance_mm(s.push_pull_ms, &p)?;
        let back_r = rotation_angle_deg(s.rotation_ms, &p)?;
        assert!((back_t - t.abs()).abs() < 1e-9 && (back_r - r.abs()).abs() < 1e-9);
    }
    Ok(())
}
