//! One greedy path-following episode per aorta target, printed step by step,
//! with the last camera frame saved.
//!
//! cargo run --example greedy_episode -- [out_dir]

use std::sync::Arc;

use vascnav::agents::{GreedyPolicy, Policy, PolicyInput};
use vascnav::env::{EnvConfig, NavEnv};
use vascnav::phantom::{standard_aorta, AORTA_TARGETS};

fn main() -> vascnav::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "out".into());
    std::fs::create_dir_all(&out)?;
    let ph = Arc::new(standard_aorta());
    let mut policy = GreedyPolicy::default();
    for name in AORTA_TARGETS {
        let mut env = NavEnv::new(ph.clone(), EnvConfig::for_target(name))?;
        let mut obs = env.reset()?;
        println!("{name}:");
        loop {
            let action = policy.act(&PolicyInput::from_env(&env, Some(&obs)));
            let step = env.step(action)?;
            let i = step.info;
            println!(
                "  {:>2}: push {:>6.2} mm turn {:>6.1} deg  tip ({:5.1}, {:5.1})  reward {:>7.3}",
                i.step, action.translate_mm, action.rotate_deg, i.tip.x, i.tip.y, step.reward
            );
            obs = step.observation;
            if step.done {
                println!("  ended: {:?}", i.termination);
                break;
            }
        }
        obs.save_png(format!("{out}/greedy_{name}.png"))?;
    }
    Ok(())
}
