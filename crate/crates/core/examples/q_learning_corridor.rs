//! Trains a tabular Q-learning agent on the straight corridor and compares it
//! with the random baseline.
//!
//! cargo run --release --example q_learning_corridor

use std::sync::Arc;

use vascnav::agents::{q_learning_train, random_policy, QLearningParams, QPolicy};
use vascnav::env::{EnvConfig, NavEnv};
use vascnav::metrics::{evaluate, summarize};
use vascnav::phantom::{generate_corridor, CORRIDOR_TARGET};

fn main() -> vascnav::Result<()> {
    let ph = Arc::new(generate_corridor(100.0, 10.0, 2.0)?);
    let mut template = NavEnv::new(ph.clone(), EnvConfig::for_target(CORRIDOR_TARGET))?;
    template.reset()?;
    let make = || Ok(template.clone());

    let run = q_learning_train(make, 2000, 11, &QLearningParams::default())?;
    for chunk in run.curve.chunks(250) {
        let mean = chunk.iter().map(|c| c.episode_return).sum::<f64>() / chunk.len() as f64;
        println!(
            "episodes {:>4}-{:>4}: mean return {mean:>8.2}",
            chunk[0].episode,
            chunk[chunk.len() - 1].episode
        );
    }
    println!("{} states in the table", run.table.len());

    let learned = evaluate(&mut QPolicy::new(run.table), make, 50, 11)?;
    let random = evaluate(&mut random_policy(11), make, 50, 11)?;
    for (name, recs) in [("q-learning", &learned), ("random", &random)] {
        let s = summarize(recs, &ph)?;
        println!(
            "{name:<10} success {:.2}  length {}  reward {}",
            s.success_rate, s.episode_length, s.episode_reward
        );
    }
    Ok(())
}
