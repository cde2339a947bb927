//! Calibration run for the continuity-in-`s` threshold.
//!
//! Draws standard normal samples of size 100 on many seeds, computes the weighted
//! L₁ distance from each `f̂_s` to the log-concave fit along the default `s` list,
//! and prints per-seed sequences plus the largest final distance. The acceptance
//! threshold of 5e-2 was frozen after inspecting this output.
//!
//! `cargo run --release -p renyi-scd --example calibrate_continuity -- [seeds]`

use renyi_scd::experiments::{continuity_study, ExperimentSpec, Family};
use renyi_scd::SolverOptions;

fn main() {
    let seeds: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(50);
    let spec = ExperimentSpec {
        family: Family::Normal,
        study: None,
        s: None,
        s_list: Some(vec![-0.5, -0.3, -0.2, -0.1, -0.05, -0.02]),
        n_grid: vec![100],
        replicates: seeds,
        x0: vec![],
        seed: 0,
        parallelism: None,
        k: 2,
        solver: SolverOptions::default(),
    };
    let study = continuity_study(&spec).expect("continuity study");
    let mut worst: f64 = 0.0;
    let mut monotone = 0;
    for (rep, sw) in study.sweeps.iter().enumerate() {
        let last = *sw.weighted_l1.last().unwrap();
        worst = worst.max(last);
        monotone += sw.strictly_decreasing_tail(4) as usize;
        let seq: Vec<String> = sw.weighted_l1.iter().map(|d| format!("{d:.3e}")).collect();
        println!("replicate {rep:3}: {}", seq.join("  "));
    }
    println!("largest final distance: {worst:.4e}");
    println!("strictly decreasing tail: {monotone}/{seeds}");
}
