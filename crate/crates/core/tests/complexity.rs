//! Wall-clock scaling of the estimator. Kept in its own binary so that no
//! other test competes for the CPU while it measures.

mod common;

use std::time::Instant;

use rand::Rng;
use rllow_core::estimator::rl_low;
use rllow_core::instance::{sample_dataset, Features, Instance, Schedule};

use common::*;

fn dense_instance(seed: u64, s: usize, a: usize, d: usize) -> Instance {
    let mut g = rng(seed);
    let features = Features::new(s, a, d, (0..s * a * d).map(|_| g.random_range(-1.0..1.0)).collect()).unwrap();
    let theta: Vec<f64> = (0..d).map(|_| g.random_range(-1.0..1.0)).collect();
    let pairs = s * a * (a - 1) / 2;
    let mut entries = Vec::with_capacity(pairs);
    for k in 0..s {
        for i in 0..a {
            for j in i + 1..a {
                entries.push((k, i, j, 1.0 / pairs as f64));
            }
        }
    }
    let schedule = Schedule::from_entries(s, a, &entries).unwrap();
    let bound = max_abs_reward(&features, &theta);
    Instance::new(features, theta, vec![1.0 / s as f64; s], schedule, bound).unwrap()
}

fn median_seconds(v: &Instance, n: usize) -> f64 {
    let data = sample_dataset(v, n, 1).unwrap();
    let mut times: Vec<f64> = (0..31)
        .map(|t| {
            let start = Instant::now();
            let report = rl_low(&data, v.features(), v.reward_bound(), t).unwrap();
            std::hint::black_box(report);
            start.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times[times.len() / 2]
}

#[test]
fn doubling_states_roughly_doubles_the_cost() {
    let (a, d, n) = (6, 5, 20_000);
    let small = dense_instance(1, 8, a, d);
    let large = dense_instance(2, 16, a, d);
    median_seconds(&small, n);
    let t_small = median_seconds(&small, n);
    let t_large = median_seconds(&large, n);
    let ratio = t_large / t_small;
    assert!(ratio < 2.5, "time ratio {ratio:.2} ({t_small:.4}s -> {t_large:.4}s)");
}
