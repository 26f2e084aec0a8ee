#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rllow_core::instance::{Features, Instance, Schedule};
use rllow_core::mdp::TransitionKernel;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One state, two actions, `r = (1, 0)`, every comparison between them.
pub fn t1() -> Instance {
    Instance::new(
        Features::new(1, 2, 1, vec![1.0, 0.0]).unwrap(),
        vec![1.0],
        vec![1.0],
        Schedule::from_entries(1, 2, &[(0, 0, 1, 1.0)]).unwrap(),
        1.0,
    )
    .unwrap()
}

/// Two identical states observed with proportions 0.2 and 0.8.
pub fn t2() -> Instance {
    Instance::new(
        Features::new(2, 2, 1, vec![1.0, 0.0, 1.0, 0.0]).unwrap(),
        vec![1.0],
        vec![0.5, 0.5],
        Schedule::from_entries(2, 2, &[(0, 0, 1, 0.2), (1, 0, 1, 0.8)]).unwrap(),
        1.0,
    )
    .unwrap()
}

pub struct Shape {
    pub max_states: usize,
    pub max_actions: usize,
    pub max_dim: usize,
}

pub const SMALL: Shape = Shape {
    max_states: 3,
    max_actions: 4,
    max_dim: 4,
};

fn uniform_vec(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Random consistent instance: features and theta uniform in `[-1, 1]`,
/// each pair observed with probability 0.7 and random positive proportion.
pub fn random_instance(rng: &mut impl Rng, shape: &Shape) -> Instance {
    loop {
        let v = random_instance_any(rng, shape);
        if v.check_consistency().consistent {
            return v;
        }
    }
}

/// Like [`random_instance`] but possibly inconsistent.
pub fn random_instance_any(rng: &mut impl Rng, shape: &Shape) -> Instance {
    loop {
        let s = rng.random_range(1..=shape.max_states);
        let a = rng.random_range(2..=shape.max_actions);
        let d = rng.random_range(1..=shape.max_dim);
        let Ok(features) = Features::new(s, a, d, uniform_vec(rng, s * a * d)) else {
            continue;
        };
        let theta = uniform_vec(rng, d);
        let mut entries = Vec::new();
        for k in 0..s {
            for i in 0..a {
                for j in i + 1..a {
                    if rng.random::<f64>() < 0.7 {
                        entries.push((k, i, j, rng.random_range(0.1..1.0)));
                    }
                }
            }
        }
        if entries.is_empty() {
            continue;
        }
        let total: f64 = entries.iter().map(|e| e.3).sum();
        for e in &mut entries {
            e.3 /= total;
        }
        let Ok(schedule) = Schedule::from_entries(s, a, &entries) else {
            continue;
        };
        let raw_rho: Vec<f64> = (0..s).map(|_| rng.random_range(0.2..1.0)).collect();
        let rho_total: f64 = raw_rho.iter().sum();
        let rho: Vec<f64> = raw_rho.iter().map(|x| x / rho_total).collect();
        let bound = max_abs_reward(&features, &theta);
        if let Ok(v) = Instance::new(features, theta, rho, schedule, bound) {
            return v;
        }
    }
}

pub fn max_abs_reward(features: &Features, theta: &[f64]) -> f64 {
    features
        .to_nested()
        .iter()
        .flatten()
        .map(|phi| phi.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>().abs())
        .fold(0.0, f64::max)
}

/// Same structure as `v` with a new parameter and a bound covering both.
pub fn with_theta(v: &Instance, theta: Vec<f64>) -> Option<Instance> {
    let bound = max_abs_reward(v.features(), &theta).max(v.reward_bound());
    v.with_theta(theta, bound).ok()
}

pub fn random_perturbation(rng: &mut impl Rng, v: &Instance, scale: f64) -> Vec<f64> {
    v.theta().iter().map(|t| t + scale * rng.random_range(-1.0..1.0)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sum N <phi_i - phi_j, delta>^2` computed from scratch.
pub fn divergence(v: &Instance, delta: &[f64]) -> f64 {
    let f = v.features();
    v.schedule()
        .observed()
        .map(|p| {
            let x = dot(f.get(p.state, p.first), delta) - dot(f.get(p.state, p.second), delta);
            p.proportion * x * x
        })
        .sum()
}

/// Random vector in the span of observed feature differences.
pub fn random_span_vector(rng: &mut impl Rng, v: &Instance) -> Vec<f64> {
    let f = v.features();
    let mut z = vec![0.0; v.dim()];
    for p in v.schedule().observed() {
        let c: f64 = rng.random_range(-1.0..1.0);
        for (r, (a, b)) in z.iter_mut().zip(f.get(p.state, p.first).iter().zip(f.get(p.state, p.second))) {
            *r += c * (a - b);
        }
    }
    z
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, var.sqrt())
}

/// Probability of `k` successes in `n` Bernoulli(p) trials.
pub fn binomial_pmf(n: usize, k: usize, p: f64) -> f64 {
    let mut log_c = 0.0;
    for t in 0..k {
        log_c += ((n - t) as f64).ln() - ((t + 1) as f64).ln();
    }
    (log_c + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
}

/// Exact expected regret of the estimator on the one-pair instance:
/// wrong when the better action wins fewer than half, a fair coin on a tie.
pub fn t1_exact_regret(n: usize) -> f64 {
    let p = 1.0 / (1.0 + (-1.0f64).exp());
    (0..=n)
        .map(|w| {
            let pmf = binomial_pmf(n, w, p);
            match (2 * w).cmp(&n) {
                std::cmp::Ordering::Less => pmf,
                std::cmp::Ordering::Equal => 0.5 * pmf,
                std::cmp::Ordering::Greater => 0.0,
            }
        })
        .sum()
}

/// Dense positive rows, or one-hot rows when `sparse` comes up.
pub fn random_kernel(rng: &mut impl Rng, s: usize, a: usize) -> TransitionKernel {
    let sparse = rng.random::<bool>();
    let mut data = Vec::with_capacity(s * a * s);
    for _ in 0..s * a {
        let mut row: Vec<f64> = if sparse {
            let mut r = vec![0.0; s];
            r[rng.random_range(0..s)] = 1.0;
            r
        } else {
            (0..s).map(|_| rng.random::<f64>() + 1e-3).collect()
        };
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= total);
        data.extend(row);
    }
    TransitionKernel::new(s, a, data).unwrap()
}
