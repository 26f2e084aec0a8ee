//! Reward-bounded maximum-likelihood baseline with greedy selection.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{select_best_actions, Selection};
use crate::instance::{Features, Instance, PreferenceDataset};
use crate::linalg::{dot, sigmoid, symmetric_pinv_solve};

pub const GRAD_TOL: f64 = 1e-8;
pub const MAX_ITERS: usize = 500;

const ARMIJO: f64 = 1e-4;
const FEAS_TOL: f64 = 1e-12;
const PINV_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleFit {
    pub theta_hat: Vec<f64>,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Aggregated comparisons: difference vector, wins of the first action, total.
struct Problem {
    rows: Vec<(DVector<f64>, f64, f64)>,
    total: f64,
}

impl Problem {
    fn new(data: &PreferenceDataset, features: &Features) -> Result<Self> {
        let mut groups: BTreeMap<(usize, usize, usize), (f64, f64)> = BTreeMap::new();
        for r in data.records() {
            features.try_get(r.state, r.second)?;
            let e = groups.entry((r.state, r.first, r.second)).or_default();
            e.0 += f64::from(u8::from(r.winner_is_first));
            e.1 += 1.0;
        }
        let rows = groups
            .into_iter()
            .map(|((k, i, j), (w, c))| (features.diff(k, i, j), w, c))
            .collect();
        Ok(Self {
            rows,
            total: data.len() as f64,
        })
    }

    /// Mean negative log-likelihood.
    fn value(&self, theta: &DVector<f64>) -> f64 {
        let s: f64 = self
            .rows
            .iter()
            .map(|(x, w, c)| {
                let u = x.dot(theta);
                w * log1p_exp(-u) + (c - w) * log1p_exp(u)
            })
            .sum();
        s / self.total
    }

    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(theta.len());
        for (x, w, c) in &self.rows {
            g.axpy((c * sigmoid(x.dot(theta)) - w) / self.total, x, 1.0);
        }
        g
    }

    fn hessian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let d = theta.len();
        let mut h = DMatrix::zeros(d, d);
        for (x, _, c) in &self.rows {
            let s = sigmoid(x.dot(theta));
            h.ger(c * s * (1.0 - s) / self.total, x, x, 1.0);
        }
        h
    }
}

/// `ln(1 + e^x)` without overflow.
fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Constraint rows `a` with `a . theta <= L`: `+-phi(k, i)` for nonzero features.
fn constraints(features: &Features) -> Vec<DVector<f64>> {
    let mut out = Vec::new();
    for k in 0..features.num_states() {
        for i in 0..features.num_actions() {
            let phi = features.get(k, i);
            if phi.iter().any(|&x| x != 0.0) {
                let v = DVector::from_column_slice(phi);
                out.push(-&v);
                out.push(v);
            }
        }
    }
    out
}

/// Newton step restricted to the working set: solves
/// `[H A'; A 0] [p; mu] = [-g; 0]` in the least-squares sense.
fn kkt_step(h: &DMatrix<f64>, g: &DVector<f64>, active: &[&DVector<f64>]) -> Result<(DVector<f64>, DVector<f64>)> {
    let d = g.len();
    let m = active.len();
    let mut k = DMatrix::zeros(d + m, d + m);
    k.view_mut((0, 0), (d, d)).copy_from(h);
    for (c, a) in active.iter().enumerate() {
        k.view_mut((0, d + c), (d, 1)).copy_from(*a);
        k.view_mut((d + c, 0), (1, d)).copy_from(&a.transpose());
    }
    let mut rhs = DVector::zeros(d + m);
    rhs.rows_mut(0, d).copy_from(&(-g));
    let sol = symmetric_pinv_solve(&k, &rhs, PINV_RTOL);
    if sol.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("newton system has no finite solution".into()));
    }
    Ok((sol.rows(0, d).into_owned(), sol.rows(d, m).into_owned()))
}

/// Maximizes the Bradley-Terry-Luce likelihood subject to
/// `|<phi(k, i), theta>| <= L` with a primal active-set damped Newton method
/// started at zero.
pub fn mle_fit(data: &PreferenceDataset, features: &Features, reward_bound: f64) -> Result<MleFit> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("dataset is empty".into()));
    }
    if !(reward_bound >= 0.0) {
        return Err(Error::InvalidArgument(format!("reward bound {reward_bound} must be nonnegative")));
    }
    let prob = Problem::new(data, features)?;
    let cons = constraints(features);
    let bound = reward_bound;
    let mut theta = DVector::zeros(features.dim());
    let mut working: Vec<usize> = Vec::new();
    let mut f = prob.value(&theta);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERS {
        iterations += 1;
        let g = prob.gradient(&theta);
        let h = prob.hessian(&theta);
        let active: Vec<&DVector<f64>> = working.iter().map(|&c| &cons[c]).collect();
        let (p, mu) = kkt_step(&h, &g, &active)?;

        let mut reduced = g.clone();
        for (a, m) in active.iter().zip(mu.iter()) {
            reduced.axpy(*m, a, 1.0);
        }
        if reduced.norm() <= GRAD_TOL || p.norm() <= 1e-14 {
            // Stationary on the working set: release a constraint pulling the wrong way.
            match mu.iter().enumerate().filter(|(_, &m)| m < -GRAD_TOL).min_by(|a, b| a.1.total_cmp(b.1)) {
                Some((c, _)) => {
                    working.remove(c);
                    continue;
                }
                None => {
                    converged = true;
                    break;
                }
            }
        }

        let mut alpha_max = f64::INFINITY;
        let mut blocking = None;
        for (c, a) in cons.iter().enumerate() {
            if working.contains(&c) {
                continue;
            }
            let ap = a.dot(&p);
            if ap > FEAS_TOL {
                let room = (bound - a.dot(&theta)).max(0.0) / ap;
                if room < alpha_max {
                    alpha_max = room;
                    blocking = Some(c);
                }
            }
        }
        let slope = g.dot(&p);
        if slope >= 0.0 {
            // Numerical noise only; the step no longer descends.
            converged = reduced.norm() <= 1e-6;
            break;
        }
        let mut alpha = alpha_max.min(1.0);
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &theta + &p * alpha;
            let ft = prob.value(&trial);
            if ft <= f + ARMIJO * alpha * slope {
                theta = trial;
                f = ft;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            converged = reduced.norm() <= 1e-6;
            break;
        }
        if let Some(c) = blocking {
            if alpha >= alpha_max {
                working.push(c);
            }
        }
    }

    let theta_hat: Vec<f64> = theta.iter().copied().collect();
    let log_likelihood = -f * prob.total;
    if !log_likelihood.is_finite() {
        return Err(Error::Numerical("non-finite likelihood".into()));
    }
    Ok(MleFit {
        theta_hat,
        log_likelihood,
        converged,
        iterations,
    })
}

/// Log-likelihood of a parameter vector on a dataset.
pub fn log_likelihood(data: &PreferenceDataset, features: &Features, theta: &[f64]) -> Result<f64> {
    if theta.len() != features.dim() {
        return Err(Error::Shape(format!("theta has length {}, expected {}", theta.len(), features.dim())));
    }
    let prob = Problem::new(data, features)?;
    Ok(-prob.value(&DVector::from_column_slice(theta)) * prob.total)
}

/// Gradient of the negative log-likelihood.
pub fn nll_gradient(data: &PreferenceDataset, features: &Features, theta: &[f64]) -> Result<Vec<f64>> {
    let prob = Problem::new(data, features)?;
    let g = prob.gradient(&DVector::from_column_slice(theta)) * prob.total;
    Ok(g.iter().copied().collect())
}

/// Greedy actions under the fitted rewards, ties broken as in [`select_best_actions`].
pub fn mle_select(fit: &MleFit, features: &Features, tie_seed: u64) -> Result<Selection> {
    if fit.theta_hat.len() != features.dim() {
        return Err(Error::Shape("fit dimension does not match features".into()));
    }
    let rewards: Vec<Vec<f64>> = (0..features.num_states())
        .map(|k| {
            (0..features.num_actions())
                .map(|i| dot(features.get(k, i), &fit.theta_hat))
                .collect()
        })
        .collect();
    Ok(select_best_actions(&rewards, tie_seed))
}

/// Appends a zero coordinate to every feature and `-sum(theta)` to `theta`,
/// so the parameters sum to zero while all rewards stay the same.
pub fn zero_sum_reparam(v: &Instance) -> Result<Instance> {
    let mut theta = v.theta().to_vec();
    theta.push(-v.theta().iter().sum::<f64>());
    Instance::new(
        v.features().with_zero_coordinate(),
        theta,
        v.rho().to_vec(),
        v.schedule().clone(),
        v.reward_bound(),
    )
}
