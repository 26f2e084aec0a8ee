//! Problem instances, comparison schedules and preference datasets.

mod dataset;
mod file;
mod generate;

pub use dataset::{empirical_proportions, sample_dataset, Comparison, PreferenceDataset};
pub use file::InstanceFile;
pub use generate::{make_paper_instance, GeneratorConfig};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, numerical_rank};

/// Tolerance for probability vectors summing to one.
pub const SUM_TOL: f64 = 1e-12;
/// Slack granted to the reward bound and best-action uniqueness checks.
pub const REWARD_TOL: f64 = 1e-12;

/// Feature vectors `phi(k, i)` stored row-major as `[state][action][coord]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    num_states: usize,
    num_actions: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn new(num_states: usize, num_actions: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || dim == 0 {
            return Err(Error::Shape("S, A and d must be positive".into()));
        }
        if data.len() != num_states * num_actions * dim {
            return Err(Error::Shape(format!(
                "expected {} feature entries, got {}",
                num_states * num_actions * dim,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Shape("features must be finite".into()));
        }
        Ok(Self {
            num_states,
            num_actions,
            dim,
            data,
        })
    }

    pub fn from_nested(nested: &[Vec<Vec<f64>>]) -> Result<Self> {
        let s = nested.len();
        let a = nested.first().map_or(0, Vec::len);
        let d = nested.first().and_then(|r| r.first()).map_or(0, Vec::len);
        let mut data = Vec::with_capacity(s * a * d);
        for (k, row) in nested.iter().enumerate() {
            if row.len() != a {
                return Err(Error::Shape(format!("state {k} has {} actions, expected {a}", row.len())));
            }
            for (i, phi) in row.iter().enumerate() {
                if phi.len() != d {
                    return Err(Error::Shape(format!(
                        "feature ({k},{i}) has length {}, expected {d}",
                        phi.len()
                    )));
                }
                data.extend_from_slice(phi);
            }
        }
        Self::new(s, a, d, data)
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.num_states)
            .map(|k| (0..self.num_actions).map(|i| self.get(k, i).to_vec()).collect())
            .collect()
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `phi(k, i)`. Panics on out-of-range indices; see [`Features::try_get`].
    pub fn get(&self, state: usize, action: usize) -> &[f64] {
        let start = (state * self.num_actions + action) * self.dim;
        &self.data[start..start + self.dim]
    }

    pub fn try_get(&self, state: usize, action: usize) -> Result<&[f64]> {
        if state >= self.num_states || action >= self.num_actions {
            return Err(Error::OutOfRange(format!(
                "({state},{action}) outside {}x{}",
                self.num_states, self.num_actions
            )));
        }
        Ok(self.get(state, action))
    }

    /// `phi(k, i) - phi(k, j)`.
    pub fn diff(&self, state: usize, first: usize, second: usize) -> DVector<f64> {
        let a = self.get(state, first);
        let b = self.get(state, second);
        DVector::from_iterator(self.dim, a.iter().zip(b).map(|(x, y)| x - y))
    }

    /// Appends a zero coordinate to every feature vector.
    pub fn with_zero_coordinate(&self) -> Self {
        let mut data = Vec::with_capacity(self.num_states * self.num_actions * (self.dim + 1));
        for chunk in self.data.chunks(self.dim) {
            data.extend_from_slice(chunk);
            data.push(0.0);
        }
        Self {
            num_states: self.num_states,
            num_actions: self.num_actions,
            dim: self.dim + 1,
            data,
        }
    }
}

/// One observed comparison slot of a schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedPair {
    pub state: usize,
    pub first: usize,
    pub second: usize,
    pub proportion: f64,
}

/// Comparison proportions `N[k][i][j]`, nonzero only for `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl Schedule {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            values: vec![0.0; num_states * num_actions * num_actions],
        }
    }

    /// Builds a schedule from `(k, i, j, N)` entries with `i < j`.
    pub fn from_entries(
        num_states: usize,
        num_actions: usize,
        entries: &[(usize, usize, usize, f64)],
    ) -> Result<Self> {
        let mut s = Self::zeros(num_states, num_actions);
        for &(k, i, j, n) in entries {
            s.set(k, i, j, n)?;
        }
        Ok(s)
    }

    fn index(&self, k: usize, i: usize, j: usize) -> usize {
        (k * self.num_actions + i) * self.num_actions + j
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// `N[k][i][j]`; zero whenever `i >= j`.
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        if i >= j {
            0.0
        } else {
            self.values[self.index(k, i, j)]
        }
    }

    pub fn set(&mut self, k: usize, i: usize, j: usize, value: f64) -> Result<()> {
        if k >= self.num_states || j >= self.num_actions {
            return Err(Error::OutOfRange(format!("schedule entry ({k},{i},{j})")));
        }
        if i >= j {
            return Err(Error::InvalidSchedule(format!(
                "entries must have first < second, got ({k},{i},{j})"
            )));
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidSchedule(format!("N({k},{i},{j}) = {value} outside [0,1]")));
        }
        let idx = self.index(k, i, j);
        self.values[idx] = value;
        Ok(())
    }

    /// Observed slots (`N > 0`) in lexicographic `(k, i, j)` order.
    pub fn observed(&self) -> impl Iterator<Item = ObservedPair> + '_ {
        (0..self.num_states).flat_map(move |k| {
            (0..self.num_actions).flat_map(move |i| {
                (i + 1..self.num_actions).filter_map(move |j| {
                    let n = self.get(k, i, j);
                    (n > 0.0).then_some(ObservedPair {
                        state: k,
                        first: i,
                        second: j,
                        proportion: n,
                    })
                })
            })
        })
    }

    pub fn entries(&self) -> Vec<(usize, usize, usize, f64)> {
        self.observed()
            .map(|p| (p.state, p.first, p.second, p.proportion))
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Every entry multiplied by `factor` (not renormalized).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            num_states: self.num_states,
            num_actions: self.num_actions,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Outcome of the span-consistency predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Consistency {
    pub consistent: bool,
    /// First `(k, i, j)` (with `i < j`) whose difference escapes the observed span.
    pub witness: Option<(usize, usize, usize)>,
}

/// Checks that every within-state feature difference lies in the span of
/// the observed differences, by comparing numerical ranks.
pub fn check_consistency_with(features: &Features, schedule: &Schedule) -> Consistency {
    let d = features.dim();
    let mut observed: Vec<DVector<f64>> = schedule
        .observed()
        .map(|p| features.diff(p.state, p.first, p.second))
        .collect();
    let base_rank = numerical_rank(&observed, d);
    let all: Vec<(usize, usize, usize)> = (0..features.num_states())
        .flat_map(|k| {
            let a = features.num_actions();
            (0..a).flat_map(move |i| (i + 1..a).map(move |j| (k, i, j)))
        })
        .collect();
    let mut full = observed.clone();
    full.extend(all.iter().map(|&(k, i, j)| features.diff(k, i, j)));
    if numerical_rank(&full, d) == base_rank {
        return Consistency {
            consistent: true,
            witness: None,
        };
    }
    for &(k, i, j) in &all {
        if schedule.get(k, i, j) > 0.0 {
            continue;
        }
        observed.push(features.diff(k, i, j));
        let r = numerical_rank(&observed, d);
        observed.pop();
        if r > base_rank {
            return Consistency {
                consistent: false,
                witness: Some((k, i, j)),
            };
        }
    }
    // Rank grew on the joint matrix but no single column is responsible; this
    // only happens at the rank tolerance boundary.
    Consistency {
        consistent: false,
        witness: None,
    }
}

/// A validated problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    features: Features,
    theta: Vec<f64>,
    rho: Vec<f64>,
    schedule: Schedule,
    reward_bound: f64,
}

impl Instance {
    /// Validates every instance invariant.
    pub fn new(
        features: Features,
        theta: Vec<f64>,
        rho: Vec<f64>,
        schedule: Schedule,
        reward_bound: f64,
    ) -> Result<Self> {
        let (s, a, d) = (features.num_states(), features.num_actions(), features.dim());
        if theta.len() != d {
            return Err(Error::Shape(format!("theta has length {}, expected {d}", theta.len())));
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::Shape("theta must be finite".into()));
        }
        if rho.len() != s {
            return Err(Error::Shape(format!("rho has length {}, expected {s}", rho.len())));
        }
        if schedule.num_states() != s || schedule.num_actions() != a {
            return Err(Error::Shape(format!(
                "schedule is {}x{}, expected {s}x{a}",
                schedule.num_states(),
                schedule.num_actions()
            )));
        }
        if rho.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidRho("entries must be strictly positive".into()));
        }
        let rho_sum: f64 = rho.iter().sum();
        if (rho_sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidRho(format!("entries sum to {rho_sum}")));
        }
        let total = schedule.total();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidSchedule(format!("proportions sum to {total}")));
        }
        if !(reward_bound >= 0.0) || !reward_bound.is_finite() {
            return Err(Error::InvalidArgument(format!("reward bound {reward_bound} must be a nonnegative real")));
        }
        for k in 0..s {
            for i in 0..a {
                for j in i + 1..a {
                    if features.get(k, i) == features.get(k, j) {
                        return Err(Error::DuplicateFeatures {
                            state: k,
                            first: i,
                            second: j,
                        });
                    }
                }
            }
        }
        for k in 0..s {
            let mut best = f64::NEG_INFINITY;
            for i in 0..a {
                let r = dot(features.get(k, i), &theta);
                if r.abs() > reward_bound + REWARD_TOL {
                    return Err(Error::RewardBound {
                        state: k,
                        action: i,
                        reward: r,
                        bound: reward_bound,
                    });
                }
                best = best.max(r);
            }
            let winners = (0..a)
                .filter(|&i| dot(features.get(k, i), &theta) >= best - REWARD_TOL)
                .count();
            if winners != 1 {
                return Err(Error::NonUniqueBest { state: k });
            }
        }
        Ok(Self {
            features,
            theta,
            rho,
            schedule,
            reward_bound,
        })
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn reward_bound(&self) -> f64 {
        self.reward_bound
    }

    pub fn num_states(&self) -> usize {
        self.features.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.features.num_actions()
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }

    /// Same instance with a different parameter vector, revalidated.
    pub fn with_theta(&self, theta: Vec<f64>, reward_bound: f64) -> Result<Self> {
        Self::new(
            self.features.clone(),
            theta,
            self.rho.clone(),
            self.schedule.clone(),
            reward_bound,
        )
    }

    /// `<phi(k, i), theta>`.
    pub fn true_reward(&self, state: usize, action: usize) -> Result<f64> {
        Ok(dot(self.features.try_get(state, action)?, &self.theta))
    }

    /// Reward matrix indexed `[state][action]`.
    pub fn rewards(&self) -> Vec<Vec<f64>> {
        (0..self.num_states())
            .map(|k| {
                (0..self.num_actions())
                    .map(|i| dot(self.features.get(k, i), &self.theta))
                    .collect()
            })
            .collect()
    }

    /// Unique best action per state.
    pub fn best_actions(&self) -> Vec<usize> {
        self.rewards().iter().map(|row| argmax(row)).collect()
    }

    /// Gaps `max_j r[k][j] - r[k][i]`, indexed `[state][action]`.
    pub fn suboptimality_gaps(&self) -> Vec<Vec<f64>> {
        self.rewards()
            .into_iter()
            .map(|row| {
                let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                row.iter().map(|r| best - r).collect()
            })
            .collect()
    }

    pub fn check_consistency(&self) -> Consistency {
        check_consistency_with(&self.features, &self.schedule)
    }

    /// Largest absolute reward over all state-action pairs.
    pub fn max_abs_reward(&self) -> f64 {
        self.rewards()
            .iter()
            .flatten()
            .fold(0.0_f64, |m, r| m.max(r.abs()))
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &r) in row.iter().enumerate() {
        if r > row[best] {
            best = i;
        }
    }
    best
}
