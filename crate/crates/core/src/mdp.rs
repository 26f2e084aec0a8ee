//! Known-transition MDP layer: occupancy measures, policy search over
//! estimated rewards, MDP regret and hardness.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{prepare, rl_low_with_model, Target, WeightModel};
use crate::instance::{Features, Instance, PreferenceDataset, Schedule};
use crate::par::Execution;
use crate::seed::rng_for;

/// Row sums must be within this of one.
pub const ROW_TOL: f64 = 1e-12;
/// Total-variation increment at which power iteration stops.
pub const TV_TOL: f64 = 1e-10;
pub const MAX_POWER_ITERS: usize = 100_000;
/// Largest policy space searched exhaustively.
pub const MAX_ENUMERATION: usize = 1_000_000;
/// Objective values within this (scaled) distance count as tied. Power
/// iteration stops at `TV_TOL`, so objectives carry errors near `1e-10`.
pub const OBJECTIVE_TOL: f64 = 1e-9;

const IMPROVE_TOL: f64 = 1e-12;
const MAX_POLICY_ITERS: usize = 10_000;

/// Transition probabilities `P(k' | k, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    num_states: usize,
    num_actions: usize,
    p: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct KernelFile {
    #[serde(rename = "P")]
    p: Vec<Vec<Vec<f64>>>,
}

impl TransitionKernel {
    /// `data` is row-major `S x A x S`.
    pub fn new(num_states: usize, num_actions: usize, data: Vec<f64>) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || data.len() != num_states * num_actions * num_states {
            return Err(Error::Shape(format!(
                "kernel data of length {} does not fit {num_states}x{num_actions}x{num_states}",
                data.len()
            )));
        }
        for (r, row) in data.chunks(num_states).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > ROW_TOL {
                return Err(Error::InvalidArgument(format!(
                    "kernel row (state {}, action {}) is not a probability vector",
                    r / num_actions,
                    r % num_actions
                )));
            }
        }
        Ok(Self { num_states, num_actions, p: data })
    }

    pub fn from_nested(nested: &[Vec<Vec<f64>>]) -> Result<Self> {
        let s = nested.len();
        let a = nested.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(s * a * s);
        for (k, rows) in nested.iter().enumerate() {
            if rows.len() != a {
                return Err(Error::Shape(format!("state {k} has {} actions, expected {a}", rows.len())));
            }
            for row in rows {
                if row.len() != s {
                    return Err(Error::Shape(format!("kernel row of length {}, expected {s}", row.len())));
                }
                data.extend_from_slice(row);
            }
        }
        Self::new(s, a, data)
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.num_states)
            .map(|k| (0..self.num_actions).map(|i| self.row(k, i).to_vec()).collect())
            .collect()
    }

    /// Every row equal to `rho`: the next state ignores the current one.
    pub fn state_independent(rho: &[f64], num_actions: usize) -> Result<Self> {
        let s = rho.len();
        let data = (0..s * num_actions).flat_map(|_| rho.iter().copied()).collect();
        Self::new(s, num_actions, data)
    }

    /// `P(k | k, i) = 1`.
    pub fn self_loops(num_states: usize, num_actions: usize) -> Result<Self> {
        let mut data = vec![0.0; num_states * num_actions * num_states];
        for k in 0..num_states {
            for i in 0..num_actions {
                data[(k * num_actions + i) * num_states + k] = 1.0;
            }
        }
        Self::new(num_states, num_actions, data)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn row(&self, state: usize, action: usize) -> &[f64] {
        let start = (state * self.num_actions + action) * self.num_states;
        &self.p[start..start + self.num_states]
    }

    /// State-to-state matrix of the chain induced by `pi`.
    pub fn policy_matrix(&self, pi: &Policy) -> Result<DMatrix<f64>> {
        self.check_policy(pi)?;
        let s = self.num_states;
        Ok(DMatrix::from_fn(s, s, |k, l| self.row(k, pi.actions[k])[l]))
    }

    fn check_policy(&self, pi: &Policy) -> Result<()> {
        if pi.actions.len() != self.num_states {
            return Err(Error::Shape(format!(
                "policy covers {} states, kernel has {}",
                pi.actions.len(),
                self.num_states
            )));
        }
        if let Some(&a) = pi.actions.iter().find(|&&a| a >= self.num_actions) {
            return Err(Error::OutOfRange(format!("policy action {a}")));
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let f: KernelFile = serde_json::from_str(s)?;
        Self::from_nested(&f.p)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&KernelFile { p: self.to_nested() })?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()?).map_err(|e| Error::io(path, e))
    }
}

/// Deterministic policy, one action per state.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Policy {
    pub actions: Vec<usize>,
}

impl Policy {
    pub fn new(actions: Vec<usize>) -> Self {
        Self { actions }
    }

    /// Policy number `index` in lexicographic order, state 0 most significant.
    pub fn from_index(mut index: usize, num_states: usize, num_actions: usize) -> Self {
        let mut actions = vec![0; num_states];
        for slot in actions.iter_mut().rev() {
            *slot = index % num_actions;
            index /= num_actions;
        }
        Self { actions }
    }
}

fn check_rho(rho: &[f64], num_states: usize) -> Result<()> {
    let sum: f64 = rho.iter().sum();
    if rho.len() != num_states || rho.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidRho(format!(
            "initial distribution must be a probability vector over {num_states} states"
        )));
    }
    Ok(())
}

/// Long-run average occupancy `lim (1/T) sum_t rho^T P_pi^t`.
///
/// Iterates the lazy chain `(I + P_pi) / 2`, which has the same time-average
/// limit but is aperiodic, so the plain iterates converge.
pub fn stationary_distribution(kernel: &TransitionKernel, pi: &Policy, rho: &[f64]) -> Result<Vec<f64>> {
    let m = kernel.policy_matrix(pi)?;
    check_rho(rho, kernel.num_states())?;
    let mut x = DVector::from_column_slice(rho);
    for _ in 0..MAX_POWER_ITERS {
        let next = (&x + m.tr_mul(&x)) * 0.5;
        let tv = 0.5 * (&next - &x).abs().sum();
        x = next;
        if tv < TV_TOL {
            let mut d: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
            let total: f64 = d.iter().sum();
            d.iter_mut().for_each(|v| *v /= total);
            return Ok(d);
        }
    }
    Err(Error::Numerical(format!(
        "stationary distribution did not converge in {MAX_POWER_ITERS} iterations"
    )))
}

/// `E_{k ~ d^pi}[rewards[k][pi(k)]]`.
pub fn policy_objective(rewards: &[Vec<f64>], kernel: &TransitionKernel, pi: &Policy, rho: &[f64]) -> Result<f64> {
    check_rewards(rewards, kernel)?;
    let d = stationary_distribution(kernel, pi, rho)?;
    Ok(d.iter().enumerate().map(|(k, p)| p * rewards[k][pi.actions[k]]).sum())
}

fn check_rewards(rewards: &[Vec<f64>], kernel: &TransitionKernel) -> Result<()> {
    if rewards.len() != kernel.num_states() || rewards.iter().any(|r| r.len() != kernel.num_actions()) {
        return Err(Error::Shape("reward table does not match the kernel".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Exhaustive search; the reference.
    #[default]
    Enumerate,
    /// Multichain average-reward policy iteration.
    Iterate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub policy: Policy,
    pub value: f64,
    /// Every policy within tolerance of the best value. Enumeration only;
    /// policy iteration reports just its own policy.
    pub optimal: Vec<Policy>,
}

fn policy_count(kernel: &TransitionKernel) -> Result<usize> {
    let mut total: usize = 1;
    for _ in 0..kernel.num_states() {
        total = total
            .checked_mul(kernel.num_actions())
            .filter(|&t| t <= MAX_ENUMERATION)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "{}^{} policies exceed the enumeration cap of {MAX_ENUMERATION}",
                    kernel.num_actions(),
                    kernel.num_states()
                ))
            })?;
    }
    Ok(total)
}

/// Every policy's objective, indexed as in [`Policy::from_index`].
pub fn enumerate_objectives(
    rewards: &[Vec<f64>],
    kernel: &TransitionKernel,
    rho: &[f64],
    exec: Execution,
) -> Result<Vec<f64>> {
    check_rewards(rewards, kernel)?;
    check_rho(rho, kernel.num_states())?;
    let count = policy_count(kernel)?;
    let (s, a) = (kernel.num_states(), kernel.num_actions());
    let idx: Vec<usize> = (0..count).collect();
    exec.map(&idx, |&p| policy_objective(rewards, kernel, &Policy::from_index(p, s, a), rho))
        .into_iter()
        .collect()
}

/// Maximizes `E_{k ~ d^pi}[rewards[k][pi(k)]]` over deterministic policies.
/// Ties resolve to the lexicographically smallest policy.
pub fn mdp_policy_search(
    rewards: &[Vec<f64>],
    kernel: &TransitionKernel,
    rho: &[f64],
    mode: SearchMode,
) -> Result<SearchOutcome> {
    match mode {
        SearchMode::Enumerate => {
            let values = enumerate_objectives(rewards, kernel, rho, Execution::default())?;
            let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let tol = OBJECTIVE_TOL * best.abs().max(1.0);
            let (s, a) = (kernel.num_states(), kernel.num_actions());
            let optimal: Vec<Policy> = (0..values.len())
                .filter(|&p| values[p] >= best - tol)
                .map(|p| Policy::from_index(p, s, a))
                .collect();
            Ok(SearchOutcome {
                policy: optimal[0].clone(),
                value: best,
                optimal,
            })
        }
        SearchMode::Iterate => {
            let policy = policy_iteration(rewards, kernel)?;
            let value = policy_objective(rewards, kernel, &policy, rho)?;
            Ok(SearchOutcome {
                policy: policy.clone(),
                value,
                optimal: vec![policy],
            })
        }
    }
}

/// Limit of `Q^t` for the lazy chain `Q = (I + P) / 2`, by repeated squaring.
/// Rows are renormalized after every squaring so that rounding in the row
/// sums cannot compound over `2^t` steps.
pub fn ergodic_projector(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = p.nrows();
    let mut m = (DMatrix::identity(n, n) + p) * 0.5;
    for _ in 0..64 {
        let mut next = &m * &m;
        for mut row in next.row_iter_mut() {
            let total = row.sum();
            row /= total;
        }
        let diff = (&next - &m).amax();
        m = next;
        if diff < 1e-15 {
            return Ok(m);
        }
    }
    Err(Error::Numerical("ergodic projector did not converge".into()))
}

/// Gain `g = Pi r` and bias `h = (I - P + Pi)^{-1} (r - g)` of a policy.
fn evaluate(p: &DMatrix<f64>, r: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let proj = ergodic_projector(p)?;
    let g = &proj * r;
    let n = p.nrows();
    let lhs = DMatrix::identity(n, n) - p + &proj;
    let h = lhs
        .lu()
        .solve(&(r - &g))
        .ok_or_else(|| Error::Numerical("singular fundamental matrix".into()))?;
    Ok((g, h))
}

fn policy_iteration(rewards: &[Vec<f64>], kernel: &TransitionKernel) -> Result<Policy> {
    check_rewards(rewards, kernel)?;
    let (s, a) = (kernel.num_states(), kernel.num_actions());
    let scale = rewards.iter().flatten().fold(1.0f64, |m, r| m.max(r.abs()));
    let tol = IMPROVE_TOL * scale;
    let expect = |k: usize, i: usize, v: &DVector<f64>| -> f64 {
        kernel.row(k, i).iter().zip(v.iter()).map(|(p, x)| p * x).sum()
    };
    let mut pi = Policy::new((0..s).map(|k| crate::instance::argmax(&rewards[k])).collect());
    for _ in 0..MAX_POLICY_ITERS {
        let p = kernel.policy_matrix(&pi)?;
        let r = DVector::from_fn(s, |k, _| rewards[k][pi.actions[k]]);
        let (g, h) = evaluate(&p, &r)?;

        // Gain improvement.
        let mut next = pi.clone();
        let mut gain_sets = Vec::with_capacity(s);
        for k in 0..s {
            let vals: Vec<f64> = (0..a).map(|i| expect(k, i, &g)).collect();
            let best = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let set: Vec<usize> = (0..a).filter(|&i| vals[i] >= best - tol).collect();
            if !set.contains(&pi.actions[k]) {
                next.actions[k] = (0..a).find(|&i| vals[i] == best).unwrap_or(set[0]);
            }
            gain_sets.push(set);
        }
        if next != pi {
            pi = next;
            continue;
        }

        // Bias improvement among gain-optimal actions.
        for k in 0..s {
            let vals: Vec<(usize, f64)> = gain_sets[k]
                .iter()
                .map(|&i| (i, rewards[k][i] + expect(k, i, &h)))
                .collect();
            let best = vals.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
            let current = vals.iter().find(|v| v.0 == pi.actions[k]).map(|v| v.1);
            if current.is_none_or(|c| c < best - tol) {
                next.actions[k] = vals.iter().find(|v| v.1 == best).map(|v| v.0).unwrap_or(gain_sets[k][0]);
            }
        }
        if next == pi {
            return Ok(pi);
        }
        pi = next;
    }
    Err(Error::Numerical(format!(
        "policy iteration did not converge in {MAX_POLICY_ITERS} iterations"
    )))
}

/// The unique optimal policy under the instance's true rewards.
pub fn optimal_policy(v: &Instance, kernel: &TransitionKernel) -> Result<SearchOutcome> {
    check_kernel(v, kernel)?;
    let out = mdp_policy_search(&v.rewards(), kernel, v.rho(), SearchMode::Enumerate)?;
    if out.optimal.len() > 1 {
        return Err(Error::NonUniqueOptimalPolicy);
    }
    Ok(out)
}

fn check_kernel(v: &Instance, kernel: &TransitionKernel) -> Result<()> {
    if kernel.num_states() != v.num_states() || kernel.num_actions() != v.num_actions() {
        return Err(Error::Shape(format!(
            "kernel is {}x{}, instance has {} states and {} actions",
            kernel.num_states(),
            kernel.num_actions(),
            v.num_states(),
            v.num_actions()
        )));
    }
    Ok(())
}

/// `E_{d^{pi*}}[r(k, pi*(k))] - E_{d^pi}[r(k, pi(k))]`.
pub fn mdp_regret(v: &Instance, kernel: &TransitionKernel, pi: &Policy) -> Result<f64> {
    let best = optimal_policy(v, kernel)?;
    mdp_regret_against(v, kernel, &best, pi)
}

/// [`mdp_regret`] with a precomputed optimum.
pub fn mdp_regret_against(v: &Instance, kernel: &TransitionKernel, best: &SearchOutcome, pi: &Policy) -> Result<f64> {
    if *pi == best.policy {
        return Ok(0.0);
    }
    let value = policy_objective(&v.rewards(), kernel, pi, v.rho())?;
    Ok((best.value - value).max(0.0))
}

/// Estimated relative rewards followed by policy search. When several
/// policies tie, a state-wise product of tie sets is resolved state by state
/// exactly as in static selection; any other tie is drawn uniformly.
pub fn rl_low_mdp(
    data: &PreferenceDataset,
    features: &Features,
    reward_bound: f64,
    kernel: &TransitionKernel,
    rho: &[f64],
    tie_seed: u64,
) -> Result<Policy> {
    let mode = if policy_count(kernel).is_ok() {
        SearchMode::Enumerate
    } else {
        SearchMode::Iterate
    };
    rl_low_mdp_with(data, features, reward_bound, kernel, rho, tie_seed, mode)
}

#[allow(clippy::too_many_arguments)]
pub fn rl_low_mdp_with(
    data: &PreferenceDataset,
    features: &Features,
    reward_bound: f64,
    kernel: &TransitionKernel,
    rho: &[f64],
    tie_seed: u64,
    mode: SearchMode,
) -> Result<Policy> {
    if kernel.num_states() != features.num_states() || kernel.num_actions() != features.num_actions() {
        return Err(Error::Shape("kernel does not match the feature map".into()));
    }
    let (schedule, model) = prepare(data, features)?;
    rl_low_mdp_with_model(data, &schedule, &model, reward_bound, kernel, rho, tie_seed, mode)
}

/// [`rl_low_mdp_with`] with a precomputed schedule and model.
#[allow(clippy::too_many_arguments)]
pub fn rl_low_mdp_with_model(
    data: &PreferenceDataset,
    schedule: &Schedule,
    model: &WeightModel,
    reward_bound: f64,
    kernel: &TransitionKernel,
    rho: &[f64],
    tie_seed: u64,
    mode: SearchMode,
) -> Result<Policy> {
    let report = rl_low_with_model(data, schedule, model, reward_bound, tie_seed)?;
    let out = mdp_policy_search(&report.rhat, kernel, rho, mode)?;
    Ok(break_policy_ties(out.optimal, tie_seed))
}

fn break_policy_ties(optimal: Vec<Policy>, tie_seed: u64) -> Policy {
    if optimal.len() == 1 {
        return optimal.into_iter().next().unwrap_or_default();
    }
    let s = optimal[0].actions.len();
    let sets: Vec<Vec<usize>> = (0..s)
        .map(|k| {
            let mut set: Vec<usize> = optimal.iter().map(|p| p.actions[k]).collect();
            set.sort_unstable();
            set.dedup();
            set
        })
        .collect();
    let product: usize = sets.iter().map(Vec::len).product();
    if product == optimal.len() {
        let actions = sets
            .iter()
            .enumerate()
            .map(|(k, set)| {
                if set.len() == 1 {
                    set[0]
                } else {
                    set[rng_for(tie_seed, "ties", &[k as u64]).random_range(0..set.len())]
                }
            })
            .collect();
        Policy::new(actions)
    } else {
        let mut rng = rng_for(tie_seed, "policy-ties", &[]);
        let pick = rng.random_range(0..optimal.len());
        optimal.into_iter().nth(pick).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyHardness {
    pub policy: Policy,
    pub gamma: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdpHardness {
    pub h_mdp: f64,
    pub optimal: Policy,
    /// One entry per policy other than the optimum.
    pub policies: Vec<PolicyHardness>,
}

/// `max_{pi != pi*} gamma(pi) / gap(pi)^2`, where `gamma(pi)` is the largest
/// variance proxy over the states where `pi` departs from `pi*`.
pub fn mdp_hardness(v: &Instance, kernel: &TransitionKernel) -> Result<MdpHardness> {
    let best = optimal_policy(v, kernel)?;
    let c = v.check_consistency();
    if !c.consistent {
        let (state, first, second) = c.witness.unwrap_or((0, 0, 0));
        return Err(Error::Inconsistent { state, first, second });
    }
    let model = WeightModel::new(v.features(), v.schedule())?;
    let (s, a) = (v.num_states(), v.num_actions());
    let count = policy_count(kernel)?;
    let rewards = v.rewards();
    let mut gammas = vec![vec![0.0; a]; s];
    for (k, row) in gammas.iter_mut().enumerate() {
        for (i, g) in row.iter_mut().enumerate() {
            if i != best.policy.actions[k] {
                *g = model.weights(Target::new(k, i, best.policy.actions[k]))?.gamma;
            }
        }
    }
    let mut policies = Vec::with_capacity(count.saturating_sub(1));
    let mut h_mdp = 0.0f64;
    for p in 0..count {
        let pi = Policy::from_index(p, s, a);
        if pi == best.policy {
            continue;
        }
        let gamma = (0..s)
            .filter(|&k| pi.actions[k] != best.policy.actions[k])
            .map(|k| gammas[k][pi.actions[k]])
            .fold(0.0, f64::max);
        let gap = best.value - policy_objective(&rewards, kernel, &pi, v.rho())?;
        if !(gap > 0.0) {
            return Err(Error::NonUniqueOptimalPolicy);
        }
        h_mdp = h_mdp.max(gamma / (gap * gap));
        policies.push(PolicyHardness { policy: pi, gamma, gap });
    }
    Ok(MdpHardness {
        h_mdp,
        optimal: best.policy,
        policies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn kernel_validation() {
        assert!(TransitionKernel::new(1, 1, vec![1.0]).is_ok());
        assert!(TransitionKernel::new(1, 1, vec![0.9]).is_err());
        assert!(TransitionKernel::new(2, 1, vec![1.5, -0.5, 0.5, 0.5]).is_err());
        assert!(TransitionKernel::new(2, 1, vec![1.0]).is_err());
    }

    #[test]
    fn kernel_json_round_trip() {
        let k = TransitionKernel::new(2, 1, vec![0.25, 0.75, 1.0, 0.0]).unwrap();
        let s = k.to_json_string().unwrap();
        assert!(s.contains("\"P\""));
        assert_eq!(TransitionKernel::from_json_str(&s).unwrap(), k);
    }

    #[test]
    fn state_independent_and_self_loop_chains_keep_rho() {
        let rho = [0.3, 0.7];
        let pi = Policy::new(vec![1, 0]);
        for k in [
            TransitionKernel::state_independent(&rho, 2).unwrap(),
            TransitionKernel::self_loops(2, 2).unwrap(),
        ] {
            let d = stationary_distribution(&k, &pi, &rho).unwrap();
            assert!(close(&d, &rho, 1e-12), "{d:?}");
        }
    }

    #[test]
    fn two_cycle_averages_to_half() {
        let k = TransitionKernel::new(2, 1, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let d = stationary_distribution(&k, &Policy::new(vec![0, 0]), &[1.0, 0.0]).unwrap();
        assert!(close(&d, &[0.5, 0.5], 1e-10), "{d:?}");
    }

    #[test]
    fn policy_indexing_is_lexicographic() {
        let all: Vec<Vec<usize>> = (0..4).map(|p| Policy::from_index(p, 2, 2).actions).collect();
        assert_eq!(all, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn enumerate_picks_hand_computed_best_on_cycle() {
        // Action 0 stays, action 1 moves to the other state.
        let k = TransitionKernel::new(2, 2, vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        let r = vec![vec![0.0, 2.0], vec![1.0, 0.5]];
        let rho = [0.5, 0.5];
        // (0,0): 0.5*0 + 0.5*1; (0,1): 0 -> stays in state 0 from 0, state 1 moves to 0: 0
        // (1,0): state 0 moves to 1, absorbed: 1; (1,1): cycle: 0.5*2 + 0.5*0.5.
        let expect = [0.5, 0.0, 1.0, 1.25];
        let vals = enumerate_objectives(&r, &k, &rho, Execution::Serial).unwrap();
        assert!(close(&vals, &expect, 1e-9), "{vals:?}");
        let out = mdp_policy_search(&r, &k, &rho, SearchMode::Enumerate).unwrap();
        assert_eq!(out.policy.actions, vec![1, 1]);
        let it = mdp_policy_search(&r, &k, &rho, SearchMode::Iterate).unwrap();
        assert_eq!(it.policy.actions, vec![1, 1]);
    }

    #[test]
    fn enumeration_cap() {
        let k = TransitionKernel::self_loops(21, 2).unwrap();
        let r = vec![vec![0.0, 1.0]; 21];
        let rho = vec![1.0 / 21.0; 21];
        assert!(mdp_policy_search(&r, &k, &rho, SearchMode::Enumerate).is_err());
        let it = mdp_policy_search(&r, &k, &rho, SearchMode::Iterate).unwrap();
        assert!(it.policy.actions.iter().all(|&a| a == 1));
    }

    #[test]
    fn product_ties_resolve_per_state() {
        let opt = vec![
            Policy::new(vec![0, 1]),
            Policy::new(vec![0, 2]),
            Policy::new(vec![1, 1]),
            Policy::new(vec![1, 2]),
        ];
        for seed in 0..50 {
            let p = break_policy_ties(opt.clone(), seed);
            let s = crate::estimator::select_best_actions(&[vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0]], seed);
            assert_eq!(p.actions, s.selections);
        }
    }
}
