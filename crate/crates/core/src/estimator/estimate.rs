use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rates::{success_rates, SuccessRates};
use super::weights::{Target, WeightModel};
use crate::dp::PrivacyParams;
use crate::error::{Error, Result};
use crate::instance::{check_consistency_with, empirical_proportions, Features, PreferenceDataset, Schedule};
use crate::seed::rng_for;

/// Reference action against which relative rewards are reported.
pub const REFERENCE_ACTION: usize = 0;

/// Values within this (scaled) distance of the row maximum count as tied.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    /// `rhat[k][i]` is the estimated reward of `i` relative to the reference action.
    pub rhat: Vec<Vec<f64>>,
    pub selections: Vec<usize>,
    pub tie_sets: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub privacy: Option<PrivacyParams>,
}

/// Clipped log-odds for each observed pair of `model`, in model order.
pub fn pair_log_odds(model: &WeightModel, rates: &SuccessRates) -> Result<Vec<f64>> {
    model
        .pairs()
        .iter()
        .map(|p| {
            if !rates.is_observed(p.state, p.first, p.second) {
                return Err(Error::InvalidSchedule(format!(
                    "no success rate for observed pair ({},{},{})",
                    p.state, p.first, p.second
                )));
            }
            rates.log_odds(p.state, p.first, p.second)
        })
        .collect()
}

/// `rhat[k,i,j] = sum_p w_p^{(k,i,j)} lo_p` for an arbitrary target.
pub fn relative_reward(model: &WeightModel, log_odds: &[f64], target: Target) -> Result<f64> {
    if target.first == target.second {
        return Ok(0.0);
    }
    let w = model.weights(target)?;
    Ok(w.values.iter().zip(log_odds).map(|(w, lo)| w * lo).sum())
}

/// Relative rewards of every action against `reference`, indexed `[state][action]`.
///
/// The fast path contracts the global vector with each target's coordinates;
/// the slow path sums explicit per-target weights. Both agree to rounding.
pub fn estimate_relative_rewards(
    model: &WeightModel,
    rates: &SuccessRates,
    reference: usize,
    fast_path: bool,
) -> Result<Vec<Vec<f64>>> {
    let lo = pair_log_odds(model, rates)?;
    estimate_from_log_odds(model, &lo, reference, fast_path)
}

pub(crate) fn estimate_from_log_odds(
    model: &WeightModel,
    log_odds: &[f64],
    reference: usize,
    fast_path: bool,
) -> Result<Vec<Vec<f64>>> {
    let f = model.features();
    let (s, a) = (f.num_states(), f.num_actions());
    if reference >= a {
        return Err(Error::OutOfRange(format!("reference action {reference}")));
    }
    let global = fast_path.then(|| model.global_vector(log_odds));
    let mut rhat = vec![vec![0.0; a]; s];
    for (k, row) in rhat.iter_mut().enumerate() {
        for (i, cell) in row.iter_mut().enumerate() {
            if i == reference {
                continue;
            }
            let t = Target::new(k, i, reference);
            *cell = match &global {
                Some(g) => g.dot(&model.target_coords(t)?),
                None => relative_reward(model, log_odds, t)?,
            };
        }
    }
    Ok(rhat)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub selections: Vec<usize>,
    pub tie_sets: Vec<Vec<usize>>,
}

/// Actions attaining the row maximum, up to [`TIE_TOL`].
pub fn tie_set(row: &[f64]) -> Vec<usize> {
    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_TOL * best.abs().max(1.0);
    (0..row.len()).filter(|&i| row[i] >= best - tol).collect()
}

/// Per-state argmax of `rhat`, breaking ties uniformly with a stream keyed by `(tie_seed, state)`.
pub fn select_best_actions(rhat: &[Vec<f64>], tie_seed: u64) -> Selection {
    let tie_sets: Vec<Vec<usize>> = rhat.iter().map(|row| tie_set(row)).collect();
    let selections = tie_sets
        .iter()
        .enumerate()
        .map(|(k, set)| {
            if set.len() == 1 {
                set[0]
            } else {
                let mut rng = rng_for(tie_seed, "ties", &[k as u64]);
                set[rng.random_range(0..set.len())]
            }
        })
        .collect();
    Selection { selections, tie_sets }
}

/// Empirical schedule plus weight model, refusing inconsistent restrictions.
pub fn prepare(data: &PreferenceDataset, features: &Features) -> Result<(Schedule, WeightModel)> {
    let schedule = empirical_proportions(data, features.num_states(), features.num_actions())?;
    if schedule.observed().next().is_none() {
        return Err(Error::InvalidArgument("dataset is empty".into()));
    }
    let c = check_consistency_with(features, &schedule);
    if !c.consistent {
        return Err(match c.witness {
            Some((state, first, second)) => Error::Inconsistent { state, first, second },
            None => Error::Numerical("consistency check is ambiguous at the rank tolerance".into()),
        });
    }
    let model = WeightModel::new(features, &schedule)?;
    Ok((schedule, model))
}

pub(crate) fn report_from_log_odds(
    model: &WeightModel,
    log_odds: &[f64],
    tie_seed: u64,
    privacy: Option<PrivacyParams>,
) -> Result<EstimateReport> {
    let rhat = estimate_from_log_odds(model, log_odds, REFERENCE_ACTION, true)?;
    let sel = select_best_actions(&rhat, tie_seed);
    Ok(EstimateReport {
        rhat,
        selections: sel.selections,
        tie_sets: sel.tie_sets,
        privacy,
    })
}

/// Full estimator: proportions, clipped success rates, locally optimal
/// weights, relative rewards against action 0, and per-state selection.
pub fn rl_low(data: &PreferenceDataset, features: &Features, reward_bound: f64, tie_seed: u64) -> Result<EstimateReport> {
    let (schedule, model) = prepare(data, features)?;
    rl_low_with_model(data, &schedule, &model, reward_bound, tie_seed)
}

/// Same as [`rl_low`] with a precomputed schedule and model.
pub fn rl_low_with_model(
    data: &PreferenceDataset,
    schedule: &Schedule,
    model: &WeightModel,
    reward_bound: f64,
    tie_seed: u64,
) -> Result<EstimateReport> {
    let rates = success_rates(data, schedule, reward_bound)?;
    let lo = pair_log_odds(model, &rates)?;
    report_from_log_odds(model, &lo, tie_seed, None)
}
