//! Label-private estimation through the Gaussian mechanism on success rates.

use std::collections::BTreeMap;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{
    pair_log_odds, prepare, report_from_log_odds, success_rates, EstimateReport, SuccessRates, WeightModel,
};
use crate::instance::{Features, PreferenceDataset, Schedule};
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        let p = Self { epsilon, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let open = |x: f64| x > 0.0 && x < 1.0;
        if !open(self.epsilon) || !open(self.delta) {
            return Err(Error::InvalidArgument(format!(
                "privacy parameters must lie in (0,1): epsilon={}, delta={}",
                self.epsilon, self.delta
            )));
        }
        Ok(())
    }

    /// `ln(1.25 / delta)`.
    pub fn log_term(&self) -> f64 {
        (1.25 / self.delta).ln()
    }

    /// Noise standard deviation for a statistic of the given sensitivity.
    pub fn noise_std(&self, sensitivity: f64) -> f64 {
        (2.0 * self.log_term()).sqrt() * sensitivity / self.epsilon
    }
}

/// Where mechanism noise comes from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum NoiseSource {
    #[default]
    Gaussian,
    /// Adds exactly zero. Only compiled for tests.
    #[cfg(feature = "test-hooks")]
    Zero,
}

/// Noisy success rates `B~` with their clipped versions and per-pair noise levels.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedRates {
    rates: SuccessRates,
    noise_std: BTreeMap<(usize, usize, usize), f64>,
}

impl PerturbedRates {
    pub fn tilde_raw(&self, k: usize, i: usize, j: usize) -> f64 {
        self.rates.raw(k, i, j)
    }

    pub fn tilde_clipped(&self, k: usize, i: usize, j: usize) -> f64 {
        self.rates.clipped(k, i, j)
    }

    /// Noise standard deviation for the unordered observed pair `{i, j}`.
    pub fn noise_std(&self, k: usize, i: usize, j: usize) -> Option<f64> {
        self.noise_std.get(&(k, i.min(j), i.max(j))).copied()
    }

    pub fn noise_stds(&self) -> &BTreeMap<(usize, usize, usize), f64> {
        &self.noise_std
    }

    /// The perturbed rates viewed as ordinary success rates.
    pub fn as_rates(&self) -> &SuccessRates {
        &self.rates
    }
}

/// Change in `B[k][i][j]` caused by flipping one label: `1 / (n N)` per observed pair.
pub fn sensitivity_audit(schedule: &Schedule, n: usize) -> BTreeMap<(usize, usize, usize), f64> {
    schedule
        .observed()
        .map(|p| ((p.state, p.first, p.second), 1.0 / (n as f64 * p.proportion)))
        .collect()
}

/// Adds one Gaussian draw per observed unordered pair, derives the reverse
/// orientation as `1 - B~`, then clips with the rates' bound.
pub fn gaussian_mechanism(
    rates: &SuccessRates,
    schedule: &Schedule,
    n: usize,
    privacy: PrivacyParams,
    seed: u64,
) -> Result<PerturbedRates> {
    mechanism(rates, schedule, n, privacy, seed, NoiseSource::Gaussian)
}

/// [`gaussian_mechanism`] with an explicit noise source.
#[cfg(feature = "test-hooks")]
pub fn gaussian_mechanism_with(
    rates: &SuccessRates,
    schedule: &Schedule,
    n: usize,
    privacy: PrivacyParams,
    seed: u64,
    noise: NoiseSource,
) -> Result<PerturbedRates> {
    mechanism(rates, schedule, n, privacy, seed, noise)
}

fn mechanism(
    rates: &SuccessRates,
    schedule: &Schedule,
    n: usize,
    privacy: PrivacyParams,
    seed: u64,
    noise: NoiseSource,
) -> Result<PerturbedRates> {
    privacy.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let mut fractions = Vec::new();
    let mut stds = BTreeMap::new();
    for p in schedule.observed() {
        let (k, i, j) = (p.state, p.first, p.second);
        if !rates.is_observed(k, i, j) {
            return Err(Error::InvalidSchedule(format!("pair ({k},{i},{j}) has no success rate")));
        }
        let std = privacy.noise_std(1.0 / (n as f64 * p.proportion));
        let z: f64 = match noise {
            NoiseSource::Gaussian => StandardNormal.sample(&mut rng_for(seed, "dp-noise", &[k as u64, i as u64, j as u64])),
            #[cfg(feature = "test-hooks")]
            NoiseSource::Zero => 0.0,
        };
        fractions.push((k, i, j, rates.raw(k, i, j) + std * z, rates.count(k, i, j)));
        stds.insert((k, i, j), std);
    }
    Ok(PerturbedRates {
        rates: SuccessRates::from_fractions(schedule, &fractions, rates.clip_bound())?,
        noise_std: stds,
    })
}

/// The estimator run on privatized success rates. Weights are computed from
/// features and proportions only, so they match the non-private run.
pub fn dp_rl_low(
    data: &PreferenceDataset,
    features: &Features,
    reward_bound: f64,
    privacy: PrivacyParams,
    seed: u64,
    tie_seed: u64,
) -> Result<EstimateReport> {
    run(data, features, reward_bound, privacy, seed, tie_seed, NoiseSource::Gaussian)
}

/// [`dp_rl_low`] with an explicit noise source.
#[cfg(feature = "test-hooks")]
pub fn dp_rl_low_with(
    data: &PreferenceDataset,
    features: &Features,
    reward_bound: f64,
    privacy: PrivacyParams,
    seed: u64,
    tie_seed: u64,
    noise: NoiseSource,
) -> Result<EstimateReport> {
    run(data, features, reward_bound, privacy, seed, tie_seed, noise)
}

fn run(
    data: &PreferenceDataset,
    features: &Features,
    reward_bound: f64,
    privacy: PrivacyParams,
    seed: u64,
    tie_seed: u64,
    noise: NoiseSource,
) -> Result<EstimateReport> {
    privacy.validate()?;
    let (schedule, model) = prepare(data, features)?;
    run_with_model(data, &schedule, &model, reward_bound, privacy, seed, tie_seed, noise)
}

/// Same as [`dp_rl_low`] with a precomputed schedule and model.
pub fn dp_rl_low_with_model(
    data: &PreferenceDataset,
    schedule: &Schedule,
    model: &WeightModel,
    reward_bound: f64,
    privacy: PrivacyParams,
    seed: u64,
    tie_seed: u64,
) -> Result<EstimateReport> {
    run_with_model(data, schedule, model, reward_bound, privacy, seed, tie_seed, NoiseSource::Gaussian)
}

#[allow(clippy::too_many_arguments)]
fn run_with_model(
    data: &PreferenceDataset,
    schedule: &Schedule,
    model: &WeightModel,
    reward_bound: f64,
    privacy: PrivacyParams,
    seed: u64,
    tie_seed: u64,
    noise: NoiseSource,
) -> Result<EstimateReport> {
    privacy.validate()?;
    let rates = success_rates(data, schedule, reward_bound)?;
    let noisy = mechanism(&rates, schedule, data.len(), privacy, seed, noise)?;
    let lo = pair_log_odds(model, noisy.as_rates())?;
    report_from_log_odds(model, &lo, tie_seed, Some(privacy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Comparison;

    fn one_pair(wins: usize, n: usize) -> PreferenceDataset {
        PreferenceDataset::new(
            (0..n)
                .map(|t| Comparison {
                    state: 0,
                    first: 0,
                    second: 1,
                    winner_is_first: t < wins,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn rejects_parameters_outside_unit_interval() {
        assert!(PrivacyParams::new(0.9, 0.2).is_ok());
        for (e, d) in [(0.0, 0.2), (1.0, 0.2), (0.9, 0.0), (0.9, 1.0), (-1.0, 0.5), (f64::NAN, 0.5)] {
            assert!(PrivacyParams::new(e, d).is_err());
        }
    }

    #[test]
    fn noise_level_matches_closed_form() {
        let p = PrivacyParams::new(0.9, 0.2).unwrap();
        let expected = (2.0 * 6.25f64.ln()).sqrt() / 90.0;
        assert!((p.noise_std(0.01) - expected).abs() < 1e-15);
        assert!((expected - 0.0212718).abs() < 1e-7);
    }

    #[test]
    fn sensitivity_is_one_over_count() {
        let s = Schedule::from_entries(1, 3, &[(0, 0, 1, 0.75), (0, 0, 2, 0.25)]).unwrap();
        let audit = sensitivity_audit(&s, 100);
        assert!((audit[&(0, 0, 1)] - 1.0 / 75.0).abs() < 1e-15);
        assert!((audit[&(0, 0, 2)] - 0.04).abs() < 1e-15);
    }

    #[test]
    fn reverse_orientation_is_complement() {
        let data = one_pair(60, 100);
        let s = crate::instance::empirical_proportions(&data, 1, 2).unwrap();
        let r = success_rates(&data, &s, 1.0).unwrap();
        let p = gaussian_mechanism(&r, &s, 100, PrivacyParams::new(0.5, 0.1).unwrap(), 3).unwrap();
        assert_eq!(p.tilde_raw(0, 1, 0), 1.0 - p.tilde_raw(0, 0, 1));
        assert_ne!(p.tilde_raw(0, 0, 1), 0.6);
        assert_eq!(p.noise_std(0, 1, 0), p.noise_std(0, 0, 1));
    }
}
