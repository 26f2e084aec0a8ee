use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::{Features, Instance, Schedule};
use crate::dp::PrivacyParams;
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::seed::rng_for;

fn default_gap_step() -> f64 {
    0.05
}

/// Parameters of the synthetic benchmark instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    #[serde(rename = "S")]
    pub num_states: usize,
    #[serde(rename = "A")]
    pub num_actions: usize,
    #[serde(rename = "d")]
    pub dim: usize,
    #[serde(default = "default_gap_step")]
    pub gap_step: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub privacy: Option<PrivacyParams>,
}

impl GeneratorConfig {
    /// Two states, ten actions, five dimensions.
    pub fn standard(seed: u64) -> Self {
        Self {
            num_states: 2,
            num_actions: 10,
            dim: 5,
            gap_step: default_gap_step(),
            seed,
            privacy: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_states == 0 || self.dim == 0 {
            return Err(Error::InvalidArgument("S and d must be positive".into()));
        }
        if self.num_actions < 2 {
            return Err(Error::InvalidArgument("A must be at least 2".into()));
        }
        if !(self.gap_step > 0.0) || !self.gap_step.is_finite() {
            return Err(Error::InvalidArgument("gap_step must be positive".into()));
        }
        Ok(())
    }
}

/// Synthetic instance with `theta = 1`, features `phi'(k,i) - gap_step/|theta|^2 * i * theta`
/// where `phi'` is uniform on the probability simplex, and a uniform schedule.
///
/// Action `i` (0-based) has reward exactly `1 - gap_step * i` up to rounding.
pub fn make_paper_instance(cfg: &GeneratorConfig) -> Result<Instance> {
    cfg.validate()?;
    let (s, a, d) = (cfg.num_states, cfg.num_actions, cfg.dim);
    let theta = vec![1.0; d];
    let theta_sq = dot(&theta, &theta);
    let rho = if s == 2 {
        vec![0.4, 0.6]
    } else {
        vec![1.0 / s as f64; s]
    };
    let mut rng = rng_for(cfg.seed, "features", &[]);
    let mut data = Vec::with_capacity(s * a * d);
    for _k in 0..s {
        for i in 0..a {
            let raw: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let total: f64 = raw.iter().sum();
            let shift = cfg.gap_step / theta_sq * i as f64;
            data.extend(raw.iter().zip(&theta).map(|(x, t)| x / total - shift * t));
        }
    }
    let features = Features::new(s, a, d, data)?;
    // Each state carries an equal share; with two states this is 1 / (A(A-1)).
    let proportion = 2.0 / (s as f64 * a as f64 * (a as f64 - 1.0));
    let mut schedule = Schedule::zeros(s, a);
    for k in 0..s {
        for i in 0..a {
            for j in i + 1..a {
                schedule.set(k, i, j, proportion)?;
            }
        }
    }
    let max_abs = (0..s)
        .flat_map(|k| (0..a).map(move |i| (k, i)))
        .map(|(k, i)| dot(features.get(k, i), &theta).abs())
        .fold(0.0_f64, f64::max);
    let reward_bound = ((max_abs * 10.0 - 1e-9).ceil() / 10.0).max(0.0);
    Instance::new(features, theta, rho, schedule, reward_bound)
}
