use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Features, Instance, Schedule};
use crate::error::{Error, Result};

/// On-disk JSON layout of an instance. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    #[serde(rename = "S")]
    pub num_states: usize,
    #[serde(rename = "A")]
    pub num_actions: usize,
    #[serde(rename = "d")]
    pub dim: usize,
    /// `S x A x d` nested arrays.
    pub features: Vec<Vec<Vec<f64>>>,
    pub theta: Vec<f64>,
    pub rho: Vec<f64>,
    /// `[k, i, j, N]` entries with `i < j`.
    pub schedule: Vec<(usize, usize, usize, f64)>,
    #[serde(rename = "L")]
    pub reward_bound: f64,
}

impl InstanceFile {
    /// Checks shapes and instance invariants.
    pub fn validate(self) -> Result<Instance> {
        let features = Features::from_nested(&self.features)?;
        if features.num_states() != self.num_states
            || features.num_actions() != self.num_actions
            || features.dim() != self.dim
        {
            return Err(Error::Shape(format!(
                "features are {}x{}x{}, header says {}x{}x{}",
                features.num_states(),
                features.num_actions(),
                features.dim(),
                self.num_states,
                self.num_actions,
                self.dim
            )));
        }
        let schedule = Schedule::from_entries(self.num_states, self.num_actions, &self.schedule)?;
        Instance::new(features, self.theta, self.rho, schedule, self.reward_bound)
    }
}

impl From<&Instance> for InstanceFile {
    fn from(v: &Instance) -> Self {
        Self {
            num_states: v.num_states(),
            num_actions: v.num_actions(),
            dim: v.dim(),
            features: v.features().to_nested(),
            theta: v.theta().to_vec(),
            rho: v.rho().to_vec(),
            schedule: v.schedule().entries(),
            reward_bound: v.reward_bound(),
        }
    }
}

impl Instance {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str::<InstanceFile>(s)?.validate()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&InstanceFile::from(self))?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()?).map_err(|e| Error::io(path, e))
    }
}
