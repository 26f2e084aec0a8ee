//! Seeded Monte Carlo regret experiments.

mod output;
mod svg;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use output::{emit_outputs, read_results_csv, write_results_csv, OutputPaths};
pub use svg::render_svg;

use crate::baseline::{mle_fit, mle_select, zero_sum_reparam};
use crate::dp::{dp_rl_low_with_model, PrivacyParams};
use crate::error::{Error, Result};
use crate::estimator::{prepare, rl_low_with_model, WeightModel};
use crate::instance::{make_paper_instance, sample_dataset, GeneratorConfig, Instance, InstanceFile, Schedule};
use crate::mdp::{optimal_policy, rl_low_mdp_with_model, SearchMode, SearchOutcome, TransitionKernel};
use crate::par::Execution;
use crate::seed::derive_labeled;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    RlLow,
    DpRlLow,
    Mle,
    RlLowMdp,
}

impl Algorithm {
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::RlLow => "rl_low",
            Algorithm::DpRlLow => "dp_rl_low",
            Algorithm::Mle => "mle",
            Algorithm::RlLowMdp => "rl_low_mdp",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    Generator(GeneratorConfig),
    File(PathBuf),
    Inline(InstanceFile),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelSource {
    File(PathBuf),
    Inline(Vec<Vec<Vec<f64>>>),
    /// Every row equals the instance's `rho`.
    StateIndependent,
    SelfLoops,
}

fn default_grid() -> Vec<usize> {
    (1..=8).map(|i| 50 * i).collect()
}

fn default_repetitions() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    #[serde(default = "default_grid")]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    pub algorithms: Vec<Algorithm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub privacy: Option<PrivacyParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSource>,
    #[serde(default)]
    pub master_seed: u64,
    /// Directory for `results.csv`, `summary.json` and `regret.svg`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Record wall-clock milliseconds per cell. Off by default so that
    /// identical configurations give identical files.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub execution: Execution,
}

impl ExperimentConfig {
    pub fn new(instance: InstanceSource, algorithms: Vec<Algorithm>) -> Self {
        Self {
            instance,
            n_grid: default_grid(),
            repetitions: default_repetitions(),
            algorithms,
            privacy: None,
            kernel: None,
            master_seed: 0,
            output_dir: None,
            timing: false,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid[0] == 0 {
            return Err(Error::InvalidArgument("n_grid must be nonempty and positive".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("n_grid must be strictly increasing".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidArgument("repetitions must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidArgument("no algorithms selected".into()));
        }
        let mut seen = self.algorithms.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.algorithms.len() {
            return Err(Error::InvalidArgument("algorithms must not repeat".into()));
        }
        if let Some(p) = self.privacy_params() {
            p.validate()?;
        } else if self.algorithms.contains(&Algorithm::DpRlLow) {
            return Err(Error::InvalidArgument("dp_rl_low needs privacy parameters".into()));
        }
        if self.algorithms.contains(&Algorithm::RlLowMdp) && self.kernel.is_none() {
            return Err(Error::InvalidArgument("rl_low_mdp needs a kernel".into()));
        }
        if let InstanceSource::Generator(g) = &self.instance {
            g.validate()?;
        }
        Ok(())
    }

    /// Explicit privacy parameters, else those of the generator.
    pub fn privacy_params(&self) -> Option<PrivacyParams> {
        self.privacy.or(match &self.instance {
            InstanceSource::Generator(g) => g.privacy,
            _ => None,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Reads a config; relative paths inside it resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let InstanceSource::File(p) = &mut cfg.instance {
            fix(p);
        }
        if let Some(KernelSource::File(p)) = &mut cfg.kernel {
            fix(p);
        }
        if let Some(p) = &mut cfg.output_dir {
            fix(p);
        }
        Ok(cfg)
    }

    pub fn load_instance(&self) -> Result<Instance> {
        match &self.instance {
            InstanceSource::Generator(g) => make_paper_instance(g),
            InstanceSource::File(p) => Instance::load(p),
            InstanceSource::Inline(f) => f.clone().validate(),
        }
    }

    pub fn load_kernel(&self, v: &Instance) -> Result<Option<TransitionKernel>> {
        let k = match &self.kernel {
            None => return Ok(None),
            Some(KernelSource::File(p)) => TransitionKernel::load(p)?,
            Some(KernelSource::Inline(p)) => TransitionKernel::from_nested(p)?,
            Some(KernelSource::StateIndependent) => TransitionKernel::state_independent(v.rho(), v.num_actions())?,
            Some(KernelSource::SelfLoops) => TransitionKernel::self_loops(v.num_states(), v.num_actions())?,
        };
        if k.num_states() != v.num_states() || k.num_actions() != v.num_actions() {
            return Err(Error::Shape("kernel does not match the instance".into()));
        }
        Ok(Some(k))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub algo: Algorithm,
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub regret: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

/// `sum_k rho_k (r[k][i*_k] - r[k][selection_k])`.
pub fn simple_regret(v: &Instance, selections: &[usize]) -> Result<f64> {
    if selections.len() != v.num_states() {
        return Err(Error::Shape(format!(
            "{} selections for {} states",
            selections.len(),
            v.num_states()
        )));
    }
    let gaps = v.suboptimality_gaps();
    selections
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            gaps[k]
                .get(i)
                .map(|g| v.rho()[k] * g)
                .ok_or_else(|| Error::OutOfRange(format!("action {i} in state {k}")))
        })
        .sum()
}

/// Instance, kernel and configuration resolved for a run.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub instance: Instance,
    pub kernel: Option<TransitionKernel>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let instance = config.load_instance()?;
        let kernel = config.load_kernel(&instance)?;
        Ok(Self {
            config,
            instance,
            kernel,
        })
    }

    pub fn with_instance(config: ExperimentConfig, instance: Instance, kernel: Option<TransitionKernel>) -> Result<Self> {
        config.validate()?;
        if config.algorithms.contains(&Algorithm::RlLowMdp) && kernel.is_none() {
            return Err(Error::InvalidArgument("rl_low_mdp needs a kernel".into()));
        }
        Ok(Self {
            config,
            instance,
            kernel,
        })
    }

    pub fn run(&self) -> Result<ResultTable> {
        self.run_with(self.config.execution)
    }

    /// Runs every `(n, rep)` cell; each cell samples one dataset shared by all
    /// algorithms. Output order is `(algorithm, n, rep)` regardless of `exec`.
    pub fn run_with(&self, exec: Execution) -> Result<ResultTable> {
        let cfg = &self.config;
        let v = &self.instance;
        let c = v.check_consistency();
        if !c.consistent {
            let (state, first, second) = c.witness.unwrap_or((0, 0, 0));
            return Err(Error::Inconsistent { state, first, second });
        }
        let mle_instance = if cfg.algorithms.contains(&Algorithm::Mle) {
            Some(zero_sum_reparam(v)?)
        } else {
            None
        };
        let mdp_best = match &self.kernel {
            Some(k) if cfg.algorithms.contains(&Algorithm::RlLowMdp) => Some(optimal_policy(v, k)?),
            _ => None,
        };
        let privacy = cfg.privacy_params();

        // Sample counts depend only on n, so the label-free weight model is shared across repetitions.
        let mut models = Vec::with_capacity(cfg.n_grid.len());
        for &n in &cfg.n_grid {
            let probe = sample_dataset(v, n, 0)?;
            models.push(prepare(&probe, v.features())?);
        }

        let cells: Vec<(usize, usize)> = (0..cfg.n_grid.len())
            .flat_map(|g| (0..cfg.repetitions).map(move |r| (g, r)))
            .collect();
        let ctx = CellContext {
            cfg,
            v,
            kernel: self.kernel.as_ref(),
            mdp_best: mdp_best.as_ref(),
            mle_instance: mle_instance.as_ref(),
            privacy,
            models: &models,
        };
        let results = exec.map(&cells, |&(g, rep)| ctx.run_cell(g, rep));
        let mut per_cell = Vec::with_capacity(results.len());
        for r in results {
            per_cell.push(r?);
        }
        let mut rows = Vec::with_capacity(per_cell.len() * cfg.algorithms.len());
        for a in 0..cfg.algorithms.len() {
            rows.extend(per_cell.iter().map(|cell| cell[a].clone()));
        }
        Ok(ResultTable { rows })
    }
}

struct CellContext<'a> {
    cfg: &'a ExperimentConfig,
    v: &'a Instance,
    kernel: Option<&'a TransitionKernel>,
    mdp_best: Option<&'a SearchOutcome>,
    mle_instance: Option<&'a Instance>,
    privacy: Option<PrivacyParams>,
    models: &'a [(Schedule, WeightModel)],
}

impl CellContext<'_> {
    fn run_cell(&self, g: usize, rep: usize) -> Result<Vec<ResultRow>> {
        let n = self.cfg.n_grid[g];
        let coords = [n as u64, rep as u64];
        let master = self.cfg.master_seed;
        let data = sample_dataset(self.v, n, derive_labeled(master, "data", &coords))?;
        let (schedule, model) = &self.models[g];
        let l = self.v.reward_bound();
        let mut out = Vec::with_capacity(self.cfg.algorithms.len());
        for &algo in &self.cfg.algorithms {
            let seed = derive_labeled(master, algo.label(), &coords);
            let start = Instant::now();
            let regret = match algo {
                Algorithm::RlLow => {
                    let r = rl_low_with_model(&data, schedule, model, l, seed)?;
                    simple_regret(self.v, &r.selections)?
                }
                Algorithm::DpRlLow => {
                    let p = self.privacy.ok_or_else(|| Error::InvalidArgument("missing privacy".into()))?;
                    let noise = derive_labeled(seed, "noise", &[]);
                    let r = dp_rl_low_with_model(&data, schedule, model, l, p, noise, seed)?;
                    simple_regret(self.v, &r.selections)?
                }
                Algorithm::Mle => {
                    let w = self.mle_instance.unwrap_or(self.v);
                    let fit = mle_fit(&data, w.features(), l)?;
                    simple_regret(self.v, &mle_select(&fit, w.features(), seed)?.selections)?
                }
                Algorithm::RlLowMdp => {
                    let (k, best) = self
                        .kernel
                        .zip(self.mdp_best)
                        .ok_or_else(|| Error::InvalidArgument("missing kernel".into()))?;
                    let pi = rl_low_mdp_with_model(&data, schedule, model, l, k, self.v.rho(), seed, SearchMode::Enumerate)?;
                    crate::mdp::mdp_regret_against(self.v, k, best, &pi)?
                }
            };
            let wall_ms = if self.cfg.timing {
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            out.push(ResultRow {
                algo,
                n,
                rep,
                seed,
                regret,
                wall_ms,
            });
        }
        Ok(out)
    }
}

/// Runs a configuration end to end.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    Experiment::new(cfg.clone())?.run()
}

/// [`run_experiment`] with an explicit execution strategy.
pub fn run_experiment_with(cfg: &ExperimentConfig, exec: Execution) -> Result<ResultTable> {
    Experiment::new(cfg.clone())?.run_with(exec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algo: Algorithm,
    pub n: usize,
    pub reps: usize,
    pub mean: f64,
    /// Sample standard deviation (divisor `reps - 1`; zero for one repetition).
    pub std: f64,
    /// `std / sqrt(reps)`.
    pub se: f64,
}

/// Mean, sample standard deviation and standard error per `(algorithm, n)`,
/// in order of first appearance.
pub fn summarize(table: &ResultTable) -> Vec<SummaryRow> {
    let mut keys: Vec<(Algorithm, usize)> = Vec::new();
    for r in &table.rows {
        if !keys.contains(&(r.algo, r.n)) {
            keys.push((r.algo, r.n));
        }
    }
    keys.into_iter()
        .map(|(algo, n)| {
            let xs: Vec<f64> = table
                .rows
                .iter()
                .filter(|r| r.algo == algo && r.n == n)
                .map(|r| r.regret)
                .collect();
            let m = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / m;
            let std = if xs.len() > 1 {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                algo,
                n,
                reps: xs.len(),
                mean,
                std,
                se: std / m.sqrt(),
            }
        })
        .collect()
}
