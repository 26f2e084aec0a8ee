use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rllow_core::analysis::{hardness, lower_bound_adversary};
use rllow_core::dp::PrivacyParams;
use rllow_core::harness::{emit_outputs, summarize, Algorithm, Experiment, ExperimentConfig};
use rllow_core::instance::{make_paper_instance, sample_dataset, GeneratorConfig, Instance, PreferenceDataset};
use rllow_core::mdp::{mdp_hardness, mdp_regret, rl_low_mdp, TransitionKernel};
use rllow_core::{Error, Result};

#[derive(Parser)]
#[command(name = "rllow", version, about = "Locally optimal weights estimators for pairwise preference data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic benchmark instance.
    GenInstance {
        #[arg(long = "S", default_value_t = 2)]
        num_states: usize,
        #[arg(long = "A", default_value_t = 10)]
        num_actions: usize,
        #[arg(long = "d", default_value_t = 5)]
        dim: usize,
        #[arg(long, default_value_t = 0.05)]
        gap_step: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a comparison dataset from an instance.
    Sample {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte Carlo experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Print the hardness report of an instance.
    Analyze {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        privacy: PrivacyArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the lower-bound alternative instance.
    Adversary {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Policy search with a known transition kernel.
    Mdp {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        kernel: PathBuf,
        /// Estimate a policy from this dataset.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Run this experiment config with `rl_low_mdp` on the given instance and kernel.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        tie_seed: u64,
    },
}

#[derive(Args)]
struct PrivacyArgs {
    #[arg(long, requires = "delta")]
    epsilon: Option<f64>,
    #[arg(long, requires = "epsilon")]
    delta: Option<f64>,
}

impl PrivacyArgs {
    fn params(&self) -> Result<Option<PrivacyParams>> {
        match (self.epsilon, self.delta) {
            (Some(e), Some(d)) => PrivacyParams::new(e, d).map(Some),
            _ => Ok(None),
        }
    }
}

fn write_json(value: &impl serde::Serialize, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_config(cfg: ExperimentConfig, instance: Option<Instance>, kernel: Option<TransitionKernel>) -> Result<()> {
    let exp = match instance {
        Some(v) => Experiment::with_instance(cfg, v, kernel)?,
        None => Experiment::new(cfg)?,
    };
    let table = exp.run()?;
    let summary = summarize(&table);
    let dir = exp.config.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let paths = emit_outputs(&summary, &table, &dir)?;
    eprintln!(
        "wrote {} rows to {}",
        table.rows.len(),
        paths.results_csv.display()
    );
    write_json(&summary, None)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenInstance {
            num_states,
            num_actions,
            dim,
            gap_step,
            seed,
            out,
        } => {
            let cfg = GeneratorConfig {
                num_states,
                num_actions,
                dim,
                gap_step,
                seed,
                privacy: None,
            };
            make_paper_instance(&cfg)?.save(out)
        }
        Command::Sample { instance, n, seed, out } => {
            let v = Instance::load(instance)?;
            sample_dataset(&v, n, seed)?.save(out)
        }
        Command::Run { config, out_dir } => {
            let mut cfg = ExperimentConfig::load(config)?;
            if out_dir.is_some() {
                cfg.output_dir = out_dir;
            }
            run_config(cfg, None, None)
        }
        Command::Analyze { instance, privacy, out } => {
            let v = Instance::load(instance)?;
            let report = hardness(&v, privacy.params()?)?;
            write_json(&report, out.as_deref())
        }
        Command::Adversary { instance, out } => {
            let v = Instance::load(instance)?;
            let adv = lower_bound_adversary(&v)?;
            adv.pair.alt.save(&out)?;
            write_json(&adv.checks, None)
        }
        Command::Mdp {
            instance,
            kernel,
            dataset,
            config,
            tie_seed,
        } => {
            let v = Instance::load(instance)?;
            let k = TransitionKernel::load(kernel)?;
            let h = mdp_hardness(&v, &k)?;
            let mut out = serde_json::json!({
                "optimal_policy": h.optimal,
                "H_MDP": h.h_mdp,
            });
            if let Some(path) = dataset {
                let data = PreferenceDataset::load(path)?;
                let pi = rl_low_mdp(&data, v.features(), v.reward_bound(), &k, v.rho(), tie_seed)?;
                out["regret"] = serde_json::json!(mdp_regret(&v, &k, &pi)?);
                out["policy"] = serde_json::json!(pi);
            }
            write_json(&out, None)?;
            if let Some(path) = config {
                let mut cfg = ExperimentConfig::load(path)?;
                cfg.algorithms = vec![Algorithm::RlLowMdp];
                cfg.kernel = Some(rllow_core::harness::KernelSource::Inline(k.to_nested()));
                run_config(cfg, Some(v), Some(k))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
