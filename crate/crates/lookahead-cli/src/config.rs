//! Experiment configuration: JSON files, command-line overrides, defaults,
//! and the content hash stamped onto every output row.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Which experiment a config drives. Stored in the file so artifacts are
/// self-describing; each subcommand accepts only its own kind(s).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExperimentKind {
    Tightness,
    Contraction,
    SweepNoiseless,
    SweepNoisy,
    Verify,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Tightness => "TIGHTNESS",
            ExperimentKind::Contraction => "CONTRACTION",
            ExperimentKind::SweepNoiseless => "SWEEP_NOISELESS",
            ExperimentKind::SweepNoisy => "SWEEP_NOISY",
            ExperimentKind::Verify => "VERIFY",
        }
    }
}

/// Environment selector. The worst-case chain takes its `gamma` and `h`
/// from the experiment grid, so its variant carries no fields; the grid
/// world is parameterized here and seeded per run from the seed list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Counterexample,
    GridWorld {
        #[serde(default = "default_grid_n")]
        n: usize,
        #[serde(default = "default_grid_gamma")]
        gamma: f64,
        #[serde(default = "default_goal_reward")]
        goal_reward: f64,
        #[serde(default = "default_noise_reward_range")]
        noise_reward_range: (f64, f64),
    },
}

fn default_grid_n() -> usize {
    10
}
fn default_grid_gamma() -> f64 {
    0.97
}
fn default_goal_reward() -> f64 {
    1.0
}
fn default_noise_reward_range() -> (f64, f64) {
    (-0.1, 0.1)
}

impl EnvSpec {
    pub fn default_grid_world() -> Self {
        EnvSpec::GridWorld {
            n: default_grid_n(),
            gamma: default_grid_gamma(),
            goal_reward: default_goal_reward(),
            noise_reward_range: default_noise_reward_range(),
        }
    }
}

/// On-disk experiment configuration. Grid and seed fields left unset fall
/// back to per-experiment defaults; fields set to an empty list are
/// rejected. All knobs can be overridden by command-line flags.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    /// Tightness: the exact discount grid. Contraction: a `[lo, hi]`
    /// interval sampled per instance.
    #[serde(default)]
    pub gammas: Option<Vec<f64>>,
    #[serde(default)]
    pub h_values: Option<Vec<usize>>,
    #[serde(default)]
    pub m_values: Option<Vec<usize>>,
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub env: Option<EnvSpec>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    /// Noiseless sweep: stop once `||v* - v_k||` falls below this.
    #[serde(default)]
    pub value_tol: Option<f64>,
    /// Noisy sweep: stop once this many simulator queries are spent.
    #[serde(default)]
    pub query_budget: Option<u64>,
    /// Noisy sweep: evaluation noise drawn from `U(-eps_bound, eps_bound)`.
    #[serde(default)]
    pub eps_bound: Option<f64>,
    /// Noisy sweep: improvement-slack bound for the approximate greedy step.
    #[serde(default)]
    pub delta_bound: Option<f64>,
    /// Safety cap on iterations for any single run.
    #[serde(default)]
    pub max_iterations: Option<usize>,
    /// Equality/bound tolerance for tightness and contraction checks.
    #[serde(default)]
    pub tolerance: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))
    }
}

/// Command-line overrides collected by the argument parser.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed_count: Option<usize>,
    pub noisy: bool,
}

/// A fully resolved configuration: every field concrete, validated, and
/// ready to hash.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub experiment: ExperimentKind,
    pub gammas: Vec<f64>,
    pub h_values: Vec<usize>,
    pub m_values: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub env: Option<EnvSpec>,
    pub output_path: PathBuf,
    pub value_tol: f64,
    pub query_budget: u64,
    pub eps_bound: f64,
    pub delta_bound: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// First 12 hex digits of the SHA-256 of everything above except the
    /// output path, stamped onto each CSV row.
    #[serde(skip)]
    pub hash: String,
}

/// Builds the working configuration for `command` from an optional file
/// plus flag overrides, applying per-experiment defaults and validating
/// the invariants (non-empty grids and seeds, ranges in bounds).
pub fn resolve(
    command: ExperimentKind,
    file: Option<ExperimentConfig>,
    overrides: &Overrides,
) -> Result<Resolved, CliError> {
    let cfg = file.unwrap_or_default();
    let mut experiment = cfg.experiment.unwrap_or(command);
    if overrides.noisy {
        if !matches!(experiment, ExperimentKind::SweepNoiseless | ExperimentKind::SweepNoisy) {
            return Err(CliError::Config("--noisy only applies to sweep configs".into()));
        }
        experiment = ExperimentKind::SweepNoisy;
    }
    let compatible = match command {
        ExperimentKind::SweepNoiseless | ExperimentKind::SweepNoisy => {
            matches!(experiment, ExperimentKind::SweepNoiseless | ExperimentKind::SweepNoisy)
        }
        other => experiment == other,
    };
    if !compatible {
        return Err(CliError::Config(format!(
            "config is for {} but the {} subcommand was invoked",
            experiment.name(),
            command.name()
        )));
    }

    let gammas = cfg.gammas.unwrap_or_else(|| match experiment {
        ExperimentKind::Tightness => vec![0.9, 0.97, 0.99],
        _ => vec![0.8, 0.99],
    });
    let h_values = cfg.h_values.unwrap_or_else(|| match experiment {
        ExperimentKind::Tightness => vec![2, 3, 5],
        ExperimentKind::Contraction => vec![1, 2, 3],
        _ => (1..=8).collect(),
    });
    let m_values = cfg.m_values.unwrap_or_else(|| match experiment {
        ExperimentKind::Tightness => vec![1, 2, 5, 10],
        ExperimentKind::Contraction => vec![1, 2, 5],
        _ => (1..=30).collect(),
    });
    let lambdas = cfg.lambdas.unwrap_or_else(|| match experiment {
        ExperimentKind::Tightness => vec![0.0, 0.3, 0.7, 0.95],
        _ => vec![0.0, 0.5, 0.9],
    });
    let seeds = match overrides.seed_count {
        Some(n) => (0..n as u64).collect(),
        None => cfg.seeds.unwrap_or_else(|| match experiment {
            ExperimentKind::Contraction => (0..200).collect(),
            ExperimentKind::SweepNoiseless => (0..10).collect(),
            ExperimentKind::SweepNoisy => (0..20).collect(),
            ExperimentKind::Verify => (0..50).collect(),
            ExperimentKind::Tightness => vec![0],
        }),
    };

    let env = match experiment {
        ExperimentKind::Tightness => match cfg.env {
            None | Some(EnvSpec::Counterexample) => Some(EnvSpec::Counterexample),
            Some(_) => {
                return Err(CliError::Config(
                    "tightness runs on the counterexample chain; got a grid-world env".into(),
                ))
            }
        },
        ExperimentKind::SweepNoiseless | ExperimentKind::SweepNoisy => match cfg.env {
            None => Some(EnvSpec::default_grid_world()),
            Some(grid @ EnvSpec::GridWorld { .. }) => Some(grid),
            Some(EnvSpec::Counterexample) => {
                return Err(CliError::Config(
                    "sweep runs on a grid world; got the counterexample env".into(),
                ))
            }
        },
        // Contraction and verify generate their own instances.
        _ => None,
    };

    let output_path = overrides
        .out
        .clone()
        .or(cfg.output_path)
        .unwrap_or_else(|| PathBuf::from(default_output(experiment)));

    let resolved = Resolved {
        experiment,
        gammas,
        h_values,
        m_values,
        lambdas,
        seeds,
        env,
        output_path,
        value_tol: cfg.value_tol.unwrap_or(1e-7),
        query_budget: cfg.query_budget.unwrap_or(4_000_000),
        eps_bound: cfg.eps_bound.unwrap_or(0.3),
        delta_bound: cfg.delta_bound.unwrap_or(0.0),
        max_iterations: cfg.max_iterations.unwrap_or(200_000),
        tolerance: cfg.tolerance.unwrap_or(1e-10),
        hash: String::new(),
    };
    validate(&resolved)?;
    Ok(finish_hash(resolved))
}

fn default_output(experiment: ExperimentKind) -> &'static str {
    match experiment {
        ExperimentKind::Tightness => "tightness.csv",
        ExperimentKind::Contraction => "contraction.csv",
        ExperimentKind::SweepNoiseless | ExperimentKind::SweepNoisy => "sweep.csv",
        ExperimentKind::Verify => "verify.csv",
    }
}

fn validate(cfg: &Resolved) -> Result<(), CliError> {
    let err = |msg: String| Err(CliError::Config(msg));
    if cfg.gammas.is_empty() || cfg.h_values.is_empty() || cfg.m_values.is_empty() || cfg.lambdas.is_empty() {
        return err("grid ranges must be non-empty".into());
    }
    if cfg.seeds.is_empty() {
        return err("seed list must be non-empty".into());
    }
    for &g in &cfg.gammas {
        if !(g > 0.0 && g < 1.0) {
            return err(format!("discount {g} outside (0, 1)"));
        }
    }
    for &h in &cfg.h_values {
        if h < 1 {
            return err("lookahead depth must be >= 1".into());
        }
    }
    for &m in &cfg.m_values {
        if m < 1 {
            return err("evaluation step count must be >= 1".into());
        }
    }
    for &l in &cfg.lambdas {
        if !(0.0..=1.0).contains(&l) {
            return err(format!("lambda {l} outside [0, 1]"));
        }
    }
    if let Some(EnvSpec::GridWorld { n, gamma, noise_reward_range, .. }) = &cfg.env {
        if *n < 2 {
            return err("grid side length must be >= 2".into());
        }
        if !(*gamma > 0.0 && *gamma < 1.0) {
            return err(format!("grid discount {gamma} outside (0, 1)"));
        }
        if noise_reward_range.0 > noise_reward_range.1 {
            return err("noise reward range is inverted".into());
        }
    }
    if !(cfg.value_tol > 0.0 && cfg.value_tol.is_finite()) {
        return err("value_tol must be positive and finite".into());
    }
    if cfg.experiment == ExperimentKind::SweepNoisy && cfg.query_budget == 0 {
        return err("noisy sweep needs a positive query budget".into());
    }
    if !(cfg.eps_bound >= 0.0 && cfg.eps_bound.is_finite())
        || !(cfg.delta_bound >= 0.0 && cfg.delta_bound.is_finite())
    {
        return err("noise bounds must be non-negative and finite".into());
    }
    if cfg.max_iterations == 0 {
        return err("max_iterations must be >= 1".into());
    }
    if !(cfg.tolerance > 0.0 && cfg.tolerance.is_finite()) {
        return err("tolerance must be positive and finite".into());
    }
    Ok(())
}

fn finish_hash(mut cfg: Resolved) -> Resolved {
    // The output path is presentation, not content: two runs that differ
    // only in where the CSV lands should carry the same hash.
    let hashed = serde_json::json!({
        "experiment": cfg.experiment,
        "gammas": cfg.gammas,
        "h_values": cfg.h_values,
        "m_values": cfg.m_values,
        "lambdas": cfg.lambdas,
        "seeds": cfg.seeds,
        "env": cfg.env,
        "value_tol": cfg.value_tol,
        "query_budget": cfg.query_budget,
        "eps_bound": cfg.eps_bound,
        "delta_bound": cfg.delta_bound,
        "max_iterations": cfg.max_iterations,
        "tolerance": cfg.tolerance,
    });
    let digest = Sha256::digest(serde_json::to_string(&hashed).expect("config hash").as_bytes());
    let mut hex = String::with_capacity(12);
    for byte in digest.iter().take(6) {
        hex.push_str(&format!("{byte:02x}"));
    }
    cfg.hash = hex;
    cfg
}
