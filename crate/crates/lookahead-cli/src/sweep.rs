//! `sweep`: runs the contracting and non-contracting schemes over an
//! h-by-m grid of seeded grid worlds. Noiseless mode counts simulator
//! queries to convergence; noisy mode spends a fixed query budget and
//! reports the exact value of the output policy. A companion file carries
//! per-cell means and standard errors over seeds.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;

use lookahead_pi::envs::{build_gridworld, GridWorldSpec};
use lookahead_pi::mdp::{optimal_value, Mdp, ValueFunction};
use lookahead_pi::schemes::{run_with_oracle, AlgoConfig, SchemeKind, StopReason, StoppingRule};

use crate::config::{EnvSpec, ExperimentKind, Resolved};
use crate::output::write_csv;
use crate::CliError;

/// Decorrelates the algorithm's noise stream from the environment's
/// reward-sampling stream, which both descend from the same row seed.
const ALGO_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

pub const NOISELESS_HEADER: &str = "scheme,h,m,seed,queries,iterations,final_dist,config_hash";
pub const NOISY_HEADER: &str = "scheme,h,m,seed,queries,iterations,final_dist,\
                                eps_bound,delta_bound,final_policy_dist,config_hash";

struct Cell {
    scheme: SchemeKind,
    h: usize,
    m: usize,
    seed: u64,
}

struct Outcome {
    queries: u64,
    iterations: usize,
    final_dist: f64,
    final_policy_dist: f64,
}

pub fn cmd_sweep(cfg: &Resolved) -> Result<(), CliError> {
    let noisy = cfg.experiment == ExperimentKind::SweepNoisy;
    let (n, gamma, goal_reward, noise_reward_range) = match &cfg.env {
        Some(EnvSpec::GridWorld { n, gamma, goal_reward, noise_reward_range }) => {
            (*n, *gamma, *goal_reward, *noise_reward_range)
        }
        _ => return Err(CliError::Config("sweep requires a grid-world env".into())),
    };

    // One environment and optimal-value oracle per seed, shared across cells.
    let envs: Vec<(u64, (Mdp, ValueFunction))> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let grid = build_gridworld(&GridWorldSpec {
                n,
                gamma,
                goal_reward,
                noise_reward_range,
                rng_seed: seed,
            })
            .map_err(|e| CliError::Config(e.to_string()))?;
            let (v_star, _) = optimal_value(&grid);
            Ok((seed, (grid, v_star)))
        })
        .collect::<Result<_, CliError>>()?;
    let envs: BTreeMap<u64, (Mdp, ValueFunction)> = envs.into_iter().collect();

    let mut cells = Vec::new();
    for &scheme in &[SchemeKind::HmPi, SchemeKind::NcHmPi] {
        for &h in &cfg.h_values {
            for &m in &cfg.m_values {
                for &seed in &cfg.seeds {
                    cells.push(Cell { scheme, h, m, seed });
                }
            }
        }
    }

    let outcomes: Vec<(String, usize, usize, u64, Outcome)> = cells
        .par_iter()
        .map(|cell| {
            let (grid, v_star) = &envs[&cell.seed];
            let stop = if noisy {
                StoppingRule {
                    value_tol: None,
                    query_budget: cfg.query_budget,
                    max_iterations: cfg.max_iterations,
                }
            } else {
                StoppingRule::until_dist(cfg.value_tol, cfg.max_iterations)
            };
            let mut algo = AlgoConfig::new(cell.scheme, cell.h, stop)
                .with_m(cell.m)
                .with_seed(cell.seed ^ ALGO_SEED_SALT);
            if noisy {
                algo = algo.with_noise(cfg.eps_bound, cfg.delta_bound);
            }
            let v0 = ValueFunction::zeros(grid.n_states());
            let report = run_with_oracle(grid, &v0, &algo, v_star)
                .map_err(|e| CliError::Check(e.to_string()))?;
            if !noisy && report.stop_reason != StopReason::Converged {
                return Err(CliError::Check(format!(
                    "{} h={} m={} seed={} hit the iteration cap before reaching {}",
                    cell.scheme, cell.h, cell.m, cell.seed, cfg.value_tol
                )));
            }
            Ok((
                cell.scheme.name().to_string(),
                cell.h,
                cell.m,
                cell.seed,
                Outcome {
                    queries: report.total_queries,
                    iterations: report.n_iterations(),
                    final_dist: report.final_dist_value(),
                    final_policy_dist: report.final_dist_policy_value(),
                },
            ))
        })
        .collect::<Result<_, CliError>>()?;

    let mut outcomes = outcomes;
    outcomes.sort_by(|a, b| (&a.0, a.1, a.2, a.3).cmp(&(&b.0, b.1, b.2, b.3)));

    let mut rows = Vec::with_capacity(outcomes.len());
    for (scheme, h, m, seed, out) in &outcomes {
        if noisy {
            rows.push(format!(
                "{scheme},{h},{m},{seed},{},{},{},{},{},{},{}",
                out.queries,
                out.iterations,
                out.final_dist,
                cfg.eps_bound,
                cfg.delta_bound,
                out.final_policy_dist,
                cfg.hash
            ));
        } else {
            rows.push(format!(
                "{scheme},{h},{m},{seed},{},{},{},{}",
                out.queries, out.iterations, out.final_dist, cfg.hash
            ));
        }
    }
    let header = if noisy { NOISY_HEADER } else { NOISELESS_HEADER };
    write_csv(&cfg.output_path, header, &rows)?;
    println!("wrote {} rows to {}", rows.len(), cfg.output_path.display());

    let companion = companion_path(&cfg.output_path);
    let stats = aggregate(&outcomes, noisy, &cfg.hash);
    let stats_header = if noisy {
        "scheme,h,m,n_seeds,mean_queries,se_queries,mean_final_dist,se_final_dist,\
         mean_final_policy_dist,se_final_policy_dist,config_hash"
    } else {
        "scheme,h,m,n_seeds,mean_queries,se_queries,mean_final_dist,se_final_dist,config_hash"
    };
    write_csv(&companion, stats_header, &stats)?;
    println!("wrote {} cell summaries to {}", stats.len(), companion.display());
    Ok(())
}

/// `sweep.csv` -> `sweep_stderr.csv`, keeping the directory.
pub fn companion_path(path: &std::path::Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
    path.with_file_name(format!("{stem}_stderr.csv"))
}

fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn aggregate(
    outcomes: &[(String, usize, usize, u64, Outcome)],
    noisy: bool,
    hash: &str,
) -> Vec<String> {
    let mut cells: BTreeMap<(&String, usize, usize), Vec<&Outcome>> = BTreeMap::new();
    for (scheme, h, m, _, out) in outcomes {
        cells.entry((scheme, *h, *m)).or_default().push(out);
    }
    cells
        .into_iter()
        .map(|((scheme, h, m), outs)| {
            let queries: Vec<f64> = outs.iter().map(|o| o.queries as f64).collect();
            let dists: Vec<f64> = outs.iter().map(|o| o.final_dist).collect();
            let (mq, sq) = mean_and_se(&queries);
            let (md, sd) = mean_and_se(&dists);
            if noisy {
                let pol: Vec<f64> = outs.iter().map(|o| o.final_policy_dist).collect();
                let (mp, sp) = mean_and_se(&pol);
                format!("{scheme},{h},{m},{},{mq},{sq},{md},{sd},{mp},{sp},{hash}", outs.len())
            } else {
                format!("{scheme},{h},{m},{},{mq},{sq},{md},{sd},{hash}", outs.len())
            }
        })
        .collect()
}
